#pragma once

#include <string>
#include <vector>

namespace ldbp {

enum class ScheduleKind { uniform, logarithmic };

struct StepSchedule {
  ScheduleKind kind = ScheduleKind::uniform;
  // Logarithmic only: the partition equalizes slices of
  // integral exp(-factor * alpha * z) dz, so factor 1 gives equal
  // effective-length slices and factor -> 0 tends to uniform.
  double factor = 1.0;

  void validate() const;
};

// Step lengths, in physical propagation order (span input first), that sum
// to span_length.  The last step absorbs accumulated rounding.
std::vector<double> step_schedule(double span_length, int steps, const StepSchedule& schedule,
                                  double alpha);

const char* to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

}  // namespace ldbp
