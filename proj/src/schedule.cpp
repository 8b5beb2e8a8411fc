#include "ldbp/schedule.hpp"

#include <cmath>
#include <string>

#include "ldbp/error.hpp"

namespace ldbp {

void StepSchedule::validate() const {
  if (kind == ScheduleKind::logarithmic && !(factor > 0.0))
    throw ConfigError("logarithmic schedule factor must be positive");
}

std::vector<double> step_schedule(double span_length, int steps, const StepSchedule& schedule,
                                  double alpha) {
  if (steps < 1) throw ConfigError("steps per span must be at least 1");
  schedule.validate();
  std::vector<double> out(static_cast<std::size_t>(steps));
  const double a = schedule.factor * alpha;
  if (schedule.kind == ScheduleKind::uniform || a * span_length < 1e-12) {
    for (auto& d : out) d = span_length / steps;
  } else {
    // Boundary z_i solves (1 - exp(-a z_i)) = (i / M) (1 - exp(-a L)).
    const double total = -std::expm1(-a * span_length);
    double prev = 0.0;
    for (int i = 1; i < steps; ++i) {
      const double z = -std::log1p(-total * i / steps) / a;
      out[static_cast<std::size_t>(i - 1)] = z - prev;
      prev = z;
    }
    out.back() = span_length - prev;
  }
  // Force the exact sum: the last step takes whatever the others leave.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < out.size(); ++i) head += out[i];
  out.back() = span_length - head;
  return out;
}

const char* to_string(ScheduleKind kind) {
  return kind == ScheduleKind::uniform ? "uniform" : "logarithmic";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "uniform") return ScheduleKind::uniform;
  if (name == "logarithmic") return ScheduleKind::logarithmic;
  throw ConfigError("unknown step schedule '" + name + "'");
}

}  // namespace ldbp
