#pragma once

#include "ldbp/fiber.hpp"
#include "ldbp/schedule.hpp"
#include "ldbp/signal.hpp"

namespace ldbp {

struct DbpConfig {
  int steps_per_span = 1;
  StepSchedule schedule;
  // Multiplies gamma in every nonlinear step; 0 gives pure dispersion
  // compensation with gain normalization.
  double gamma_scale = 1.0;

  void validate() const;
};

// Digital backpropagation by the symmetric split-step scheme with negated
// fiber parameters.  Spans are undone last-to-first: each starts with the
// inverse amplifier gain G^-1 = exp(-alpha L_sp / 2), then walks the span's
// steps from its output end back to its input.
ComplexSignal dbp_equalize(const ComplexSignal& y, const FiberParams& params,
                           const DbpConfig& cfg);

// Chromatic-dispersion compensation: dbp_equalize with gamma_scale = 0.
ComplexSignal cdc_equalize(const ComplexSignal& y, const FiberParams& params);

}  // namespace ldbp
