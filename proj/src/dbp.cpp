#include "ldbp/dbp.hpp"

#include <algorithm>

#include "ldbp/channel.hpp"
#include "ldbp/error.hpp"

namespace ldbp {

void DbpConfig::validate() const {
  if (steps_per_span < 1) throw ConfigError("DBP needs at least one step per span");
  schedule.validate();
}

ComplexSignal dbp_equalize(const ComplexSignal& y, const FiberParams& params,
                           const DbpConfig& cfg) {
  cfg.validate();
  params.validate();
  auto steps = step_schedule(params.span_length, cfg.steps_per_span, cfg.schedule, params.alpha);
  std::reverse(steps.begin(), steps.end());
  const double inv_gain = 1.0 / params.span_amplitude_gain();
  CVec u = y.samples();
  for (int s = 0; s < params.span_count; ++s) {
    for (auto& v : u) v *= inv_gain;
    symmetric_ssfm_span(u, y.sample_rate(), params, steps, Direction::backward, cfg.gamma_scale);
  }
  return ComplexSignal(std::move(u), y.sample_rate());
}

ComplexSignal cdc_equalize(const ComplexSignal& y, const FiberParams& params) {
  DbpConfig cfg;
  cfg.gamma_scale = 0.0;
  return dbp_equalize(y, params, cfg);
}

}  // namespace ldbp
