#include "ldbp/channel.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ldbp/error.hpp"

namespace ldbp {

double amp_gain_db(const FiberParams& params) { return params.span_loss_db(); }

double ase_variance_per_sample(const FiberParams& params, const AmpConfig& amp,
                               double sample_rate) {
  const double g2 = std::exp(params.alpha * params.span_length);  // power gain
  const double nf = std::pow(10.0, amp.noise_figure_db / 10.0);
  return (g2 - 1.0) * kPlanck * amp.carrier_frequency * nf / 2.0 * sample_rate;
}

void RxFrontendConfig::validate() const {
  if (!(out_sample_rate > 0.0)) throw ConfigError("receiver sample rate must be positive");
  if (brick_wall && !(lp_bandwidth > 0.0 && lp_bandwidth <= out_sample_rate))
    throw ConfigError("low-pass bandwidth must lie in (0, receiver sample rate]");
}

void nonlinear_phase_inplace(std::span<cplx> x, double phase_per_watt) {
  if (phase_per_watt == 0.0) return;
  for (auto& v : x) {
    const double th = phase_per_watt * std::norm(v);
    const double c = std::cos(th);
    const double s = std::sin(th);
    v = {v.real() * c - v.imag() * s, v.real() * s + v.imag() * c};
  }
}

ComplexSignal nonlinear_phase_step(const ComplexSignal& signal, double gamma, double z_eff,
                                   int sign) {
  CVec x = signal.samples();
  nonlinear_phase_inplace(x, (sign >= 0 ? 1.0 : -1.0) * gamma * z_eff);
  return ComplexSignal(std::move(x), signal.sample_rate());
}

void symmetric_ssfm_span(CVec& u, double sample_rate, const FiberParams& params,
                         std::span<const double> steps, Direction direction,
                         double gamma_scale) {
  if (steps.empty()) throw ConfigError("split-step span needs at least one step");
  const std::size_t n = u.size();
  // Operator responses by distance; uniform schedules need only two.
  std::vector<std::pair<double, CVec>> cache;
  auto response = [&](double z) -> const CVec& {
    for (const auto& [d, r] : cache)
      if (d == z) return r;
    cache.emplace_back(z, build_dispersion_operator(params, z, direction, n, sample_rate)
                              .frequency_response);
    return cache.back().second;
  };
  const double sign = direction == Direction::forward ? 1.0 : -1.0;
  const double g = sign * gamma_scale * params.gamma;

  double pending = 0.5 * steps[0];
  for (std::size_t j = 0; j < steps.size(); ++j) {
    apply_response_inplace(u, response(pending));
    nonlinear_phase_inplace(u, g * midpoint_effective_length(params.alpha, steps[j]));
    pending = 0.5 * steps[j] + (j + 1 < steps.size() ? 0.5 * steps[j + 1] : 0.0);
  }
  apply_response_inplace(u, response(pending));
}

ComplexSignal ssfm_span_forward(const ComplexSignal& signal, const FiberParams& params,
                                int steps_per_span, const StepSchedule& schedule) {
  const auto steps = step_schedule(params.span_length, steps_per_span, schedule, params.alpha);
  CVec u = signal.samples();
  symmetric_ssfm_span(u, signal.sample_rate(), params, steps, Direction::forward);
  return ComplexSignal(std::move(u), signal.sample_rate());
}

ComplexSignal amplify(const ComplexSignal& signal, const FiberParams& params,
                      const AmpConfig& amp, RngStream& rng) {
  const double gain = params.span_amplitude_gain();
  CVec x = signal.samples();
  for (auto& v : x) v *= gain;
  if (amp.noise_enabled) {
    const double sigma =
        std::sqrt(0.5 * ase_variance_per_sample(params, amp, signal.sample_rate()));
    for (auto& v : x) {
      const double re = rng.normal();
      const double im = rng.normal();
      v += cplx{sigma * re, sigma * im};
    }
  }
  return ComplexSignal(std::move(x), signal.sample_rate());
}

ComplexSignal propagate_link(const ComplexSignal& tx, const FiberParams& params,
                             const AmpConfig& amp, int forward_steps_per_span, RngStream& rng) {
  params.validate();
  const auto steps = step_schedule(params.span_length, forward_steps_per_span, StepSchedule{},
                                   params.alpha);
  ComplexSignal u = tx;
  for (int s = 0; s < params.span_count; ++s) {
    CVec x = std::move(u).take_samples();
    symmetric_ssfm_span(x, tx.sample_rate(), params, steps, Direction::forward);
    u = amplify(ComplexSignal(std::move(x), tx.sample_rate()), params, amp, rng);
  }
  return u;
}

ComplexSignal rx_frontend(const ComplexSignal& signal, const RxFrontendConfig& cfg) {
  cfg.validate();
  if (cfg.out_sample_rate > signal.sample_rate() * (1.0 + 1e-12))
    throw ConfigError("receiver sample rate exceeds the simulation rate");
  if (!cfg.brick_wall) return resample(signal, cfg.out_sample_rate);
  CVec x = signal.samples();
  fft_inplace(x);
  const double edge = 0.5 * cfg.lp_bandwidth;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (std::abs(bin_frequency(k, x.size(), signal.sample_rate())) > edge) x[k] = 0.0;
  ifft_inplace(x);
  return resample(ComplexSignal(std::move(x), signal.sample_rate()), cfg.out_sample_rate);
}

}  // namespace ldbp
