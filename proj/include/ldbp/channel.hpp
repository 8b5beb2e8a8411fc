#pragma once

#include <span>
#include <vector>

#include "ldbp/fiber.hpp"
#include "ldbp/rng.hpp"
#include "ldbp/schedule.hpp"
#include "ldbp/signal.hpp"

namespace ldbp {

inline constexpr double kPlanck = 6.62607015e-34;  // J s
inline constexpr double kCarrierFrequency = 193.41e12;  // Hz

// Lumped amplifier after every span; its gain exactly restores the span
// loss (G = exp(alpha L_sp / 2) in amplitude).
struct AmpConfig {
  bool noise_enabled = true;
  double noise_figure_db = 4.5;
  double carrier_frequency = kCarrierFrequency;
};

double amp_gain_db(const FiberParams& params);

// Complex ASE variance per sample, (G^2 - 1) h nu NF / 2 * f_samp.
double ase_variance_per_sample(const FiberParams& params, const AmpConfig& amp,
                               double sample_rate);

// Receiver front end: ideal low-pass then resampling.  lp_bandwidth is the
// total (two-sided) passband width, so bins with |f| > lp_bandwidth / 2 are
// removed.  With brick_wall == false only the resampler limits the band.
struct RxFrontendConfig {
  double lp_bandwidth = 35e9;
  double out_sample_rate = 40e9;
  bool brick_wall = true;

  void validate() const;
};

// x <- x exp(i sign gamma z_eff |x|^2), elementwise.
ComplexSignal nonlinear_phase_step(const ComplexSignal& signal, double gamma, double z_eff,
                                   int sign);
void nonlinear_phase_inplace(std::span<cplx> x, double phase_per_watt);

// One span of the symmetric split-step scheme, in place.  `steps` lists
// step lengths in traversal order.  Adjacent half-steps are merged, so M
// steps cost M + 1 linear operators.  Each nonlinear operator uses the
// midpoint-referenced effective length of its step, scaled by gamma_scale.
void symmetric_ssfm_span(CVec& u, double sample_rate, const FiberParams& params,
                         std::span<const double> steps, Direction direction,
                         double gamma_scale = 1.0);

ComplexSignal ssfm_span_forward(const ComplexSignal& signal, const FiberParams& params,
                                int steps_per_span,
                                const StepSchedule& schedule = StepSchedule{});

// Gain G plus optional circular white Gaussian ASE noise.
ComplexSignal amplify(const ComplexSignal& signal, const FiberParams& params,
                      const AmpConfig& amp, RngStream& rng);

// N_sp x (span + amplifier).
ComplexSignal propagate_link(const ComplexSignal& tx, const FiberParams& params,
                             const AmpConfig& amp, int forward_steps_per_span, RngStream& rng);

ComplexSignal rx_frontend(const ComplexSignal& signal, const RxFrontendConfig& cfg);

}  // namespace ldbp
