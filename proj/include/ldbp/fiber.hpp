#pragma once

#include <cmath>

namespace ldbp {

// Fiber and link parameters in SI units.  alpha is the power attenuation
// coefficient in Np/m, so the field decays as exp(-alpha z / 2).
struct FiberParams {
  double alpha = 0.0;        // 1/m
  double beta2 = 0.0;        // s^2/m
  double gamma = 0.0;        // 1/(W m)
  double span_length = 0.0;  // m
  int span_count = 1;

  // Engineering units as used in configs: dB/km, ps^2/km, 1/(W km), km.
  static FiberParams from_engineering(double alpha_db_per_km, double beta2_ps2_per_km,
                                      double gamma_per_w_km, double span_km, int spans);

  double span_loss_db() const;
  // Amplitude gain that restores one span's loss, exp(alpha L / 2).
  double span_amplitude_gain() const { return std::exp(0.5 * alpha * span_length); }

  void validate() const;
};

// Defaults for standard single-mode fiber.
FiberParams standard_smf(double span_km, int spans);

// Length over which the nonlinearity of a lossy segment of length dz acts,
// referenced to the power at the segment midpoint (where the symmetric
// split-step scheme applies its nonlinear operator):
//   2 sinh(alpha dz / 2) / alpha  ==  exp(alpha dz / 2) (1 - exp(-alpha dz)) / alpha.
// Reduces to dz for alpha == 0.
double midpoint_effective_length(double alpha, double dz);

// Classic start-referenced effective length (1 - exp(-alpha dz)) / alpha.
double effective_length(double alpha, double dz);

}  // namespace ldbp
