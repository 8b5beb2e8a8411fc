#include "ldbp/fiber.hpp"

#include <string>

#include "ldbp/error.hpp"

namespace ldbp {

namespace {
constexpr double kDbPerNeper = 4.342944819032518;  // 10 log10(e)
}

FiberParams FiberParams::from_engineering(double alpha_db_per_km, double beta2_ps2_per_km,
                                          double gamma_per_w_km, double span_km, int spans) {
  FiberParams p;
  p.alpha = alpha_db_per_km / kDbPerNeper / 1e3;
  p.beta2 = beta2_ps2_per_km * 1e-24 / 1e3;
  p.gamma = gamma_per_w_km / 1e3;
  p.span_length = span_km * 1e3;
  p.span_count = spans;
  p.validate();
  return p;
}

double FiberParams::span_loss_db() const { return alpha * span_length * kDbPerNeper; }

void FiberParams::validate() const {
  if (!(span_length > 0.0)) throw ConfigError("span length must be positive");
  if (span_count < 1) throw ConfigError("span count must be at least 1");
  if (!(alpha >= 0.0)) throw ConfigError("attenuation must be non-negative");
  if (!std::isfinite(beta2) || !std::isfinite(gamma))
    throw ConfigError("dispersion and nonlinearity must be finite");
}

FiberParams standard_smf(double span_km, int spans) {
  return FiberParams::from_engineering(0.2, -21.7, 1.3, span_km, spans);
}

double midpoint_effective_length(double alpha, double dz) {
  const double x = 0.5 * alpha * dz;
  if (std::abs(x) < 1e-8) return dz * (1.0 + x * x / 6.0);
  return 2.0 * std::sinh(x) / alpha;
}

double effective_length(double alpha, double dz) {
  const double x = alpha * dz;
  if (std::abs(x) < 1e-8) return dz * (1.0 - 0.5 * x);
  return -std::expm1(-x) / alpha;
}

}  // namespace ldbp
