#include "ldbp/transceiver.hpp"

#include <cmath>
#include <numbers>

#include "ldbp/error.hpp"

namespace ldbp {

Constellation Constellation::qam16() {
  Constellation c;
  c.name = "16QAM";
  const double levels[] = {-3.0, -1.0, 1.0, 3.0};
  // Mean |.|^2 of the +/-{1,3} grid is 10.
  const double s = 1.0 / std::sqrt(10.0);
  for (double re : levels)
    for (double im : levels) c.points.emplace_back(re * s, im * s);
  return c;
}

double rrc_value(double t, double b) {
  constexpr double pi = std::numbers::pi;
  if (std::abs(t) < 1e-12) return 1.0 + b * (4.0 / pi - 1.0);
  if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
    return b / std::sqrt(2.0) *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) +
            (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
  }
  const double x = 4.0 * b * t;
  return (std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b))) /
         (pi * t * (1.0 - x * x));
}

SymmetricFilter rrc_filter(const PulseShape& shape, int sps) {
  if (sps < 1) throw ConfigError("samples per symbol must be positive");
  if (!(shape.rolloff > 0.0 && shape.rolloff <= 1.0))
    throw ConfigError("RRC roll-off must lie in (0, 1]");
  if (shape.span_symbols < 1) throw ConfigError("RRC span must be at least one symbol");
  const std::size_t K = static_cast<std::size_t>(shape.span_symbols) * static_cast<std::size_t>(sps);
  CVec half(K + 1);
  double energy = 0.0;
  for (std::size_t i = 0; i <= K; ++i) {
    const double v = rrc_value(static_cast<double>(i) / sps, shape.rolloff);
    half[i] = v;
    energy += (i == 0 ? 1.0 : 2.0) * v * v;
  }
  const double s = 1.0 / std::sqrt(energy);
  for (auto& h : half) h *= s;
  return SymmetricFilter(std::move(half));
}

SymbolBlock random_symbols(const Constellation& constellation, std::size_t m, RngStream& rng) {
  if (!is_power_of_two(m)) throw SizeError("symbol count must be a power of two");
  SymbolBlock block;
  block.symbols.resize(m);
  for (auto& s : block.symbols) s = constellation.points[rng.uniform_index(constellation.points.size())];
  return block;
}

std::vector<double> periodic_rrc_response(const PulseShape& shape, int sps, std::size_t n) {
  if (sps < 1) throw ConfigError("samples per symbol must be positive");
  if (!(shape.rolloff > 0.0 && shape.rolloff <= 1.0))
    throw ConfigError("RRC roll-off must lie in (0, 1]");
  if (!is_power_of_two(n)) throw SizeError("RRC response length must be a power of two");
  const double b = shape.rolloff;
  const double rate = shape.symbol_rate * sps;
  std::vector<double> P(n);
  double energy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = std::abs(bin_frequency(k, n, rate)) / shape.symbol_rate;
    double rc = 0.0;
    if (u <= 0.5 * (1.0 - b)) {
      rc = 1.0;
    } else if (u <= 0.5 * (1.0 + b)) {
      rc = 0.5 * (1.0 + std::cos(std::numbers::pi / b * (u - 0.5 * (1.0 - b))));
    }
    P[k] = std::sqrt(rc);
    energy += rc;
  }
  // Unit-energy taps: sum |g|^2 = (1/n) sum |P|^2.
  const double s = std::sqrt(static_cast<double>(n) / energy);
  for (auto& v : P) v *= s;
  return P;
}

SymmetricFilter periodic_rrc_filter(const PulseShape& shape, int sps, std::size_t n,
                                    std::size_t K) {
  if (2 * K + 1 > n) throw SizeError("RRC filter memory too large for block length");
  const auto P = periodic_rrc_response(shape, sps, n);
  CVec g(P.begin(), P.end());
  ifft_inplace(g);
  // The response is real and even, so the taps are too; drop rounding residue.
  CVec half(K + 1);
  for (std::size_t i = 0; i <= K; ++i) half[i] = (i == 0 ? g[0].real() : 0.5 * (g[i] + g[n - i]).real());
  return SymmetricFilter(std::move(half));
}

ComplexSignal pulse_shape(const SymbolBlock& block, const PulseShape& shape, int sps) {
  if (sps < 2) throw ConfigError("pulse shaping needs at least 2 samples per symbol");
  const std::size_t m = block.size();
  const std::size_t n = m * static_cast<std::size_t>(sps);
  CVec out(n, cplx{});
  for (std::size_t k = 0; k < m; ++k) out[k * static_cast<std::size_t>(sps)] = block.symbols[k];
  const auto P = periodic_rrc_response(shape, sps, n);
  apply_response_inplace(out, CVec(P.begin(), P.end()));
  return ComplexSignal(std::move(out), shape.symbol_rate * sps);
}

SymbolBlock matched_filter(const ComplexSignal& signal, const PulseShape& shape, std::size_t m) {
  const std::size_t n = signal.size();
  if (m == 0 || n % m != 0 || n / m < 2)
    throw SizeError("matched filter: signal length " + std::to_string(n) +
                    " is not an integer multiple (>= 2) of " + std::to_string(m) + " symbols");
  const int sps = static_cast<int>(n / m);
  // The pulse is real and even, so correlation equals convolution.
  const auto P = periodic_rrc_response(shape, sps, n);
  CVec y = signal.samples();
  apply_response_inplace(y, CVec(P.begin(), P.end()));
  SymbolBlock out;
  out.symbols.resize(m);
  for (std::size_t k = 0; k < m; ++k) out.symbols[k] = y[k * static_cast<std::size_t>(sps)];
  return out;
}

Derotation phase_offset_rotate(const SymbolBlock& estimate, const SymbolBlock& reference) {
  if (estimate.size() != reference.size()) throw SizeError("phase rotation: length mismatch");
  cplx c{};
  for (std::size_t i = 0; i < estimate.size(); ++i)
    c += std::conj(estimate.symbols[i]) * reference.symbols[i];
  Derotation out{estimate, 0.0, false};
  if (std::abs(c) == 0.0 || !std::isfinite(std::abs(c))) return out;
  const cplx e = c / std::abs(c);
  for (auto& s : out.block.symbols) s *= e;
  out.phase = std::arg(c);
  out.rotated = true;
  return out;
}

double mse(const SymbolBlock& a, const SymbolBlock& b) {
  if (a.size() != b.size()) throw SizeError("mse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a.symbols[i] - b.symbols[i]);
  return s;
}

double q_factor_db(const SymbolBlock& x, const SymbolBlock& x_hat) {
  if (x.size() != x_hat.size()) throw SizeError("q-factor: length mismatch");
  double sig = 0.0;
  for (const auto& v : x.symbols) sig += std::norm(v);
  if (!(sig > 0.0)) throw DegenerateInputError("q-factor of an all-zero reference");
  const double err = mse(x, x_hat);
  if (err == 0.0) return kInfiniteQ;
  return 10.0 * std::log10(sig / err);
}

}  // namespace ldbp
