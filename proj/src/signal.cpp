#include "ldbp/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "ldbp/error.hpp"

namespace ldbp {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

ComplexSignal::ComplexSignal(CVec samples, double sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (!is_power_of_two(samples_.size()))
    throw SizeError("signal length " + std::to_string(samples_.size()) +
                    " is not a power of two");
  if (!(sample_rate_ > 0.0)) throw ConfigError("sample rate must be positive");
}

double ComplexSignal::energy() const {
  double e = 0.0;
  for (const auto& s : samples_) e += std::norm(s);
  return e;
}

// ---------------------------------------------------------------------------

namespace {

// Plain complex multiply; std::complex operator* carries C99 Annex G
// inf/nan recovery that costs a libcall per product.
inline cplx cmul(const cplx& a, const cplx& b) {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

struct FftPlan {
  std::size_t n = 0;
  std::vector<std::uint32_t> bitrev;
  // Per-stage twiddles laid out contiguously: stage with butterfly span
  // `half` occupies [half, 2*half).  Forward uses exp(-2 pi i j / (2 half)).
  CVec fwd;
  CVec inv;

  explicit FftPlan(std::size_t size) : n(size), bitrev(size), fwd(size), inv(size) {
    unsigned bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t r = 0;
      for (unsigned b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= 1u << (bits - 1 - b);
      bitrev[i] = r;
    }
    for (std::size_t half = 1; half < n; half <<= 1) {
      for (std::size_t j = 0; j < half; ++j) {
        const double ang =
            -std::numbers::pi * static_cast<double>(j) / static_cast<double>(half);
        fwd[half + j] = {std::cos(ang), std::sin(ang)};
        inv[half + j] = std::conj(fwd[half + j]);
      }
    }
  }
};

std::shared_ptr<const FftPlan> plan_for(std::size_t n) {
  thread_local std::shared_ptr<const FftPlan> last;
  if (last && last->n == n) return last;
  static std::mutex mu;
  static std::map<std::size_t, std::shared_ptr<const FftPlan>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const FftPlan>(n);
  last = slot;
  return slot;
}

void transform(std::span<cplx> a, bool inverse, bool normalize = true) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n))
    throw SizeError("DFT length " + std::to_string(n) + " is not a power of two");
  if (n == 1) return;
  const auto plan = plan_for(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = plan->bitrev[i];
    if (i < r) std::swap(a[i], a[r]);
  }
  cplx* x = a.data();
  for (std::size_t i = 0; i < n; i += 2) {
    const cplx u = x[i];
    const cplx v = x[i + 1];
    x[i] = u + v;
    x[i + 1] = u - v;
  }
  const cplx* tw = inverse ? plan->inv.data() : plan->fwd.data();
  for (std::size_t half = 2; half < n; half <<= 1) {
    const cplx* w = tw + half;
    for (std::size_t i = 0; i < n; i += 2 * half) {
      cplx* lo = x + i;
      cplx* hi = lo + half;
      for (std::size_t j = 0; j < half; ++j) {
        const cplx v = cmul(hi[j], w[j]);
        const cplx u = lo[j];
        lo[j] = u + v;
        hi[j] = u - v;
      }
    }
  }
  if (inverse && normalize) {
    const double s = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) x[i] *= s;
  }
}

}  // namespace

void fft_inplace(std::span<cplx> data) { transform(data, false); }
void ifft_inplace(std::span<cplx> data) { transform(data, true); }

ComplexSignal dft(const ComplexSignal& signal) {
  CVec x = signal.samples();
  fft_inplace(x);
  return ComplexSignal(std::move(x), signal.sample_rate());
}

ComplexSignal idft(const ComplexSignal& spectrum) {
  CVec x = spectrum.samples();
  ifft_inplace(x);
  return ComplexSignal(std::move(x), spectrum.sample_rate());
}

double bin_frequency(std::size_t k, std::size_t n, double sample_rate) {
  const double df = sample_rate / static_cast<double>(n);
  if (k < n / 2) return static_cast<double>(k) * df;
  return (static_cast<double>(k) - static_cast<double>(n)) * df;
}

// ---------------------------------------------------------------------------

SymmetricFilter::SymmetricFilter(CVec half_taps) : half_taps_(std::move(half_taps)) {
  if (half_taps_.empty()) throw SizeError("symmetric filter needs at least h_0");
}

CVec SymmetricFilter::full_taps() const {
  const std::size_t K = memory();
  CVec full(2 * K + 1);
  for (std::size_t i = 0; i <= K; ++i) {
    full[K + i] = half_taps_[i];
    full[K - i] = half_taps_[i];
  }
  return full;
}

CVec SymmetricFilter::circulant_column(std::size_t n) const {
  if (full_length() > n) throw SizeError("filter longer than block");
  CVec g(n, cplx{});
  g[0] = half_taps_[0];
  for (std::size_t d = 1; d <= memory(); ++d) {
    g[d] = half_taps_[d];
    g[n - d] = half_taps_[d];
  }
  return g;
}

void circular_convolve(std::span<const cplx> in, const SymmetricFilter& filter,
                       std::span<cplx> out) {
  const std::size_t n = in.size();
  const std::size_t K = filter.memory();
  if (2 * K + 1 > n)
    throw SizeError("filter length " + std::to_string(2 * K + 1) + " exceeds block length " +
                    std::to_string(n));
  if (out.size() != n) throw SizeError("output length mismatch");
  // Periodic extension by K on each side so the inner loop is branch-free.
  thread_local CVec ext;
  ext.resize(n + 2 * K);
  std::copy(in.end() - static_cast<std::ptrdiff_t>(K), in.end(), ext.begin());
  std::copy(in.begin(), in.end(), ext.begin() + static_cast<std::ptrdiff_t>(K));
  std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(K),
            ext.begin() + static_cast<std::ptrdiff_t>(n + K));
  const cplx* h = filter.half_taps().data();
  const cplx* x = ext.data() + K;
  for (std::size_t i = 0; i < n; ++i) {
    double re = h[0].real() * x[i].real() - h[0].imag() * x[i].imag();
    double im = h[0].real() * x[i].imag() + h[0].imag() * x[i].real();
    for (std::size_t d = 1; d <= K; ++d) {
      const double sr = x[i - d].real() + x[i + d].real();
      const double si = x[i - d].imag() + x[i + d].imag();
      re += h[d].real() * sr - h[d].imag() * si;
      im += h[d].real() * si + h[d].imag() * sr;
    }
    out[i] = {re, im};
  }
}

ComplexSignal circular_convolve(const ComplexSignal& signal, const SymmetricFilter& filter) {
  CVec out(signal.size());
  circular_convolve(signal.samples(), filter, out);
  return ComplexSignal(std::move(out), signal.sample_rate());
}

// ---------------------------------------------------------------------------

cplx linear_exponent(const FiberParams& params, double f, Direction direction) {
  const double w = 2.0 * std::numbers::pi * f;
  const cplx h{-0.5 * params.alpha, 0.5 * params.beta2 * w * w};
  return direction == Direction::forward ? h : -h;
}

DispersionOperator build_dispersion_operator(const FiberParams& params, double z,
                                             Direction direction, std::size_t n,
                                             double sample_rate) {
  if (!is_power_of_two(n)) throw SizeError("operator length is not a power of two");
  if (!(z >= 0.0)) throw ConfigError("propagation distance must be non-negative");
  DispersionOperator op;
  op.distance = z;
  op.direction = direction;
  op.sample_rate = sample_rate;
  op.frequency_response.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    op.frequency_response[k] =
        std::exp(z * linear_exponent(params, bin_frequency(k, n, sample_rate), direction));
  return op;
}

void apply_response_inplace(std::span<cplx> samples, std::span<const cplx> response) {
  if (samples.size() != response.size()) throw SizeError("operator/signal length mismatch");
  transform(samples, false);
  // The inverse's 1/n rides along with the per-bin product.
  const double s = 1.0 / static_cast<double>(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k)
    samples[k] = s * cmul(samples[k], response[k]);
  transform(samples, true, false);
}

ComplexSignal apply_dispersion(const ComplexSignal& signal, const DispersionOperator& op) {
  CVec x = signal.samples();
  apply_response_inplace(x, op.frequency_response);
  return ComplexSignal(std::move(x), signal.sample_rate());
}

TruncatedFilter truncate_to_symmetric_filter(const DispersionOperator& op, std::size_t K) {
  const std::size_t n = op.frequency_response.size();
  if (2 * K + 1 > n) throw SizeError("filter memory too large for block length");
  CVec g = op.frequency_response;
  ifft_inplace(g);
  CVec half(K + 1);
  half[0] = g[0];
  for (std::size_t i = 1; i <= K; ++i) half[i] = 0.5 * (g[i] + g[n - i]);
  double total = 0.0;
  for (const auto& v : g) total += std::norm(v);
  double kept = std::norm(half[0]);
  for (std::size_t i = 1; i <= K; ++i) kept += 2.0 * std::norm(half[i]);
  TruncatedFilter out{SymmetricFilter(std::move(half)), 0.0};
  out.discarded_energy = total > 0.0 ? std::max(0.0, 1.0 - kept / total) : 0.0;
  return out;
}

FittedFilter fit_symmetric_filter(const DispersionOperator& op, std::size_t K, double passband_hz,
                                  double stop_weight) {
  const std::size_t n = op.frequency_response.size();
  if (2 * K + 1 > n) throw SizeError("filter memory too large for block length");
  if (!(passband_hz > 0.0) || !(stop_weight >= 0.0))
    throw ConfigError("filter fit needs a positive passband and a non-negative stop weight");
  const std::size_t N = K + 1;
  // Normal equations in the real cosine basis 1, 2cos(2 pi f d / fs).
  std::vector<double> A(N * N, 0.0);
  CVec b(N);
  std::vector<double> phi(N);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = bin_frequency(k, n, op.sample_rate);
    const double w = std::abs(f) <= passband_hz ? 1.0 : stop_weight;
    if (w == 0.0) continue;
    phi[0] = 1.0;
    for (std::size_t d = 1; d < N; ++d)
      phi[d] = 2.0 * std::cos(2.0 * std::numbers::pi * f * static_cast<double>(d) / op.sample_rate);
    for (std::size_t i = 0; i < N; ++i) {
      b[i] += w * phi[i] * op.frequency_response[k];
      for (std::size_t j = 0; j < N; ++j) A[i * N + j] += w * phi[i] * phi[j];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (std::size_t c = 0; c < N; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < N; ++r)
      if (std::abs(A[r * N + c]) > std::abs(A[piv * N + c])) piv = r;
    if (A[piv * N + c] == 0.0) throw NumericError("filter fit: singular normal equations");
    if (piv != c) {
      for (std::size_t j = 0; j < N; ++j) std::swap(A[c * N + j], A[piv * N + j]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < N; ++r) {
      const double f = A[r * N + c] / A[c * N + c];
      for (std::size_t j = c; j < N; ++j) A[r * N + j] -= f * A[c * N + j];
      b[r] -= f * b[c];
    }
  }
  CVec half(N);
  for (std::size_t i = N; i-- > 0;) {
    cplx s = b[i];
    for (std::size_t j = i + 1; j < N; ++j) s -= A[i * N + j] * half[j];
    half[i] = s / A[i * N + i];
  }
  FittedFilter out{SymmetricFilter(std::move(half)), 0.0};
  CVec fitted = out.filter.circulant_column(n);
  fft_inplace(fitted);
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(bin_frequency(k, n, op.sample_rate)) > passband_hz) continue;
    err += std::norm(fitted[k] - op.frequency_response[k]);
    ref += std::norm(op.frequency_response[k]);
  }
  out.passband_error = ref > 0.0 ? err / ref : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

ComplexSignal resample(const ComplexSignal& signal, double new_rate) {
  const std::size_t n = signal.size();
  const double exact = static_cast<double>(n) * new_rate / signal.sample_rate();
  const double rounded = std::round(exact);
  if (!(new_rate > 0.0) || rounded < 1.0 || std::abs(exact - rounded) > 1e-9 * exact ||
      !is_power_of_two(static_cast<std::size_t>(rounded)))
    throw ConfigError("cannot resample from " + std::to_string(signal.sample_rate()) +
                      " Hz to " + std::to_string(new_rate) + " Hz at block length " +
                      std::to_string(n));
  const std::size_t m = static_cast<std::size_t>(rounded);
  if (m == n) return ComplexSignal(signal.samples(), new_rate);

  CVec spec = signal.samples();
  fft_inplace(spec);
  CVec out(m, cplx{});
  if (m < n) {
    for (std::size_t k = 0; k < m / 2; ++k) out[k] = spec[k];
    for (std::size_t k = 1; k < m / 2; ++k) out[m - k] = spec[n - k];
    // Both +/- m/2 images fold onto the new Nyquist bin.
    if (m >= 2) out[m / 2] = spec[m / 2] + spec[n - m / 2];
    else out[0] = spec[0];
  } else {
    for (std::size_t k = 0; k < n / 2; ++k) out[k] = spec[k];
    for (std::size_t k = 1; k < n / 2; ++k) out[m - k] = spec[n - k];
    if (n >= 2) {
      out[n / 2] = 0.5 * spec[n / 2];
      out[m - n / 2] = 0.5 * spec[n / 2];
    } else {
      out[0] = spec[0];
    }
  }
  ifft_inplace(out);
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return ComplexSignal(std::move(out), new_rate);
}

double dbm_to_watts(double p_dbm) { return std::pow(10.0, (p_dbm - 30.0) / 10.0); }

double power_scale_factor(const ComplexSignal& signal, double p_dbm) {
  const double p = signal.mean_power();
  if (!(p > 0.0)) throw DegenerateInputError("cannot scale an all-zero signal to a power");
  return std::sqrt(dbm_to_watts(p_dbm) / p);
}

ComplexSignal scale_to_power(const ComplexSignal& signal, double p_dbm) {
  const double c = power_scale_factor(signal, p_dbm);
  CVec x = signal.samples();
  for (auto& v : x) v *= c;
  return ComplexSignal(std::move(x), signal.sample_rate());
}

}  // namespace ldbp
