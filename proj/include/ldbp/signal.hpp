#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ldbp/fiber.hpp"

namespace ldbp {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

bool is_power_of_two(std::size_t n);

// Uniformly sampled complex baseband block.  Length is a power of two and
// the block is treated as one period of a periodic waveform.
class ComplexSignal {
 public:
  ComplexSignal(CVec samples, double sample_rate);

  const CVec& samples() const { return samples_; }
  CVec take_samples() && { return std::move(samples_); }
  std::size_t size() const { return samples_.size(); }
  double sample_rate() const { return sample_rate_; }
  const cplx& operator[](std::size_t i) const { return samples_[i]; }

  double energy() const;
  double mean_power() const { return energy() / static_cast<double>(size()); }

  friend bool operator==(const ComplexSignal&, const ComplexSignal&) = default;

 private:
  CVec samples_;
  double sample_rate_;
};

// ---------------------------------------------------------------------------
// DFT.  Unnormalized forward transform X_k = sum_j x_j exp(-2 pi i jk/n);
// the inverse carries the 1/n.

// In-place radix-2 transform on a power-of-two span.  Throws SizeError.
void fft_inplace(std::span<cplx> data);
void ifft_inplace(std::span<cplx> data);

ComplexSignal dft(const ComplexSignal& signal);
ComplexSignal idft(const ComplexSignal& spectrum);

// Frequency (Hz) of DFT bin k for an n-point block at the given rate.
double bin_frequency(std::size_t k, std::size_t n, double sample_rate);

// ---------------------------------------------------------------------------
// Even-symmetric FIR filter h_{-K..K} with h_{-i} == h_i, stored as the
// half (h_0, ..., h_K).
class SymmetricFilter {
 public:
  SymmetricFilter() : half_taps_{cplx{1.0, 0.0}} {}
  explicit SymmetricFilter(CVec half_taps);

  static SymmetricFilter identity() { return SymmetricFilter(); }

  std::size_t memory() const { return half_taps_.size() - 1; }  // K
  std::size_t full_length() const { return 2 * memory() + 1; }
  const CVec& half_taps() const { return half_taps_; }
  CVec& mutable_half_taps() { return half_taps_; }
  // (h_{-K}, ..., h_0, ..., h_K).
  CVec full_taps() const;
  // Zero-padded length-n circulant first column: g[d mod n] = h_d.
  CVec circulant_column(std::size_t n) const;

  friend bool operator==(const SymmetricFilter&, const SymmetricFilter&) = default;

 private:
  CVec half_taps_;
};

// y_i = sum_{d=-K..K} h_d x_{(i-d) mod n}.  Throws SizeError if 2K+1 > n.
ComplexSignal circular_convolve(const ComplexSignal& signal, const SymmetricFilter& filter);
// Raw-buffer form used by the hot loops; out must not alias in.
void circular_convolve(std::span<const cplx> in, const SymmetricFilter& filter,
                       std::span<cplx> out);

// ---------------------------------------------------------------------------
// Linear fiber operator exp(z H_k) applied per DFT bin.

enum class Direction { forward, backward };

struct DispersionOperator {
  CVec frequency_response;
  double distance = 0.0;
  Direction direction = Direction::forward;
  double sample_rate = 0.0;
};

// Per-bin exponent H(f) of the linear NLSE operator in the given direction.
// Forward: -alpha/2 + i beta2/2 (2 pi f)^2; backward is its negation.
cplx linear_exponent(const FiberParams& params, double f, Direction direction);

DispersionOperator build_dispersion_operator(const FiberParams& params, double z,
                                             Direction direction, std::size_t n,
                                             double sample_rate);

ComplexSignal apply_dispersion(const ComplexSignal& signal, const DispersionOperator& op);
// In-place variant on raw samples (length must match the operator).
void apply_response_inplace(std::span<cplx> samples, std::span<const cplx> response);

struct TruncatedFilter {
  SymmetricFilter filter;
  // Fraction of the impulse-response energy outside taps -K..K.
  double discarded_energy = 0.0;
};

// Shortest-memory symmetric approximation of a dispersion operator: the
// circular impulse response g = idft(response), symmetrized as
// (g_i + g_{n-i}) / 2 and cut to K taps per side.
TruncatedFilter truncate_to_symmetric_filter(const DispersionOperator& op, std::size_t K);

struct FittedFilter {
  SymmetricFilter filter;
  // Relative squared response error over |f| <= passband.
  double passband_error = 0.0;
};

// Symmetric K-tap filter whose response best matches the operator in the
// weighted least-squares sense: weight 1 for |f| <= passband_hz,
// stop_weight elsewhere.  stop_weight = 1 reproduces plain truncation.
FittedFilter fit_symmetric_filter(const DispersionOperator& op, std::size_t K, double passband_hz,
                                  double stop_weight = 1e-4);

// ---------------------------------------------------------------------------

// Band-limited resampling by DFT-bin truncation or zero padding.  Sample
// values (not energy) are preserved for content below both Nyquist rates.
// The Nyquist bin of the shorter block is split evenly between +/- f.
// Throws ConfigError when the new length is not an integer power of two.
ComplexSignal resample(const ComplexSignal& signal, double new_rate);

double dbm_to_watts(double p_dbm);

// Factor c such that c * signal has mean sample power 10^((p_dbm - 30)/10) W.
// Throws DegenerateInputError for an all-zero signal.
double power_scale_factor(const ComplexSignal& signal, double p_dbm);
ComplexSignal scale_to_power(const ComplexSignal& signal, double p_dbm);

}  // namespace ldbp
