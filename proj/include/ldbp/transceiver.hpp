#pragma once

#include <limits>
#include <string>

#include "ldbp/rng.hpp"
#include "ldbp/signal.hpp"

namespace ldbp {

struct Constellation {
  std::string name;
  CVec points;  // unit mean power

  static Constellation qam16();
};

struct SymbolBlock {
  CVec symbols;

  std::size_t size() const { return symbols.size(); }
  const cplx& operator[](std::size_t i) const { return symbols[i]; }
  friend bool operator==(const SymbolBlock&, const SymbolBlock&) = default;
};

struct PulseShape {
  double rolloff = 0.1;
  // Tap-domain truncation, symbols on each side of the peak.  The
  // waveform-level shaping and matched filtering use the exact
  // block-periodic pulse; this span only bounds FIR versions of it.
  int span_symbols = 64;
  double symbol_rate = 20e9;
};

// Root-raised-cosine taps at the given oversampling, as a symmetric filter
// with K = span_symbols * sps, normalized to unit energy.
SymmetricFilter rrc_filter(const PulseShape& shape, int samples_per_symbol);
// Continuous RRC impulse response at t (in symbol periods), peak 1 + b(4/pi - 1).
double rrc_value(double t, double rolloff);

// i.i.d. uniform constellation symbols; m must be a power of two.
SymbolBlock random_symbols(const Constellation& constellation, std::size_t m, RngStream& rng);

// Per-bin amplitude of the n-sample block-periodic RRC pulse (the square
// root of the raised-cosine spectrum at each DFT bin), scaled so its
// circular impulse response has unit energy.  Its shifts by multiples of
// sps are exactly orthonormal.
std::vector<double> periodic_rrc_response(const PulseShape& shape, int samples_per_symbol,
                                          std::size_t n);

// Taps h_0..h_K of the block-periodic pulse on an n-sample block.
SymmetricFilter periodic_rrc_filter(const PulseShape& shape, int samples_per_symbol,
                                    std::size_t n, std::size_t K);

// Periodic pulse modulation: the impulse train at `samples_per_symbol` is
// circularly convolved with the block-periodic RRC pulse.
ComplexSignal pulse_shape(const SymbolBlock& block, const PulseShape& shape,
                          int samples_per_symbol);

// Circular correlation with the block-periodic RRC pulse at the signal's
// own oversampling, sampled on symbol instants 0, sps, 2 sps, ...
SymbolBlock matched_filter(const ComplexSignal& signal, const PulseShape& shape, std::size_t m);

struct Derotation {
  SymbolBlock block;
  double phase = 0.0;    // applied rotation, radians
  bool rotated = false;  // false when the cross-correlation vanished
};

// Data-aided block phase: phi = arg(sum conj(estimate_i) reference_i),
// the minimizer of ||reference - estimate e^{i phi}||.
Derotation phase_offset_rotate(const SymbolBlock& estimate, const SymbolBlock& reference);

// Squared error sum_i |a_i - b_i|^2.
double mse(const SymbolBlock& a, const SymbolBlock& b);

inline constexpr double kInfiniteQ = std::numeric_limits<double>::infinity();

// 10 log10(||x||^2 / ||x - x_hat||^2); +inf when the error vanishes.
double q_factor_db(const SymbolBlock& x, const SymbolBlock& x_hat);

}  // namespace ldbp
