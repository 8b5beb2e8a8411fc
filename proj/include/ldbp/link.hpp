#pragma once

#include <cstdint>
#include <vector>

#include "ldbp/channel.hpp"
#include "ldbp/transceiver.hpp"

namespace ldbp {

// Everything needed to turn a launch power and an RNG seed into one
// received block: transmitter, fiber link, and receiver front end.
struct LinkContext {
  FiberParams fiber;
  AmpConfig amp;
  PulseShape shape;
  Constellation constellation = Constellation::qam16();
  std::size_t symbols_per_block = 256;
  int forward_sps = 8;
  int forward_steps_per_span = 50;
  RxFrontendConfig rx;

  double forward_sample_rate() const { return shape.symbol_rate * forward_sps; }
  // Receiver samples per symbol; throws ConfigError unless integral and >= 2.
  int rx_sps() const;
  std::size_t rx_block_length() const { return symbols_per_block * static_cast<std::size_t>(rx_sps()); }
  void validate() const;
};

// One received block with its reference symbols.  The reference is the
// transmitted block in the units a perfect matched filter at the receiver
// rate would produce, so equalizer outputs compare to it directly.
struct Example {
  ComplexSignal y;
  SymbolBlock x;
  double power_dbm = 0.0;
};

Example simulate_block(const LinkContext& ctx, double power_dbm, RngStream& symbol_rng,
                       RngStream& noise_rng);

// Deterministic block for (seed, stream name, i, j): symbols and noise come
// from two sub-streams of that key.
Example simulate_block(const LinkContext& ctx, double power_dbm, std::uint64_t seed,
                       const char* stream, std::uint64_t i, std::uint64_t j);

}  // namespace ldbp
