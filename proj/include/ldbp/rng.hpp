#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ldbp {

// A named, independently seeded random stream.  Identical
// (seed, name, index...) always yields an identical sequence, which is what
// makes every simulated waveform reproducible and lets batch items run on
// any thread.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name, std::uint64_t i = 0,
            std::uint64_t j = 0, std::uint64_t k = 0);

  std::mt19937_64& engine() { return engine_; }

  // Standard normal draw.
  double normal();
  // Uniform integer in [0, count).
  std::size_t uniform_index(std::size_t count);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// SplitMix64 finalizer; used to derive stream seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace ldbp
