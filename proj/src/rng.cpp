#include "ldbp/rng.hpp"

namespace ldbp {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view name, std::uint64_t i,
                     std::uint64_t j, std::uint64_t k) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ fnv1a(name));
  h = mix64(h ^ i);
  h = mix64(h ^ (j + 0x51ed2701ULL));
  h = mix64(h ^ (k + 0x2545f491ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(i)};
  engine_.seed(seq);
}

double RngStream::normal() { return normal_(engine_); }

std::size_t RngStream::uniform_index(std::size_t count) {
  std::uniform_int_distribution<std::size_t> dist(0, count - 1);
  return dist(engine_);
}

}  // namespace ldbp
