#include "ldbp/link.hpp"

#include <cmath>
#include <string>

#include "ldbp/error.hpp"

namespace ldbp {

int LinkContext::rx_sps() const {
  const double r = rx.out_sample_rate / shape.symbol_rate;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 * r || k < 2.0)
    throw ConfigError("receiver rate must be an integer multiple (>= 2) of the symbol rate");
  return static_cast<int>(k);
}

void LinkContext::validate() const {
  fiber.validate();
  rx.validate();
  if (!is_power_of_two(symbols_per_block)) throw ConfigError("symbols per block must be a power of two");
  if (forward_sps < 2 || !is_power_of_two(static_cast<std::size_t>(forward_sps)))
    throw ConfigError("forward oversampling must be a power of two >= 2");
  if (forward_steps_per_span < 1) throw ConfigError("forward steps per span must be >= 1");
  const int rs = rx_sps();
  if (!is_power_of_two(static_cast<std::size_t>(rs)) || rs > forward_sps)
    throw ConfigError("receiver oversampling must be a power of two not above the forward rate");
}

Example simulate_block(const LinkContext& ctx, double power_dbm, RngStream& symbol_rng,
                       RngStream& noise_rng) {
  const SymbolBlock symbols = random_symbols(ctx.constellation, ctx.symbols_per_block, symbol_rng);
  const ComplexSignal shaped = pulse_shape(symbols, ctx.shape, ctx.forward_sps);
  const double c = power_scale_factor(shaped, power_dbm);
  CVec tx = shaped.samples();
  for (auto& v : tx) v *= c;
  const ComplexSignal rx_in =
      propagate_link(ComplexSignal(std::move(tx), shaped.sample_rate()), ctx.fiber, ctx.amp,
                     ctx.forward_steps_per_span, noise_rng);
  Example ex{rx_frontend(rx_in, ctx.rx), SymbolBlock{}, power_dbm};
  // Unit-energy taps at both ends: the matched filter at the receiver rate
  // returns c x sqrt(rx_sps / forward_sps).
  const double ref = c * std::sqrt(static_cast<double>(ctx.rx_sps()) / ctx.forward_sps);
  ex.x.symbols = symbols.symbols;
  for (auto& v : ex.x.symbols) v *= ref;
  return ex;
}

Example simulate_block(const LinkContext& ctx, double power_dbm, std::uint64_t seed,
                       const char* stream, std::uint64_t i, std::uint64_t j) {
  RngStream sym(seed, std::string(stream) + "/symbols", i, j);
  RngStream noise(seed, std::string(stream) + "/noise", i, j);
  return simulate_block(ctx, power_dbm, sym, noise);
}

}  // namespace ldbp
