#include "ldbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ldbp/autograd.hpp"
#include "ldbp/error.hpp"
#include "network.hpp"

namespace ldbp {

std::size_t LdbpModel::complex_parameter_count() const {
  std::size_t c = mf_filter.half_taps().size();
  for (const auto& l : layers) c += l.w1.half_taps().size() + 1 + l.w2.half_taps().size();
  return c;
}

bool operator==(const LdbpModel& a, const LdbpModel& b) {
  return a.layers == b.layers && a.mf_filter == b.mf_filter && a.decimation == b.decimation &&
         a.m == b.m && a.n == b.n && a.steps_per_span == b.steps_per_span &&
         a.span_count == b.span_count && a.trained == b.trained &&
         a.train_step == b.train_step && a.provenance == b.provenance;
}

LdbpModel init_from_ssfm(const FiberParams& params, int steps_per_span, std::size_t K,
                         std::size_t m, const LdbpInitOptions& options) {
  params.validate();
  if (options.decimation < 1) throw ConfigError("decimation must be at least 1");
  const std::size_t n = options.decimation * m;
  if (!is_power_of_two(n)) throw SizeError("LDBP input length must be a power of two");
  if (2 * K + 1 > n)
    throw SizeError("filter memory K = " + std::to_string(K) + " too large for block length " +
                    std::to_string(n));
  const double rate = options.shape.symbol_rate * static_cast<double>(options.decimation);

  auto steps = step_schedule(params.span_length, steps_per_span, options.schedule, params.alpha);
  std::reverse(steps.begin(), steps.end());  // traversal order of backpropagation

  // Per distinct step length: truncated half-step filter and its alpha.
  std::vector<LdbpLayer> span_layers;
  for (double dz : steps) {
    const auto op = build_dispersion_operator(params, 0.5 * dz, Direction::backward, n, rate);
    const SymmetricFilter h = options.passband_hz > 0.0
                                  ? fit_symmetric_filter(op, K, options.passband_hz,
                                                         options.stop_weight).filter
                                  : truncate_to_symmetric_filter(op, K).filter;
    const double len = options.literal_gamma_delta ? dz : midpoint_effective_length(params.alpha, dz);
    span_layers.push_back(LdbpLayer{h, cplx{params.gamma * len, 0.0}, h});
  }
  const double inv_gain = 1.0 / params.span_amplitude_gain();
  for (auto& t : span_layers.front().w1.mutable_half_taps()) t *= inv_gain;

  LdbpModel model;
  for (int s = 0; s < params.span_count; ++s)
    model.layers.insert(model.layers.end(), span_layers.begin(), span_layers.end());

  const std::size_t k_mf = std::min<std::size_t>(
      static_cast<std::size_t>(options.shape.span_symbols) * options.decimation, n / 2 - 1);
  model.mf_filter =
      periodic_rrc_filter(options.shape, static_cast<int>(options.decimation), n, k_mf);
  model.decimation = options.decimation;
  model.m = m;
  model.n = n;
  model.steps_per_span = steps_per_span;
  model.span_count = params.span_count;
  model.provenance = {
      {"source", "init_from_ssfm"},
      {"schedule", to_string(options.schedule.kind)},
      {"schedule_factor", options.schedule.factor},
      {"literal_gamma_delta", options.literal_gamma_delta},
      {"K", K},
      {"tap_fit_passband_hz", options.passband_hz},
      {"tap_fit_stop_weight", options.stop_weight},
      {"alpha_db_per_km", params.span_loss_db() / (params.span_length / 1e3)},
      {"beta2_s2_per_m", params.beta2},
      {"gamma_per_w_m", params.gamma},
      {"span_length_m", params.span_length},
  };
  return model;
}

void kerr_activation_inplace(std::span<cplx> x, cplx alpha) {
  const double ar = alpha.real();
  const double ai = alpha.imag();
  for (auto& v : x) {
    const double p = std::norm(v);
    const double th = -ar * p;
    const double mag = ai == 0.0 ? 1.0 : std::exp(ai * p);
    const double c = mag * std::cos(th);
    const double s = mag * std::sin(th);
    v = {v.real() * c - v.imag() * s, v.real() * s + v.imag() * c};
  }
}

namespace detail {

void convolve_decimated(std::span<const cplx> in, const SymmetricFilter& filter,
                        std::size_t decimation, std::span<cplx> out) {
  const std::size_t n = in.size();
  const std::size_t K = filter.memory();
  if (2 * K + 1 > n) throw SizeError("matched filter longer than block");
  const auto& h = filter.half_taps();
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t c = k * decimation;
    cplx acc = h[0] * in[c];
    for (std::size_t d = 1; d <= K; ++d) acc += h[d] * (in[(c + n - d) % n] + in[(c + d) % n]);
    out[k] = acc;
  }
}

SymbolBlock run_network(const LdbpModel& model, const ComplexSignal& y, Tape* tape) {
  if (y.size() != model.n)
    throw SizeError("LDBP input has " + std::to_string(y.size()) + " samples, model expects " +
                    std::to_string(model.n));
  CVec u = y.samples();
  CVec tmp(u.size());
  if (tape) tape->layers.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LdbpLayer& layer = model.layers[i];
    circular_convolve(u, layer.w1, tmp);
    if (tape) {
      tape->layers[i].input = u;
      tape->layers[i].pre_activation = tmp;
    }
    kerr_activation_inplace(tmp, layer.alpha);
    if (tape) tape->layers[i].activation = tmp;
    circular_convolve(tmp, layer.w2, u);
  }
  SymbolBlock out;
  out.symbols.resize(model.m);
  convolve_decimated(u, model.mf_filter, model.decimation, out.symbols);
  if (tape) {
    tape->mf_input = std::move(u);
    tape->output = out;
  }
  return out;
}

}  // namespace detail

SymbolBlock forward(const LdbpModel& model, const ComplexSignal& y) {
  return detail::run_network(model, y, nullptr);
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json taps_json(const CVec& taps) {
  json a = json::array();
  for (const auto& t : taps) a.push_back({t.real(), t.imag()});
  return a;
}

cplx complex_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw FormatError(std::string("checkpoint: malformed complex value in ") + what);
  return {j[0].get<double>(), j[1].get<double>()};
}

SymmetricFilter filter_from(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw FormatError(std::string("checkpoint: missing or empty tap list ") + what);
  CVec taps;
  taps.reserve(j.size());
  for (const auto& t : j) taps.push_back(complex_from(t, what));
  return SymmetricFilter(std::move(taps));
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("checkpoint: missing field '") + key + "'");
  return *it;
}

}  // namespace

nlohmann::json checkpoint_json(const LdbpModel& model) {
  json layers = json::array();
  json ks = json::array();
  for (const auto& l : model.layers) {
    layers.push_back({{"w1", taps_json(l.w1.half_taps())},
                      {"alpha", {l.alpha.real(), l.alpha.imag()}},
                      {"w2", taps_json(l.w2.half_taps())}});
    ks.push_back(l.w1.memory());
  }
  return {{"format", "ldbp-checkpoint"},
          {"version", kCheckpointVersion},
          {"m", model.m},
          {"n", model.n},
          {"decimation", model.decimation},
          {"M", model.steps_per_span},
          {"N_sp", model.span_count},
          {"K", ks},
          {"trained", model.trained},
          {"train_step", model.train_step},
          {"layers", layers},
          {"mf", taps_json(model.mf_filter.half_taps())},
          {"provenance", model.provenance}};
}

LdbpModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw FormatError("checkpoint: top level is not an object");
    const int version = field(j, "version").get<int>();
    if (version != kCheckpointVersion)
      throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    LdbpModel model;
    model.m = field(j, "m").get<std::size_t>();
    model.n = field(j, "n").get<std::size_t>();
    model.decimation = field(j, "decimation").get<std::size_t>();
    model.steps_per_span = field(j, "M").get<int>();
    model.span_count = field(j, "N_sp").get<int>();
    model.trained = field(j, "trained").get<bool>();
    model.train_step = field(j, "train_step").get<long long>();
    model.provenance = field(j, "provenance");
    const json& layers = field(j, "layers");
    const json& ks = field(j, "K");
    if (!layers.is_array() || !ks.is_array() || ks.size() != layers.size())
      throw FormatError("checkpoint: layer list and K list disagree");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      LdbpLayer l{filter_from(field(layers[i], "w1"), "w1"),
                  complex_from(field(layers[i], "alpha"), "alpha"),
                  filter_from(field(layers[i], "w2"), "w2")};
      const auto K = ks[i].get<std::size_t>();
      if (l.w1.memory() != K || l.w2.memory() != K)
        throw FormatError("checkpoint: layer " + std::to_string(i) + " tap count disagrees with K");
      model.layers.push_back(std::move(l));
    }
    model.mf_filter = filter_from(field(j, "mf"), "mf");
    if (model.n != model.decimation * model.m || !is_power_of_two(model.n))
      throw FormatError("checkpoint: inconsistent block sizes");
    if (static_cast<long long>(model.layers.size()) !=
        static_cast<long long>(model.steps_per_span) * model.span_count)
      throw FormatError("checkpoint: layer count is not M * N_sp");
    for (const auto& l : model.layers)
      if (l.w1.full_length() > model.n) throw FormatError("checkpoint: filter longer than block");
    if (model.mf_filter.full_length() > model.n)
      throw FormatError("checkpoint: matched filter longer than block");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const LdbpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path.string());
  out << checkpoint_json(model).dump(1) << '\n';
  if (!out) throw FormatError("failed writing checkpoint: " + path.string());
}

LdbpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace ldbp
