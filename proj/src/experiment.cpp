#include "ldbp/experiment.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ldbp/dbp.hpp"
#include "ldbp/error.hpp"
#include "ldbp/parallel.hpp"

namespace ldbp {

const char* to_string(Method m) {
  switch (m) {
    case Method::cdc: return "cdc";
    case Method::dbp: return "dbp";
    case Method::ldbp: return "ldbp";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "cdc") return Method::cdc;
  if (name == "dbp") return Method::dbp;
  if (name == "ldbp") return Method::ldbp;
  throw ConfigError("unknown method '" + name + "' (expected cdc, dbp or ldbp)");
}

const char* to_string(RotationMode m) {
  switch (m) {
    case RotationMode::differentiated: return "differentiated";
    case RotationMode::stop_gradient: return "stop_gradient";
    case RotationMode::none: return "none";
  }
  return "?";
}

RotationMode rotation_from_string(const std::string& name) {
  if (name == "differentiated") return RotationMode::differentiated;
  if (name == "stop_gradient") return RotationMode::stop_gradient;
  if (name == "none") return RotationMode::none;
  throw ConfigError("unknown rotation mode '" + name +
                    "' (expected differentiated, stop_gradient or none)");
}

std::size_t default_filter_memory(int steps_per_span) {
  switch (steps_per_span) {
    case 1: return 12;
    case 2: return 8;
    case 3: return 6;
    default:
      throw ConfigError("no default filter memory K for " + std::to_string(steps_per_span) +
                        " steps per span; set K explicitly");
  }
}

namespace {

std::vector<double> range(double lo, double hi) {
  std::vector<double> v;
  for (double p = lo; p <= hi + 1e-9; p += 1.0) v.push_back(p);
  return v;
}

// Training powers: the preset's set for M = 1, one dB higher per extra step.
std::vector<double> preset_train_powers(const std::string& preset, int steps_per_span) {
  const double shift = static_cast<double>(steps_per_span - 1);
  if (preset == "full-32span") return range(1.0 + shift, 5.0 + shift);
  return range(-1.0 + shift, 3.0 + shift);
}

}  // namespace

ExperimentConfig named_preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "desk-4span") {
    c.span_count = 4;
    c.symbols_per_block = 256;
    c.powers_dbm = range(-6.0, 8.0);
    c.eval_blocks = 8;
  } else if (name == "full-32span") {
    c.span_count = 32;
    c.symbols_per_block = 4096;
    c.powers_dbm = range(-3.0, 9.0);
    c.eval_blocks = 4;
    c.train_steps = 30000;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected full-32span or desk-4span)");
  }
  return c;
}

ExperimentConfig ExperimentConfig::resolved() const {
  ExperimentConfig c = *this;
  if (c.wideband) {
    c.rx_sample_rate_ghz = 4.0 * c.symbol_rate_ghz;
    c.lp_bandwidth_ghz = c.rx_sample_rate_ghz;
  }
  if (c.method == Method::ldbp && c.K == 0) c.K = default_filter_memory(c.steps_per_span);
  if (c.train_powers_dbm.empty()) c.train_powers_dbm = preset_train_powers(c.preset, c.steps_per_span);
  if (c.tap_fit_passband_ghz <= 0.0) c.tap_fit_passband_ghz = 0.5 * c.lp_bandwidth_ghz;
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (preset != "desk-4span" && preset != "full-32span")
    throw ConfigError("unknown preset '" + preset + "'");
  const LinkContext ctx = link();
  ctx.validate();
  DbpConfig d = dbp_config();
  d.validate();
  if (method == Method::ldbp && K == 0) throw ConfigError("filter memory K must be at least 1");
  if (2 * K + 1 > ctx.rx_block_length())
    throw ConfigError("filter memory K = " + std::to_string(K) + " does not fit the receiver block");
  if (powers_dbm.empty()) throw ConfigError("powers_dbm is empty");
  if (eval_blocks < 1) throw ConfigError("eval_blocks must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!(rolloff > 0.0 && rolloff <= 1.0)) throw ConfigError("rolloff must be in (0, 1]");
  train_config().validate();

  // Circular blocks only model a linear channel if the accumulated
  // dispersive spread stays well inside the block.
  const double bw = symbol_rate_ghz * 1e9 * (1.0 + rolloff);
  const double spread_s = std::abs(ctx.fiber.beta2) * ctx.fiber.span_length *
                          ctx.fiber.span_count * 2.0 * std::numbers::pi * bw;
  const double spread = spread_s * ctx.rx.out_sample_rate;
  if (spread >= static_cast<double>(ctx.rx_block_length()) / 4.0)
    throw ConfigError("dispersive spread of " + std::to_string(spread) +
                      " samples exceeds a quarter of the receiver block; raise symbols_per_block");
}

LinkContext ExperimentConfig::link() const {
  LinkContext ctx;
  ctx.fiber = FiberParams::from_engineering(alpha_db_per_km, beta2_ps2_per_km, gamma_per_w_km,
                                            span_length_km, span_count);
  ctx.amp.noise_enabled = ase_noise;
  ctx.amp.noise_figure_db = noise_figure_db;
  ctx.shape.rolloff = rolloff;
  ctx.shape.span_symbols = rrc_span_symbols;
  ctx.shape.symbol_rate = symbol_rate_ghz * 1e9;
  ctx.symbols_per_block = symbols_per_block;
  ctx.forward_sps = forward_sps;
  ctx.forward_steps_per_span = forward_steps_per_span;
  ctx.rx.lp_bandwidth = lp_bandwidth_ghz * 1e9;
  ctx.rx.out_sample_rate = rx_sample_rate_ghz * 1e9;
  ctx.rx.brick_wall = !wideband;
  return ctx;
}

DbpConfig ExperimentConfig::dbp_config() const {
  DbpConfig d;
  d.steps_per_span = steps_per_span;
  d.schedule.kind = schedule;
  d.schedule.factor = schedule_factor;
  return d;
}

LdbpInitOptions ExperimentConfig::init_options() const {
  const LinkContext ctx = link();
  LdbpInitOptions o;
  o.schedule = dbp_config().schedule;
  o.shape = ctx.shape;
  o.decimation = static_cast<std::size_t>(ctx.rx_sps());
  o.passband_hz = tap_fit_passband_ghz * 1e9;
  return o;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.batch_size = batch_size;
  t.power_set_dbm = train_powers_dbm.empty() ? std::vector<double>{0.0} : train_powers_dbm;
  t.steps = train_steps;
  t.learning_rate = learning_rate;
  t.lr_decay_at = lr_decay_at;
  t.seed = seed;
  t.eval_every = eval_every;
  t.eval_batch_size = val_blocks;
  t.rotation = rotation;
  t.clip_grad_norm = clip_grad_norm;
  t.freeze_mf = freeze_mf;
  t.threads = threads;
  return t;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

struct Field {
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&, const std::string&)> set;
};

template <class T>
bool has_type(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v.is_string();
  } else if constexpr (std::is_floating_point_v<T>) {
    return v.is_number();
  } else if constexpr (std::is_unsigned_v<T>) {
    return v.is_number_unsigned();
  } else if constexpr (std::is_integral_v<T>) {
    return v.is_number_integer();
  } else {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!e.is_number()) return false;
    return true;
  }
}

template <class T>
T as(const json& v, const std::string& key) {
  if (!has_type<T>(v)) throw ConfigError("config key '" + key + "' has the wrong type");
  return v.get<T>();
}

template <class T>
Field plain(T ExperimentConfig::*member) {
  return {[member](const ExperimentConfig& c) { return json(c.*member); },
          [member](ExperimentConfig& c, const json& v, const std::string& key) {
            c.*member = as<T>(v, key);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["preset"] = plain(&ExperimentConfig::preset);
    t["alpha_db_per_km"] = plain(&ExperimentConfig::alpha_db_per_km);
    t["beta2_ps2_per_km"] = plain(&ExperimentConfig::beta2_ps2_per_km);
    t["gamma_per_w_km"] = plain(&ExperimentConfig::gamma_per_w_km);
    t["span_length_km"] = plain(&ExperimentConfig::span_length_km);
    t["span_count"] = plain(&ExperimentConfig::span_count);
    t["ase_noise"] = plain(&ExperimentConfig::ase_noise);
    t["noise_figure_db"] = plain(&ExperimentConfig::noise_figure_db);
    t["symbol_rate_ghz"] = plain(&ExperimentConfig::symbol_rate_ghz);
    t["rolloff"] = plain(&ExperimentConfig::rolloff);
    t["rrc_span_symbols"] = plain(&ExperimentConfig::rrc_span_symbols);
    t["symbols_per_block"] = plain(&ExperimentConfig::symbols_per_block);
    t["forward_sps"] = plain(&ExperimentConfig::forward_sps);
    t["forward_steps_per_span"] = plain(&ExperimentConfig::forward_steps_per_span);
    t["lp_bandwidth_ghz"] = plain(&ExperimentConfig::lp_bandwidth_ghz);
    t["rx_sample_rate_ghz"] = plain(&ExperimentConfig::rx_sample_rate_ghz);
    t["wideband"] = plain(&ExperimentConfig::wideband);
    t["method"] = {[](const ExperimentConfig& c) { return json(to_string(c.method)); },
                   [](ExperimentConfig& c, const json& v, const std::string& key) {
                     c.method = method_from_string(as<std::string>(v, key));
                   }};
    t["steps_per_span"] = plain(&ExperimentConfig::steps_per_span);
    t["schedule"] = {[](const ExperimentConfig& c) { return json(to_string(c.schedule)); },
                     [](ExperimentConfig& c, const json& v, const std::string& key) {
                       c.schedule = schedule_kind_from_string(as<std::string>(v, key));
                     }};
    t["schedule_factor"] = plain(&ExperimentConfig::schedule_factor);
    t["K"] = plain(&ExperimentConfig::K);
    t["checkpoint"] = plain(&ExperimentConfig::checkpoint);
    t["tap_fit_passband_ghz"] = plain(&ExperimentConfig::tap_fit_passband_ghz);
    t["powers_dbm"] = plain(&ExperimentConfig::powers_dbm);
    t["eval_blocks"] = plain(&ExperimentConfig::eval_blocks);
    t["train_steps"] = plain(&ExperimentConfig::train_steps);
    t["batch_size"] = plain(&ExperimentConfig::batch_size);
    t["learning_rate"] = plain(&ExperimentConfig::learning_rate);
    t["lr_decay_at"] = plain(&ExperimentConfig::lr_decay_at);
    t["train_powers_dbm"] = plain(&ExperimentConfig::train_powers_dbm);
    t["eval_every"] = plain(&ExperimentConfig::eval_every);
    t["val_blocks"] = plain(&ExperimentConfig::val_blocks);
    t["rotation"] = {[](const ExperimentConfig& c) { return json(to_string(c.rotation)); },
                     [](ExperimentConfig& c, const json& v, const std::string& key) {
                       c.rotation = rotation_from_string(as<std::string>(v, key));
                     }};
    t["clip_grad_norm"] = plain(&ExperimentConfig::clip_grad_norm);
    t["freeze_mf"] = plain(&ExperimentConfig::freeze_mf);
    t["seed"] = plain(&ExperimentConfig::seed);
    t["threads"] = plain(&ExperimentConfig::threads);
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& [name, f] : fields()) j[name] = f.get(cfg);
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string preset = "desk-4span";
  if (auto it = j.find("preset"); it != j.end()) preset = as<std::string>(*it, "preset");
  ExperimentConfig cfg = named_preset(preset);
  for (const auto& [key, value] : j.items()) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value, key);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "method,stps,K,power_dbm,q_db,q_stderr,blocks,seed\n";
  for (const auto& r : rows)
    out << to_string(r.method) << ',' << r.stps << ',' << r.K << ',' << num(r.power_dbm) << ','
        << num(r.q_db) << ',' << num(r.q_stderr) << ',' << r.blocks << ',' << r.seed << '\n';
  return out.str();
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,stps,K,power_dbm,q_db,q_stderr,blocks,seed")
    throw FormatError("sweep CSV: unexpected header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 8) throw FormatError("sweep CSV: malformed row '" + line + "'");
    try {
      rows.push_back(SweepRow{method_from_string(cells[0]), std::stoi(cells[1]),
                              std::stoul(cells[2]), std::stod(cells[3]), std::stod(cells[4]),
                              std::stod(cells[5]), std::stoul(cells[6]), std::stoull(cells[7])});
    } catch (const std::invalid_argument&) {
      throw FormatError("sweep CSV: malformed row '" + line + "'");
    }
  }
  return rows;
}

LdbpModel configured_model(const ExperimentConfig& cfg) {
  const LinkContext ctx = cfg.link();
  if (!cfg.checkpoint.empty()) {
    LdbpModel m = load_checkpoint(cfg.checkpoint);
    if (m.m != ctx.symbols_per_block || m.n != ctx.rx_block_length())
      throw ConfigError("checkpoint " + cfg.checkpoint + " does not match the configured block size");
    if (m.span_count != cfg.span_count)
      throw ConfigError("checkpoint " + cfg.checkpoint + " was built for a different span count");
    return m;
  }
  return init_from_ssfm(ctx.fiber, cfg.steps_per_span, cfg.K, ctx.symbols_per_block,
                        cfg.init_options());
}

double equalized_q(const ExperimentConfig& cfg, const LdbpModel* model, const Example& ex) {
  SymbolBlock x_hat;
  const LinkContext ctx = cfg.link();
  switch (cfg.method) {
    case Method::cdc:
      x_hat = matched_filter(cdc_equalize(ex.y, ctx.fiber), ctx.shape, ctx.symbols_per_block);
      break;
    case Method::dbp:
      x_hat = matched_filter(dbp_equalize(ex.y, ctx.fiber, cfg.dbp_config()), ctx.shape,
                             ctx.symbols_per_block);
      break;
    case Method::ldbp:
      if (!model) throw ConfigError("ldbp evaluation needs a model");
      x_hat = forward(*model, ex.y);
      break;
  }
  return q_factor_db(ex.x, phase_offset_rotate(x_hat, ex.x).block);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  const ExperimentConfig cfg = config.resolved();
  const LinkContext ctx = cfg.link();
  LdbpModel model;
  if (cfg.method == Method::ldbp) model = configured_model(cfg);

  const std::size_t B = cfg.eval_blocks;
  const std::size_t P = cfg.powers_dbm.size();
  std::vector<double> q(P * B);
  parallel_for(q.size(), cfg.threads, [&](std::size_t idx) {
    const double p = cfg.powers_dbm[idx / B];
    const Example ex = simulate_block(ctx, p, cfg.seed, "sweep", std::bit_cast<std::uint64_t>(p),
                                      idx % B);
    q[idx] = equalized_q(cfg, cfg.method == Method::ldbp ? &model : nullptr, ex);
  });

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < P; ++i) {
    SweepRow r;
    r.method = cfg.method;
    r.stps = cfg.method == Method::cdc ? 0
             : cfg.method == Method::ldbp ? model.steps_per_span
                                          : cfg.steps_per_span;
    r.K = cfg.method == Method::ldbp ? (model.layers.empty() ? 0 : model.layers[0].w1.memory()) : 0;
    r.power_dbm = cfg.powers_dbm[i];
    r.blocks = B;
    r.seed = cfg.seed;
    double s = 0.0;
    for (std::size_t b = 0; b < B; ++b) s += q[i * B + b];
    r.q_db = s / static_cast<double>(B);
    if (B > 1) {
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b) v += (q[i * B + b] - r.q_db) * (q[i * B + b] - r.q_db);
      r.q_stderr = std::sqrt(v / static_cast<double>(B - 1) / static_cast<double>(B));
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  write_text(out_dir / "resolved_config.json", to_json(cfg.resolved()).dump(2) + "\n");
}

TrainRun run_train(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  const ExperimentConfig cfg = config.resolved();
  if (cfg.method != Method::ldbp) throw ConfigError("training needs method = ldbp");
  std::filesystem::create_directories(out_dir);
  TrainRun run;
  run.checkpoint = out_dir / "checkpoint.json";
  run.log = out_dir / "train_log.csv";

  const LdbpModel start = configured_model(cfg);
  try {
    run.result = train(start, cfg.link(), cfg.train_config());
  } catch (const DivergenceError& e) {
    e.log().write_csv(run.log);
    throw DivergenceError(std::string(e.what()) + " (log written to " + run.log.string() + ")",
                          e.log());
  }
  LdbpModel best = run.result.best;
  best.provenance["best_step"] = run.result.best_step;
  best.provenance["best_mean_val_q_db"] = run.result.best_metric;
  save_checkpoint(best, run.checkpoint);
  save_checkpoint(run.result.last, out_dir / "checkpoint_last.json");
  run.result.log.write_csv(run.log);
  return run;
}

}  // namespace ldbp
