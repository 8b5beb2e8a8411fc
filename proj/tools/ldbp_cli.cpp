// Command-line front end: simulate | sweep | train | eval-checkpoint | preset-dump.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldbp/error.hpp"
#include "ldbp/experiment.hpp"

namespace fs = std::filesystem;
using namespace ldbp;

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "out";
  std::string checkpoint;
};

ExperimentConfig make_config(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? named_preset(o.preset.empty() ? "desk-4span" : o.preset)
                                          : load_config(o.config);
  if (!o.config.empty() && !o.preset.empty())
    throw ConfigError("--preset and --config are exclusive; put \"preset\" in the config file");
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  return cfg.resolved();
}

nlohmann::json complex_array(const std::vector<cplx>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : v) a.push_back({c.real(), c.imag()});
  return a;
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig cfg = make_config(o);
  write_resolved_config(cfg, o.out);
  const LinkContext ctx = cfg.link();
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.powers_dbm.size(); ++i) {
    const double p = cfg.powers_dbm[i];
    for (std::size_t b = 0; b < cfg.eval_blocks; ++b) {
      const Example ex = simulate_block(ctx, p, cfg.seed, "simulate", i, b);
      blocks.push_back({{"power_dbm", p},
                        {"block", b},
                        {"sample_rate_hz", ex.y.sample_rate()},
                        {"y", complex_array(ex.y.samples())},
                        {"x", complex_array(ex.x.symbols)}});
    }
  }
  write_text(fs::path(o.out) / "blocks.json", blocks.dump() + "\n");
  std::printf("wrote %zu blocks to %s\n", blocks.size(), (fs::path(o.out) / "blocks.json").c_str());
  return 0;
}

int cmd_sweep(const Options& o, bool require_checkpoint) {
  ExperimentConfig cfg = make_config(o);
  if (require_checkpoint) {
    if (cfg.checkpoint.empty()) throw ConfigError("eval-checkpoint needs --checkpoint or a config checkpoint");
    cfg.method = Method::ldbp;
  }
  write_resolved_config(cfg, o.out);
  const auto rows = run_sweep(cfg);
  const std::string csv = sweep_csv(rows);
  write_text(fs::path(o.out) / "results.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_train(const Options& o) {
  const ExperimentConfig cfg = make_config(o);
  write_resolved_config(cfg, o.out);
  const TrainRun run = run_train(cfg, o.out);
  double start = 0.0;
  for (double q : run.result.initial_val_q) start += q;
  start /= static_cast<double>(std::max<std::size_t>(1, run.result.initial_val_q.size()));
  std::printf("best step %lld, mean validation Q %.3f dB (start %.3f dB)\n", run.result.best_step,
              run.result.best_metric, start);
  std::printf("checkpoint: %s\nlog: %s\n", run.checkpoint.c_str(), run.log.c_str());
  return 0;
}

int cmd_preset_dump(const Options& o, const std::string& name) {
  Options p = o;
  if (!name.empty()) p.preset = name;
  const ExperimentConfig cfg = make_config(p);
  std::cout << to_json(cfg).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fiber link simulator with split-step and learned digital backpropagation"};
  app.require_subcommand(1);
  Options o;
  std::string dump_name;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "start from a preset instead of a config file");
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* simulate = app.add_subcommand("simulate", "write received blocks and reference symbols");
  auto* sweep = app.add_subcommand("sweep", "Q versus launch power for the configured method");
  auto* trainc = app.add_subcommand("train", "train the learned receiver");
  auto* evalc = app.add_subcommand("eval-checkpoint", "power sweep of a trained checkpoint");
  auto* dump = app.add_subcommand("preset-dump", "print a preset as a resolved config");
  for (auto* s : {simulate, sweep, trainc, evalc, dump}) common(s);
  for (auto* s : {sweep, trainc, evalc})
    s->add_option("--checkpoint", o.checkpoint, "LDBP checkpoint JSON");
  dump->add_option("name", dump_name, "full-32span or desk-4span");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*sweep) return cmd_sweep(o, false);
    if (*trainc) return cmd_train(o);
    if (*evalc) return cmd_sweep(o, true);
    if (*dump) return cmd_preset_dump(o, dump_name);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
