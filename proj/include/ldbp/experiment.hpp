#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldbp/dbp.hpp"
#include "ldbp/link.hpp"
#include "ldbp/model.hpp"
#include "ldbp/train.hpp"

namespace ldbp {

enum class Method { cdc, dbp, ldbp };

const char* to_string(Method m);
Method method_from_string(const std::string& name);
const char* to_string(RotationMode m);
RotationMode rotation_from_string(const std::string& name);

// Flat experiment description.  Units at this boundary are the engineering
// ones (dB/km, ps^2/km, 1/(W km), km, GHz, dBm); see config_keys() for the
// full list.
struct ExperimentConfig {
  std::string preset = "desk-4span";

  // Fiber and amplifiers.
  double alpha_db_per_km = 0.2;
  double beta2_ps2_per_km = -21.7;
  double gamma_per_w_km = 1.3;
  double span_length_km = 100.0;
  int span_count = 4;
  bool ase_noise = true;
  double noise_figure_db = 4.5;

  // Transmitter.
  double symbol_rate_ghz = 20.0;
  double rolloff = 0.1;
  int rrc_span_symbols = 64;
  std::size_t symbols_per_block = 256;

  // Forward simulation.
  int forward_sps = 8;
  int forward_steps_per_span = 50;

  // Receiver front end.  wideband replaces the low-pass filter and the
  // receiver rate by an unfiltered 4 samples per symbol.
  double lp_bandwidth_ghz = 35.0;
  double rx_sample_rate_ghz = 40.0;
  bool wideband = false;

  // Equalizer.
  Method method = Method::ldbp;
  int steps_per_span = 1;
  ScheduleKind schedule = ScheduleKind::logarithmic;
  double schedule_factor = 0.3;
  std::size_t K = 0;  // 0: the default for steps_per_span
  std::string checkpoint;
  double tap_fit_passband_ghz = 0.0;  // 0: half the front-end bandwidth

  // Sweep.
  std::vector<double> powers_dbm;
  std::size_t eval_blocks = 8;

  // Training.
  long long train_steps = 5000;
  std::size_t batch_size = 30;
  double learning_rate = 1e-3;
  std::vector<double> lr_decay_at{0.5, 0.75};
  std::vector<double> train_powers_dbm;  // empty: preset default for M
  long long eval_every = 250;
  std::size_t val_blocks = 8;
  RotationMode rotation = RotationMode::differentiated;
  double clip_grad_norm = 0.0;
  bool freeze_mf = false;

  std::uint64_t seed = 1;
  int threads = 1;

  // Fills every defaulted field (K, train powers, tap-fit band) and
  // validates; the result is what gets echoed.
  ExperimentConfig resolved() const;
  void validate() const;

  LinkContext link() const;
  DbpConfig dbp_config() const;
  LdbpInitOptions init_options() const;
  TrainConfig train_config() const;
};

// K per steps per span for the learned receiver: 1 -> 12, 2 -> 8, 3 -> 6.
std::size_t default_filter_memory(int steps_per_span);

// full-32span or desk-4span.  Throws ConfigError for anything else.
ExperimentConfig named_preset(const std::string& name);

const std::vector<std::string>& config_keys();
nlohmann::json to_json(const ExperimentConfig& cfg);
// Starts from the preset named by "preset" (default desk-4span) and applies
// the remaining keys.  Unknown keys and mistyped values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct SweepRow {
  Method method = Method::cdc;
  int stps = 0;
  std::size_t K = 0;
  double power_dbm = 0.0;
  double q_db = 0.0;
  double q_stderr = 0.0;
  std::size_t blocks = 0;
  std::uint64_t seed = 0;
};

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

// The model the configured ldbp method evaluates: the checkpoint when one
// is set, otherwise the split-step initialization.
LdbpModel configured_model(const ExperimentConfig& cfg);

// Q per launch power for the configured method.  Blocks are keyed by
// (seed, power, block index) only, so different methods see identical data.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);

// Phase-rotated Q (dB) of one received block under the given equalizer.
double equalized_q(const ExperimentConfig& cfg, const LdbpModel* model, const Example& ex);

struct TrainRun {
  TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path log;
};

// Trains from the checkpoint (resuming its step counter) or the
// initialization, then writes checkpoint.json (best), checkpoint_last.json
// and train_log.csv into out_dir.  A divergence abort writes the log first
// and rethrows with its location.
TrainRun run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace ldbp
