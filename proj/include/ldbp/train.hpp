#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ldbp/autograd.hpp"
#include "ldbp/error.hpp"
#include "ldbp/link.hpp"
#include "ldbp/model.hpp"

namespace ldbp {

struct AdamState {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_size(std::size_t n);
};

// Bias-corrected Adam on a flat parameter vector.  Entries with
// mask[i] == false are left untouched.  Returns false, changing nothing,
// if any gradient is non-finite.
bool adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double lr, const std::vector<bool>* mask = nullptr);

struct AdamStepResult {
  LdbpModel model;
  AdamState state;
  bool accepted = true;
};

AdamStepResult adam_step(const LdbpModel& model, const Gradients& grads, const AdamState& state,
                         double lr, bool freeze_mf = false);

struct TrainConfig {
  std::size_t batch_size = 30;
  std::vector<double> power_set_dbm{1, 2, 3, 4, 5};
  long long steps = 5000;
  double learning_rate = 1e-3;
  // The rate halves at each of these fractions of the step budget.
  std::vector<double> lr_decay_at{0.5, 0.75};
  std::uint64_t seed = 1;
  long long eval_every = 250;
  std::size_t eval_batch_size = 8;  // validation blocks per power
  RotationMode rotation = RotationMode::differentiated;
  double clip_grad_norm = 0.0;  // 0 disables
  bool freeze_mf = false;
  int threads = 1;

  void validate() const;
  double lr_at(long long local_step) const;
};

// batch_size independent blocks keyed by (seed, global step, item): random
// symbols, launch power drawn uniformly from power_set, full link, front end.
std::vector<Example> generate_batch(const LinkContext& ctx, std::span<const double> power_set,
                                    std::size_t batch_size, std::uint64_t seed, long long step,
                                    int threads = 1);

// Held-out blocks per power, from a stream never used for training batches.
std::vector<std::vector<Example>> validation_set(const LinkContext& ctx,
                                                 std::span<const double> powers,
                                                 std::size_t blocks_per_power, std::uint64_t seed,
                                                 int threads = 1);

// Mean phase-rotated Q (dB) of the model over each power's blocks.
std::vector<double> validation_q(const LdbpModel& model,
                                 const std::vector<std::vector<Example>>& set, int threads = 1);

struct TrainLogRow {
  long long step = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::vector<double> val_q_db;  // empty when not evaluated this step
  double wallclock_s = 0.0;
};

struct TrainLog {
  std::vector<double> powers_dbm;
  std::vector<TrainLogRow> rows;

  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  LdbpModel best;  // highest mean validation Q
  LdbpModel last;
  AdamState state;
  TrainLog log;
  long long best_step = 0;
  double best_metric = 0.0;
  std::vector<double> initial_val_q;
  std::vector<double> best_val_q;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, TrainLog log)
      : NumericError(what), log_(std::move(log)) {}
  const TrainLog& log() const { return log_; }

 private:
  TrainLog log_;
};

// Mini-batch Adam on freshly simulated data.  Training continues the
// model's own step counter, so a resumed run draws the batches the
// uninterrupted run would have.  Aborts with DivergenceError when the batch
// loss stays above 10x the first batch loss for 100 consecutive steps.
TrainResult train(const LdbpModel& model, const LinkContext& ctx, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_row = {});

}  // namespace ldbp
