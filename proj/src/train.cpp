#include "ldbp/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ldbp/error.hpp"
#include "ldbp/parallel.hpp"

namespace ldbp {

AdamState AdamState::for_size(std::size_t n) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

bool adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double lr, const std::vector<bool>* mask) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw SizeError("adam: parameter, gradient, and moment sizes differ");
  for (double g : grads)
    if (!std::isfinite(g)) return false;
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mh = state.m[i] / c1;
    const double vh = state.v[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + state.eps);
  }
  return true;
}

AdamStepResult adam_step(const LdbpModel& model, const Gradients& grads, const AdamState& state,
                         double lr, bool freeze_mf) {
  AdamStepResult out{model, state, true};
  std::vector<double> p = flatten_parameters(model);
  const std::vector<double> g = flatten_gradients(grads);
  if (g.size() != p.size()) throw SizeError("adam: gradients do not match the model");
  if (out.state.m.empty()) out.state = AdamState::for_size(p.size());
  const auto mask = trainable_mask(model, freeze_mf);
  out.accepted = adam_update(p, g, out.state, lr, &mask);
  if (out.accepted) {
    for (double v : p)
      if (!std::isfinite(v)) throw NumericError("adam produced a non-finite parameter");
    assign_parameters(out.model, p);
  }
  return out;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (power_set_dbm.empty()) throw ConfigError("training power set is empty");
  if (steps < 0) throw ConfigError("step budget must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (eval_batch_size < 1) throw ConfigError("eval batch size must be at least 1");
  if (clip_grad_norm < 0.0) throw ConfigError("gradient clip norm must be >= 0");
}

double TrainConfig::lr_at(long long local_step) const {
  double lr = learning_rate;
  for (double f : lr_decay_at)
    if (static_cast<double>(local_step) >= f * static_cast<double>(steps)) lr *= 0.5;
  return lr;
}

std::vector<Example> generate_batch(const LinkContext& ctx, std::span<const double> power_set,
                                    std::size_t batch_size, std::uint64_t seed, long long step,
                                    int threads) {
  if (power_set.empty()) throw ConfigError("power set is empty");
  std::vector<Example> batch(batch_size, Example{ComplexSignal(CVec(1), 1.0), {}, 0.0});
  parallel_for(batch_size, threads, [&](std::size_t i) {
    RngStream pick(seed, "train/power", static_cast<std::uint64_t>(step), i);
    const double p = power_set[pick.uniform_index(power_set.size())];
    batch[i] = simulate_block(ctx, p, seed, "train", static_cast<std::uint64_t>(step), i);
  });
  return batch;
}

std::vector<std::vector<Example>> validation_set(const LinkContext& ctx,
                                                 std::span<const double> powers,
                                                 std::size_t blocks_per_power, std::uint64_t seed,
                                                 int threads) {
  std::vector<std::vector<Example>> set(powers.size());
  std::vector<Example> flat(powers.size() * blocks_per_power,
                            Example{ComplexSignal(CVec(1), 1.0), {}, 0.0});
  parallel_for(flat.size(), threads, [&](std::size_t idx) {
    const std::size_t p = idx / blocks_per_power;
    const std::size_t b = idx % blocks_per_power;
    flat[idx] = simulate_block(ctx, powers[p], seed, "validation", p, b);
  });
  for (std::size_t idx = 0; idx < flat.size(); ++idx)
    set[idx / blocks_per_power].push_back(std::move(flat[idx]));
  return set;
}

std::vector<double> validation_q(const LdbpModel& model,
                                 const std::vector<std::vector<Example>>& set, int threads) {
  std::vector<double> out(set.size(), 0.0);
  for (std::size_t p = 0; p < set.size(); ++p) {
    std::vector<double> q(set[p].size());
    parallel_for(q.size(), threads, [&](std::size_t b) {
      const SymbolBlock x_hat = forward(model, set[p][b].y);
      q[b] = q_factor_db(set[p][b].x, phase_offset_rotate(x_hat, set[p][b].x).block);
    });
    out[p] = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string TrainLog::csv() const {
  std::ostringstream out;
  out << "step,mean_loss,lr";
  for (double p : powers_dbm) out << ",val_q_db_" << fmt(p);
  out << ",wallclock_s\n";
  for (const auto& r : rows) {
    out << r.step << ',' << fmt(r.mean_loss) << ',' << fmt(r.lr);
    for (std::size_t i = 0; i < powers_dbm.size(); ++i)
      out << ',' << (i < r.val_q_db.size() ? fmt(r.val_q_db[i]) : std::string());
    out << ',' << fmt(r.wallclock_s) << '\n';
  }
  return out.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write training log " + path.string());
  out << csv();
}

TrainResult train(const LdbpModel& model, const LinkContext& ctx, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_row) {
  cfg.validate();
  ctx.validate();
  if (ctx.symbols_per_block != model.m || ctx.rx_block_length() != model.n)
    throw ConfigError("model block size does not match the link's receiver block");

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  TrainResult res{model, model, AdamState::for_size(2 * model.complex_parameter_count()), {}, 0,
                  0.0, {}, {}};
  res.log.powers_dbm = cfg.power_set_dbm;
  const auto vset = validation_set(ctx, cfg.power_set_dbm, cfg.eval_batch_size, cfg.seed, cfg.threads);
  res.initial_val_q = validation_q(model, vset, cfg.threads);
  res.best_val_q = res.initial_val_q;
  res.best_metric = mean(res.initial_val_q);
  res.best_step = model.train_step;

  LdbpModel current = model;
  double first_loss = -1.0;
  int above = 0;
  for (long long s = 0; s < cfg.steps; ++s) {
    const long long global = model.train_step + s;
    const auto batch =
        generate_batch(ctx, cfg.power_set_dbm, cfg.batch_size, cfg.seed, global, cfg.threads);
    const double adj = 1.0 / static_cast<double>(batch.size());
    std::vector<Gradients> per_item(batch.size());
    std::vector<double> losses(batch.size());
    parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
      const Tape tape = forward_with_tape(current, batch[i].y);
      losses[i] = evaluate_loss(tape.output, batch[i].x, cfg.rotation).loss;
      per_item[i] = backward(current, tape, batch[i].x, adj, cfg.rotation);
    });
    // Fixed-order reduction keeps results independent of the thread count.
    Gradients g = std::move(per_item[0]);
    for (std::size_t i = 1; i < per_item.size(); ++i) g.add(per_item[i]);
    const double loss = std::accumulate(losses.begin(), losses.end(), 0.0) * adj;
    if (cfg.clip_grad_norm > 0.0) {
      const double nrm = g.norm();
      if (nrm > cfg.clip_grad_norm) g.scale(cfg.clip_grad_norm / nrm);
    }
    const double lr = cfg.lr_at(s);
    AdamStepResult step = adam_step(current, g, res.state, lr, cfg.freeze_mf);
    if (!step.accepted) throw NumericError("non-finite gradient at step " + std::to_string(global));
    current = std::move(step.model);
    res.state = std::move(step.state);
    current.train_step = global + 1;
    current.trained = true;

    TrainLogRow row{global + 1, loss, lr, {}, 0.0};
    const bool last = s + 1 == cfg.steps;
    if ((s + 1) % cfg.eval_every == 0 || last) {
      row.val_q_db = validation_q(current, vset, cfg.threads);
      const double metric = mean(row.val_q_db);
      if (metric > res.best_metric) {
        res.best_metric = metric;
        res.best = current;
        res.best_step = global + 1;
        res.best_val_q = row.val_q_db;
      }
    }
    row.wallclock_s = elapsed();
    res.log.rows.push_back(row);
    if (on_row) on_row(row);

    if (first_loss < 0.0) first_loss = loss;
    above = loss > 10.0 * first_loss ? above + 1 : 0;
    if (above >= 100)
      throw DivergenceError("training diverged at step " + std::to_string(global + 1) +
                                ": loss above 10x its initial value for 100 steps",
                            res.log);
  }
  res.last = current;
  if (res.best_step == model.train_step) {
    // Nothing beat the starting point; keep the step counter moving anyway.
    res.best.train_step = current.train_step;
  }
  return res;
}

}  // namespace ldbp
