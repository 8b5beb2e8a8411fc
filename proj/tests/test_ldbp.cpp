#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ldbp/dbp.hpp"
#include "ldbp/error.hpp"
#include "ldbp/link.hpp"
#include "ldbp/model.hpp"
#include "oracles.hpp"

using namespace ldbp;
namespace fs = std::filesystem;

namespace {

LinkContext desk(bool noise = true) {
  LinkContext ctx;
  ctx.fiber = standard_smf(100.0, 4);
  ctx.amp.noise_enabled = noise;
  return ctx;
}

double model_q(const LdbpModel& model, const Example& ex) {
  const auto r = forward(model, ex.y);
  return q_factor_db(ex.x, phase_offset_rotate(r, ex.x).block);
}

double dbp_q(const Example& ex, const FiberParams& fiber, const DbpConfig& cfg) {
  const auto r = matched_filter(dbp_equalize(ex.y, fiber, cfg), PulseShape{}, ex.x.size());
  return q_factor_db(ex.x, phase_offset_rotate(r, ex.x).block);
}

// Random model of the given shape with complex taps and alphas.
LdbpModel random_model(std::size_t layers, std::size_t K, std::size_t m, std::uint64_t seed) {
  LdbpModel model;
  model.m = m;
  model.decimation = 2;
  model.n = 2 * m;
  model.steps_per_span = static_cast<int>(layers);
  model.span_count = 1;
  for (std::size_t i = 0; i < layers; ++i) {
    const auto a = oracle::random_cvec(K + 1, seed + 3 * i);
    const auto b = oracle::random_cvec(K + 1, seed + 3 * i + 1);
    const auto c = oracle::random_cvec(1, seed + 3 * i + 2);
    model.layers.push_back({SymmetricFilter(a), c[0], SymmetricFilter(b)});
  }
  model.mf_filter = SymmetricFilter(oracle::random_cvec(5, seed + 99));
  model.trained = true;
  model.train_step = 1234;
  model.provenance = {{"note", "random"}};
  return model;
}

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST_SUITE("ldbp") {

TEST_CASE("initialization mirrors the split-step scheme") {
  const auto p = standard_smf(100.0, 4);
  for (int M : {1, 2, 3}) {
    const std::size_t K = 8;
    LdbpInitOptions opt;
    const auto model = init_from_ssfm(p, M, K, 256, opt);
    REQUIRE(model.layers.size() == static_cast<std::size_t>(M * 4));
    CHECK(model.n == 512);
    CHECK(model.decimation == 2);
    CHECK(model.complex_parameter_count() ==
          model.layers.size() * (2 * (K + 1) + 1) + model.mf_filter.half_taps().size());
    CHECK(model.mf_filter ==
          periodic_rrc_filter(opt.shape, 2, 512, std::min<std::size_t>(64 * 2, 255)));
    const double ginv = 1.0 / p.span_amplitude_gain();
    const auto steps = step_schedule(p.span_length, M, opt.schedule, p.alpha);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      const auto& l = model.layers[i];
      CHECK(l.w1.memory() == K);
      CHECK(l.w2.memory() == K);
      CHECK(l.alpha.real() > 0.0);
      CHECK(l.alpha.imag() == 0.0);
      // Uniform schedule: one alpha for all layers.
      const double a0 = p.gamma * midpoint_effective_length(p.alpha, steps[0]);
      CHECK(std::abs(l.alpha.real() - a0) < 1e-12 * a0);
      const bool span_start = i % static_cast<std::size_t>(M) == 0;
      for (std::size_t d = 0; d <= K; ++d) {
        const cplx expect = span_start ? ginv * l.w2.half_taps()[d] : l.w2.half_taps()[d];
        CHECK(std::abs(l.w1.half_taps()[d] - expect) <= 1e-15 * std::abs(expect));
      }
    }
  }
  LdbpInitOptions literal;
  literal.literal_gamma_delta = true;
  const auto m1 = init_from_ssfm(p, 2, 4, 256, literal);
  CHECK(m1.layers[0].alpha.real() == p.gamma * 50e3);

  // Logarithmic schedule: backward traversal starts with the long step.
  LdbpInitOptions lg;
  lg.schedule = StepSchedule{ScheduleKind::logarithmic, 1.0};
  const auto m2 = init_from_ssfm(p, 2, 4, 256, lg);
  CHECK(m2.layers[0].alpha.real() > m2.layers[1].alpha.real());

  CHECK_THROWS_AS(init_from_ssfm(p, 1, 256, 256), SizeError);
  CHECK_THROWS_AS(init_from_ssfm(p, 1, 4, 100), SizeError);
}

TEST_CASE("kerr activation") {
  const auto x = oracle::random_cvec(64, 11);
  CVec y = x;
  kerr_activation_inplace(y, cplx{0.7, 0.0});
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(std::abs(y[i]) - std::abs(x[i])) < 1e-14);
    CHECK(std::abs(y[i] - x[i] * std::exp(cplx{0.0, -0.7 * std::norm(x[i])})) < 1e-14);
  }
  CVec z = x;
  kerr_activation_inplace(z, cplx{0.3, -0.2});
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(z[i] - x[i] * std::exp(cplx{0.0, -1.0} * cplx{0.3, -0.2} * std::norm(x[i]))) <
          1e-13);
  CVec w = x;
  kerr_activation_inplace(w, 0.0);
  CHECK(w == x);
}

TEST_CASE("identity network is the matched filter alone") {
  auto model = random_model(3, 2, 64, 5);
  for (auto& l : model.layers) l = {SymmetricFilter::identity(), 0.0, SymmetricFilter::identity()};
  const ComplexSignal y(oracle::random_cvec(128, 6), 40e9);
  const auto out = forward(model, y);
  const auto full = oracle::naive_circular(y.samples(), model.mf_filter.full_taps());
  for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(out[k] - full[2 * k]) < 1e-12);
  CHECK_THROWS_AS(forward(model, ComplexSignal(CVec(256), 40e9)), SizeError);
}

TEST_CASE("forward is linear when every alpha is zero") {
  auto model = random_model(3, 3, 64, 21);
  for (auto& l : model.layers) l.alpha = 0.0;
  const auto a = oracle::random_cvec(128, 1), b = oracle::random_cvec(128, 2);
  const cplx ca{0.3, -1.2}, cb{-0.7, 0.4};
  CVec mix(128);
  for (std::size_t i = 0; i < 128; ++i) mix[i] = ca * a[i] + cb * b[i];
  const auto fa = forward(model, ComplexSignal(a, 1.0));
  const auto fb = forward(model, ComplexSignal(b, 1.0));
  const auto fm = forward(model, ComplexSignal(mix, 1.0));
  CVec expect(64);
  for (std::size_t k = 0; k < 64; ++k) expect[k] = ca * fa[k] + cb * fb[k];
  CHECK(oracle::rel_err(fm.symbols, expect) < 1e-12);
}

TEST_CASE("linear reduction: init model equals CDC and matched filter") {
  // Longest possible taps, fitted over the front-end passband.
  FiberParams p = standard_smf(100.0, 2);
  p.gamma = 0.0;
  const std::size_t m = 512;
  const auto model = init_from_ssfm(p, 2, m - 1, m);
  LinkContext ctx;
  ctx.fiber = p;
  ctx.symbols_per_block = m;
  const auto ex = simulate_block(ctx, 0.0, 8, "lin", 0, 0);
  // Same matched-filter taps on both sides; only the network is compared.
  const auto full = oracle::naive_circular(cdc_equalize(ex.y, p).samples(), model.mf_filter.full_taps());
  CVec ref(m);
  for (std::size_t k = 0; k < m; ++k) ref[k] = full[2 * k];
  CHECK(oracle::rel_err(forward(model, ex.y).symbols, ref) < 1e-6);
  // The truncated output filter stays close to the exact periodic one.
  const auto exact = matched_filter(cdc_equalize(ex.y, p), ctx.shape, m);
  CHECK(oracle::rel_err(ref, exact.symbols) < 1e-3);
}

TEST_CASE("init model inverts a noiseless linear desk link") {
  auto ctx = desk(false);
  ctx.fiber.gamma = 0.0;
  const auto ex = simulate_block(ctx, 2.0, 3, "lin", 0, 0);
  for (int M : {1, 2}) {
    const auto model = init_from_ssfm(ctx.fiber, M, 12, 256);
    CHECK(model_q(model, ex) >= 40.0);
  }
}

TEST_CASE("pre-training equivalence with DBP at K = 32") {
  const auto ctx = desk();
  for (int M : {1, 2}) {
    LdbpInitOptions opt;
    opt.schedule = StepSchedule{ScheduleKind::logarithmic, 0.3};
    const auto model = init_from_ssfm(ctx.fiber, M, 32, 256, opt);
    DbpConfig cfg;
    cfg.steps_per_span = M;
    cfg.schedule = opt.schedule;
    for (double p : {0.0, 4.0}) {
      double ql = 0.0, qd = 0.0;
      for (std::uint64_t b = 0; b < 2; ++b) {
        const auto ex = simulate_block(ctx, p, 12, "equiv", 0, b);
        ql += model_q(model, ex);
        qd += dbp_q(ex, ctx.fiber, cfg);
      }
      CAPTURE(M);
      CAPTURE(p);
      CHECK(std::abs(ql - qd) / 2.0 < 0.05);
    }
  }
}

TEST_CASE("checkpoint roundtrip") {
  const auto model = random_model(4, 3, 64, 77);
  const auto path = temp_file("ldbp_roundtrip.json");
  save_checkpoint(model, path);
  const auto back = load_checkpoint(path);
  CHECK(back == model);
  // Bit-exact, including values that do not print short.
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    for (std::size_t d = 0; d < 4; ++d)
      CHECK(std::memcmp(&back.layers[i].w1.half_taps()[d], &model.layers[i].w1.half_taps()[d],
                        sizeof(cplx)) == 0);

  // An init model reproduces its Q after the roundtrip.
  const auto ctx = desk();
  const auto init = init_from_ssfm(ctx.fiber, 1, 12, 256);
  save_checkpoint(init, path);
  const auto ex = simulate_block(ctx, 2.0, 1, "ckpt", 0, 0);
  CHECK(model_q(load_checkpoint(path), ex) == model_q(init, ex));
  fs::remove(path);
}

TEST_CASE("malformed checkpoints are rejected") {
  const auto model = random_model(2, 3, 64, 1);
  const std::string text = checkpoint_json(model).dump(1);
  const auto path = temp_file("ldbp_truncated.json");
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(temp_file("ldbp_does_not_exist.json")), FormatError);

  auto j = checkpoint_json(model);
  j["version"] = 99;
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  j = checkpoint_json(model);
  j.erase("mf");
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  j = checkpoint_json(model);
  j["layers"][0]["alpha"] = "x";
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  j = checkpoint_json(model);
  j["K"][1] = 7;
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  j = checkpoint_json(model);
  j["n"] = 100;
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  j = checkpoint_json(model);
  j["M"] = 3;
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::array()), FormatError);
}

}  // TEST_SUITE
