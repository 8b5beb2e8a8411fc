#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ldbp/channel.hpp"
#include "ldbp/dbp.hpp"
#include "ldbp/error.hpp"
#include "ldbp/link.hpp"
#include "oracles.hpp"

using namespace ldbp;

namespace {

// Gaussian pulse of the given peak power and 1/e half-width, centred in
// the block.
ComplexSignal gaussian_pulse(std::size_t n, double rate, double peak_w, double width_s) {
  CVec x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - 0.5 * static_cast<double>(n)) / rate;
    x[i] = std::sqrt(peak_w) * std::exp(-0.5 * t * t / (width_s * width_s));
  }
  return ComplexSignal(x, rate);
}

double norm_diff(const ComplexSignal& a, const ComplexSignal& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

LinkContext desk_link(int forward_steps) {
  LinkContext ctx;
  ctx.fiber = standard_smf(100.0, 4);
  ctx.forward_steps_per_span = forward_steps;
  return ctx;
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("nonlinear phase step") {
  const auto x = ComplexSignal(oracle::random_cvec(64, 1, 0.1), 1e9);
  CHECK(nonlinear_phase_step(x, 0.0, 1e4, 1) == x);
  const auto y = nonlinear_phase_step(x, 1.3e-3, 2e4, 1);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(std::abs(y[i]) - std::abs(x[i])) < 1e-15);

  const double A = 0.3;
  const ComplexSignal c(CVec(16, cplx{A, 0.0}), 1e9);
  for (int sign : {1, -1}) {
    const auto r = nonlinear_phase_step(c, 1.3e-3, 5e4, sign);
    const cplx expect = A * std::exp(cplx{0.0, sign * 1.3e-3 * 5e4 * A * A});
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(r[i] - expect) < 1e-15);
  }
}

TEST_CASE("effective lengths") {
  CHECK(midpoint_effective_length(0.0, 1e3) == 1e3);
  CHECK(effective_length(0.0, 1e3) == 1e3);
  const double a = 0.2 / 4.342944819032518 / 1e3, dz = 2e4;
  CHECK(std::abs(effective_length(a, dz) - (1.0 - std::exp(-a * dz)) / a) < 1e-9);
  CHECK(std::abs(midpoint_effective_length(a, dz) - std::exp(a * dz / 2) * effective_length(a, dz)) <
        1e-9);
  // Small-loss branch is continuous with the closed form.
  CHECK(std::abs(midpoint_effective_length(1e-13, 1e4) - 2.0 * std::sinh(0.5e-9) / 1e-13) < 1e-9);
}

TEST_CASE("step schedules") {
  const auto p = standard_smf(100.0, 1);
  for (int M : {1, 2, 3, 7, 50}) {
    for (auto kind : {ScheduleKind::uniform, ScheduleKind::logarithmic}) {
      const auto s = step_schedule(p.span_length, M, StepSchedule{kind, 1.0}, p.alpha);
      REQUIRE(s.size() == static_cast<std::size_t>(M));
      double sum = 0.0;
      for (double d : s) {
        CHECK(d > 0.0);
        sum += d;
      }
      CHECK(sum == p.span_length);
    }
    if (M < 2) continue;
    const auto lg = step_schedule(p.span_length, M, StepSchedule{ScheduleKind::logarithmic, 1.0}, p.alpha);
    CHECK(lg.front() < p.span_length / M);
    for (std::size_t i = 1; i < lg.size(); ++i) CHECK(lg[i] > lg[i - 1]);
    // Equal effective-length slices at factor 1.
    double z = 0.0;
    const double slice = effective_length(p.alpha, p.span_length) / M;
    for (double d : lg) {
      CHECK(std::abs(std::exp(-p.alpha * z) * effective_length(p.alpha, d) - slice) < 1e-6 * slice);
      z += d;
    }
  }
  // Lossless fiber: logarithmic degenerates to uniform.
  const auto u = step_schedule(1e5, 4, StepSchedule{ScheduleKind::logarithmic, 1.0}, 0.0);
  for (double d : u) CHECK(d == 25e3);
  CHECK_THROWS_AS(step_schedule(1e5, 0, StepSchedule{}, 0.0), ConfigError);
  CHECK_THROWS_AS(step_schedule(1e5, 2, StepSchedule{ScheduleKind::logarithmic, 0.0}, 1e-5),
                  ConfigError);
  CHECK(schedule_kind_from_string("logarithmic") == ScheduleKind::logarithmic);
  CHECK_THROWS_AS(schedule_kind_from_string("geometric"), ConfigError);
}

TEST_CASE("split-step span: linear and nonlinear limits") {
  const double rate = 160e9;
  const auto x = gaussian_pulse(1024, rate, 0.05, 30e-12);
  FiberParams lin = standard_smf(80.0, 1);
  lin.gamma = 0.0;
  const auto ref = apply_dispersion(
      x, build_dispersion_operator(lin, lin.span_length, Direction::forward, x.size(), rate));
  for (int M : {1, 3, 10}) {
    CHECK(oracle::rel_err(ssfm_span_forward(x, lin, M).samples(), ref.samples()) < 1e-10);
    CHECK(oracle::rel_err(
              ssfm_span_forward(x, lin, M, StepSchedule{ScheduleKind::logarithmic, 1.0}).samples(),
              ref.samples()) < 1e-10);
  }

  FiberParams nl;
  nl.gamma = 1.3e-3;
  nl.span_length = 8e4;
  const auto phase = nonlinear_phase_step(x, nl.gamma, nl.span_length, 1);
  for (int M : {1, 4, 25})
    CHECK(oracle::rel_err(ssfm_span_forward(x, nl, M).samples(), phase.samples()) < 1e-10);
}

TEST_CASE("split-step span: lossless energy conservation") {
  FiberParams p = standard_smf(100.0, 1);
  p.alpha = 0.0;
  const auto x = gaussian_pulse(2048, 160e9, 0.1, 20e-12);
  for (int M : {1, 5, 50}) {
    const auto y = ssfm_span_forward(x, p, M);
    CHECK(std::abs(y.energy() - x.energy()) / x.energy() < 1e-10);
  }
}

TEST_CASE("split-step span: second-order convergence") {
  FiberParams p = standard_smf(100.0, 1);
  const auto x = gaussian_pulse(2048, 320e9, 0.02, 25e-12);
  for (int M : {8, 16}) {
    const auto a = ssfm_span_forward(x, p, M);
    const auto b = ssfm_span_forward(x, p, 2 * M);
    const auto c = ssfm_span_forward(x, p, 4 * M);
    const double ratio = norm_diff(a, b) / norm_diff(b, c);
    CAPTURE(M);
    CAPTURE(ratio);
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
  }
}

TEST_CASE("amplifier gain and ASE statistics") {
  FiberParams p;
  p.alpha = 20.0 / 4.342944819032518 / 1e5;  // 20 dB over 100 km
  p.span_length = 1e5;
  CHECK(std::abs(amp_gain_db(p) - 20.0) < 1e-12);
  const ComplexSignal x(oracle::random_cvec(256, 5, 1e-3), 160e9);
  AmpConfig quiet;
  quiet.noise_enabled = false;
  RngStream rng(1, "amp");
  const auto y = amplify(x, p, quiet, rng);
  CHECK(std::abs(y.energy() / x.energy() - 100.0) < 1e-10);

  AmpConfig loud;
  const double rate = 160e9;
  const double var = ase_variance_per_sample(p, loud, rate);
  CHECK(std::abs(var - 99.0 * kPlanck * kCarrierFrequency * std::pow(10.0, 0.45) / 2.0 * rate) <
        1e-12 * var);
  const std::size_t n = 1024;
  const ComplexSignal zero(CVec(n), rate);
  double added = 0.0;
  cplx mean{};
  for (int t = 0; t < 100; ++t) {
    RngStream r(7, "ase", static_cast<std::uint64_t>(t));
    const auto z = amplify(zero, p, loud, r);
    added += z.energy();
    for (const auto& v : z.samples()) mean += v;
  }
  added /= 100.0;
  CHECK(std::abs(added / (var * n) - 1.0) < 0.03);
  CHECK(std::abs(mean) / (100.0 * n) < 0.05 * std::sqrt(var));

  // Same stream, same noise.
  RngStream r1(3, "ase"), r2(3, "ase");
  CHECK(amplify(x, p, loud, r1) == amplify(x, p, loud, r2));
}

TEST_CASE("transparent linear link") {
  FiberParams p = standard_smf(100.0, 1);
  p.gamma = 0.0;
  const double rate = 160e9;
  const auto x = gaussian_pulse(1024, rate, 1e-3, 40e-12);
  AmpConfig quiet;
  quiet.noise_enabled = false;
  RngStream rng(1, "link");
  const auto y = propagate_link(x, p, quiet, 50, rng);
  CHECK(std::abs(y.energy() - x.energy()) / x.energy() < 1e-9);
  const auto back = apply_dispersion(
      y, build_dispersion_operator(p, p.span_length, Direction::backward, x.size(), rate));
  // The backward operator also undoes the loss, leaving the amplifier gain.
  CVec r = back.samples();
  for (auto& v : r) v /= p.span_amplitude_gain();
  CHECK(oracle::rel_err(r, x.samples()) < 1e-9);

  // Energy after every amplifier of a multi-span nonlinear link.
  FiberParams q = standard_smf(100.0, 1);
  ComplexSignal u = gaussian_pulse(1024, rate, 0.01, 40e-12);
  const double e0 = u.energy();
  for (int s = 0; s < 4; ++s) {
    RngStream r2(1, "span", static_cast<std::uint64_t>(s));
    u = propagate_link(u, q, quiet, 50, r2);
    CHECK(std::abs(u.energy() - e0) / e0 < 1e-9);
  }
}

TEST_CASE("receiver front end") {
  const double rate = 160e9;
  const std::size_t n = 1024;
  auto tone = [&](double f) {
    CVec x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = std::exp(cplx{0.0, 2.0 * std::numbers::pi * f * static_cast<double>(i) / rate});
    return ComplexSignal(x, rate);
  };
  RxFrontendConfig cfg;
  // 38 GHz lies outside the passband.
  const auto out = rx_frontend(tone(38.125e9), cfg);
  CHECK(out.size() == n / 4);
  CHECK(out.sample_rate() == 40e9);
  CHECK(out.energy() < 1e-20);

  // In-band content: only the resampler acts.
  const auto in = tone(10e9);
  const auto kept = rx_frontend(in, cfg);
  CHECK(oracle::rel_err(kept.samples(), resample(in, 40e9).samples()) < 1e-12);

  // Equal rates: exactly the bin mask.
  const ComplexSignal x(oracle::random_cvec(256, 3), 40e9);
  const auto masked = rx_frontend(x, cfg);
  CVec spec = oracle::naive_dft(x.samples());
  for (std::size_t k = 0; k < spec.size(); ++k)
    if (std::abs(bin_frequency(k, spec.size(), 40e9)) > 17.5e9) spec[k] = 0.0;
  CHECK(oracle::rel_err(masked.samples(), oracle::naive_dft(spec, true)) < 1e-12);

  RxFrontendConfig wide{0.0, 40e9, false};
  CHECK(rx_frontend(x, wide).samples() == x.samples());

  CHECK_THROWS_AS(rx_frontend(x, RxFrontendConfig{35e9, 80e9, true}), ConfigError);
  CHECK_THROWS_AS(rx_frontend(x, RxFrontendConfig{50e9, 40e9, true}), ConfigError);
  CHECK_THROWS_AS(rx_frontend(in, RxFrontendConfig{35e9, 48e9, true}), ConfigError);
}

TEST_CASE("simulated blocks are reproducible") {
  const auto ctx = desk_link(10);
  const auto a = simulate_block(ctx, 2.0, 9, "repro", 1, 2);
  const auto b = simulate_block(ctx, 2.0, 9, "repro", 1, 2);
  CHECK(a.y == b.y);
  CHECK(a.x == b.x);
  const auto c = simulate_block(ctx, 2.0, 9, "repro", 1, 3);
  CHECK(!(a.y == c.y));
  CHECK(a.y.size() == ctx.rx_block_length());
}

TEST_CASE("linear sanity floor: noiseless, lossless nonlinearity off") {
  LinkContext ctx = desk_link(10);
  ctx.fiber.gamma = 0.0;
  ctx.amp.noise_enabled = false;
  const auto ex = simulate_block(ctx, 0.0, 1, "floor", 0, 0);
  const auto eq = cdc_equalize(ex.y, ctx.fiber);
  const auto r = matched_filter(eq, ctx.shape, ctx.symbols_per_block);
  CHECK(q_factor_db(ex.x, phase_offset_rotate(r, ex.x).block) >= 60.0);
}

TEST_CASE("forward resolution is sufficient") {
  DbpConfig dbp;
  dbp.steps_per_span = 2;
  for (double p : {0.0, 4.0}) {
    double qa = 0.0, qb = 0.0;
    for (std::uint64_t b = 0; b < 2; ++b) {
      const auto a = simulate_block(desk_link(50), p, 4, "res", 0, b);
      const auto c = simulate_block(desk_link(100), p, 4, "res", 0, b);
      auto q = [&](const Example& ex) {
        const auto r = matched_filter(dbp_equalize(ex.y, desk_link(50).fiber, dbp), PulseShape{}, 256);
        return q_factor_db(ex.x, phase_offset_rotate(r, ex.x).block);
      };
      qa += q(a);
      qb += q(c);
    }
    CAPTURE(p);
    CHECK(std::abs(qa - qb) / 2.0 < 0.05);
  }
}

}  // TEST_SUITE
