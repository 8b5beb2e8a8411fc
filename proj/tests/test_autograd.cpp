#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "ldbp/autograd.hpp"
#include "ldbp/error.hpp"
#include "oracles.hpp"

using namespace ldbp;

namespace {

// Small model with generic complex parameters: the gradient gate.
// Phases stay O(1) so that central differences are well conditioned.
LdbpModel small_model(std::uint64_t seed) {
  LdbpModel model;
  model.m = 16;
  model.decimation = 2;
  model.n = 32;
  model.steps_per_span = 2;
  model.span_count = 1;
  for (std::uint64_t i = 0; i < 2; ++i) {
    auto a = oracle::random_cvec(3, seed + 10 * i, 0.4);
    auto b = oracle::random_cvec(3, seed + 10 * i + 1, 0.4);
    a[0] += 1.0;
    b[0] += 1.0;
    const cplx r = oracle::random_cvec(1, seed + 10 * i + 2)[0];
    const cplx alpha{0.5 + 0.2 * r.real(), 0.1 * r.imag()};
    model.layers.push_back({SymmetricFilter(a), alpha, SymmetricFilter(b)});
  }
  auto mf = oracle::random_cvec(4, seed + 50, 0.3);
  mf[0] += 1.0;
  model.mf_filter = SymmetricFilter(mf);
  return model;
}

double loss_of(const LdbpModel& model, const ComplexSignal& y, const SymbolBlock& x,
               RotationMode mode) {
  return evaluate_loss(forward(model, y), x, mode).loss;
}

// Parameter kinds in flattened order, for per-kind error reporting.
enum Kind { w1, alpha, w2, mf };

std::vector<Kind> kinds(const LdbpModel& model) {
  std::vector<Kind> k;
  for (const auto& l : model.layers) {
    k.insert(k.end(), 2 * l.w1.half_taps().size(), w1);
    k.insert(k.end(), 2, alpha);
    k.insert(k.end(), 2 * l.w2.half_taps().size(), w2);
  }
  k.insert(k.end(), 2 * model.mf_filter.half_taps().size(), mf);
  return k;
}

// Dense matrix of a symmetric filter whose only nonzero half tap is d.
oracle::Matrix tap_matrix(std::size_t d, std::size_t K, std::size_t n) {
  CVec h(K + 1);
  h[d] = 1.0;
  return oracle::circulant(SymmetricFilter(h), n);
}

oracle::Matrix identity(std::size_t n) {
  oracle::Matrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("tape forward matches plain forward") {
  const auto model = small_model(1);
  const ComplexSignal y(oracle::random_cvec(32, 2, 0.7), 1.0);
  const Tape t1 = forward_with_tape(model, y);
  const Tape t2 = forward_with_tape(model, y);
  CHECK(t1.output == forward(model, y));
  CHECK(t2.output == t1.output);
  CHECK(t2.mf_input == t1.mf_input);
  CHECK(t1.stored_samples() == (3 * model.layers.size() + 1) * model.n + model.m);

  auto deeper = model;
  deeper.layers.insert(deeper.layers.end(), model.layers.begin(), model.layers.end());
  CHECK(forward_with_tape(deeper, y).stored_samples() ==
        (3 * deeper.layers.size() + 1) * deeper.n + deeper.m);
}

TEST_CASE("zero loss adjoint gives zero gradients") {
  const auto model = small_model(3);
  const ComplexSignal y(oracle::random_cvec(32, 4, 0.7), 1.0);
  const SymbolBlock x{oracle::random_cvec(16, 5)};
  const auto g = backward(model, forward_with_tape(model, y), x, 0.0);
  for (double v : flatten_gradients(g)) CHECK(v == 0.0);
}

TEST_CASE("finite-difference gate") {
  const double h = 1e-6;
  for (auto mode : {RotationMode::differentiated, RotationMode::stop_gradient, RotationMode::none}) {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      const auto model = small_model(seed);
      const ComplexSignal y(oracle::random_cvec(32, seed + 100, 0.5), 1.0);
      const SymbolBlock x{oracle::random_cvec(16, seed + 200)};
      const auto analytic = flatten_gradients(backward(model, forward_with_tape(model, y), x, 1.0, mode));
      const auto p0 = flatten_parameters(model);
      const auto kind = kinds(model);
      REQUIRE(analytic.size() == p0.size());
      double num[4] = {}, den[4] = {};
      for (std::size_t i = 0; i < p0.size(); ++i) {
        auto plus = p0, minus = p0;
        plus[i] += h;
        minus[i] -= h;
        LdbpModel mp = model, mm = model;
        assign_parameters(mp, plus);
        assign_parameters(mm, minus);
        const double fd = (loss_of(mp, y, x, mode) - loss_of(mm, y, x, mode)) / (2.0 * h);
        num[kind[i]] += (fd - analytic[i]) * (fd - analytic[i]);
        den[kind[i]] += fd * fd;
      }
      for (int k = 0; k < 4; ++k) {
        CAPTURE(k);
        CAPTURE(static_cast<int>(mode));
        REQUIRE(den[k] > 0.0);
        CHECK(std::sqrt(num[k] / den[k]) < 1e-6);
      }
    }
  }
}

TEST_CASE("rotation modes") {
  const auto model = small_model(21);
  const ComplexSignal y(oracle::random_cvec(32, 22, 0.7), 1.0);
  const SymbolBlock x{oracle::random_cvec(16, 23)};
  const Tape tape = forward_with_tape(model, y);
  const auto gd = flatten_gradients(backward(model, tape, x, 1.0, RotationMode::differentiated));
  const auto gs = flatten_gradients(backward(model, tape, x, 1.0, RotationMode::stop_gradient));
  const auto gn = flatten_gradients(backward(model, tape, x, 1.0, RotationMode::none));
  // The angle is a stationary point of the loss, so its adjoint term
  // vanishes and the two rotating modes agree.
  double diff = 0.0, ref = 0.0, other = 0.0;
  for (std::size_t i = 0; i < gd.size(); ++i) {
    diff += (gd[i] - gs[i]) * (gd[i] - gs[i]);
    other += (gd[i] - gn[i]) * (gd[i] - gn[i]);
    ref += gd[i] * gd[i];
  }
  CHECK(std::sqrt(diff / ref) < 1e-10);
  CHECK(std::sqrt(other / ref) > 1e-3);

  const auto lr = evaluate_loss(tape.output, x, RotationMode::differentiated);
  const auto ln = evaluate_loss(tape.output, x, RotationMode::none);
  CHECK(lr.loss <= ln.loss);
  CHECK(lr.output == phase_offset_rotate(tape.output, x).block);
  CHECK(ln.output == tape.output);
}

TEST_CASE("linear model: closed-form least-squares gradient") {
  auto model = small_model(31);
  for (auto& l : model.layers) l.alpha = 0.0;
  const std::size_t n = model.n, m = model.m;
  const ComplexSignal y(oracle::random_cvec(n, 32), 1.0);
  const SymbolBlock x{oracle::random_cvec(m, 33)};
  const auto g = backward(model, forward_with_tape(model, y), x, 1.0, RotationMode::none);

  // x_hat = S C_mf C_{w2,1} C_{w1,1} C_{w2,0} C_{w1,0} y with dense matrices.
  std::vector<oracle::Matrix> chain;
  for (const auto& l : model.layers) {
    chain.push_back(oracle::circulant(l.w1, n));
    chain.push_back(oracle::circulant(l.w2, n));
  }
  const auto S = oracle::decimator(m, model.decimation);
  const auto Cmf = oracle::circulant(model.mf_filter, n);
  auto product = [&](std::size_t from, std::size_t to) {
    oracle::Matrix p = identity(n);
    for (std::size_t i = from; i < to; ++i) p = chain[i] * p;
    return p;
  };
  const CVec x_hat = S * (Cmf * (product(0, chain.size()) * y.samples()));
  CHECK(oracle::rel_err(x_hat, forward(model, y).symbols) < 1e-12);
  CVec r(m);
  for (std::size_t k = 0; k < m; ++k) r[k] = x[k] - x_hat[k];

  // dL/dRe h + i dL/dIm h = -2 conj(r^H dx_hat/dh).
  auto expected = [&](const CVec& dxh) {
    cplx z{};
    for (std::size_t k = 0; k < m; ++k) z += std::conj(r[k]) * dxh[k];
    return -2.0 * std::conj(z);
  };
  auto check = [](cplx got, cplx want) {
    CHECK(std::abs(got - want) <= 1e-10 * std::max(1.0, std::abs(want)));
  };
  for (std::size_t f = 0; f < chain.size(); ++f) {
    const auto& taps = f % 2 == 0 ? g.layers[f / 2].w1 : g.layers[f / 2].w2;
    const std::size_t K = taps.size() - 1;
    for (std::size_t d = 0; d <= K; ++d) {
      const CVec dxh =
          S * (Cmf * (product(f + 1, chain.size()) * (tap_matrix(d, K, n) * (product(0, f) * y.samples()))));
      check(taps[d], expected(dxh));
    }
  }
  const std::size_t Kmf = model.mf_filter.memory();
  for (std::size_t d = 0; d <= Kmf; ++d) {
    const CVec dxh = S * (tap_matrix(d, Kmf, n) * (product(0, chain.size()) * y.samples()));
    check(g.mf[d], expected(dxh));
  }
}

TEST_CASE("non-finite adjoints are reported") {
  const auto model = small_model(41);
  const ComplexSignal y(oracle::random_cvec(32, 42), 1.0);
  SymbolBlock x{oracle::random_cvec(16, 43)};
  x.symbols[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(backward(model, forward_with_tape(model, y), x, 1.0, RotationMode::none),
                  NumericError);

  auto hot = small_model(41);
  hot.layers[0].alpha = cplx{0.0, 1e3};  // exp(Im(alpha) |x|^2) overflows
  CVec big = oracle::random_cvec(32, 44, 10.0);
  const auto tape = forward_with_tape(hot, ComplexSignal(big, 1.0));
  CHECK_THROWS_AS(backward(hot, tape, SymbolBlock{oracle::random_cvec(16, 45)}, 1.0,
                           RotationMode::none),
                  NumericError);
  CHECK_THROWS_AS(backward(model, forward_with_tape(model, y), SymbolBlock{CVec(8)}, 1.0),
                  SizeError);
}

TEST_CASE("parameter flattening") {
  auto model = small_model(51);
  const auto p = flatten_parameters(model);
  CHECK(p.size() == 2 * model.complex_parameter_count());
  CHECK(p[0] == model.layers[0].w1.half_taps()[0].real());
  CHECK(p[1] == model.layers[0].w1.half_taps()[0].imag());
  CHECK(p[6] == model.layers[0].alpha.real());
  CHECK(p[7] == model.layers[0].alpha.imag());
  auto copy = model;
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<double>(i);
  assign_parameters(copy, q);
  CHECK(flatten_parameters(copy) == q);
  assign_parameters(copy, p);
  CHECK(copy == model);
  CHECK_THROWS_AS(assign_parameters(copy, std::vector<double>(3)), SizeError);

  const auto mask = trainable_mask(model, true);
  const std::size_t mf = 2 * model.mf_filter.half_taps().size();
  for (std::size_t i = 0; i < mask.size(); ++i) CHECK(mask[i] == (i + mf < mask.size()));
}

}  // TEST_SUITE
