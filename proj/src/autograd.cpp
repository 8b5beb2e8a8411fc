#include "ldbp/autograd.hpp"

#include <cmath>
#include <string>

#include "ldbp/error.hpp"
#include "network.hpp"

namespace ldbp {

std::size_t Tape::stored_samples() const {
  std::size_t s = mf_input.size() + output.size();
  for (const auto& l : layers) s += l.input.size() + l.pre_activation.size() + l.activation.size();
  return s;
}

Tape forward_with_tape(const LdbpModel& model, const ComplexSignal& y) {
  Tape tape;
  detail::run_network(model, y, &tape);
  return tape;
}

LossValue evaluate_loss(const SymbolBlock& x_hat, const SymbolBlock& x, RotationMode mode) {
  if (x_hat.size() != x.size()) throw SizeError("loss: length mismatch");
  LossValue out;
  for (std::size_t i = 0; i < x.size(); ++i) out.correlation += std::conj(x_hat[i]) * x[i];
  if (mode == RotationMode::none) {
    out.output = x_hat;
  } else {
    out.output = phase_offset_rotate(x_hat, x).block;
  }
  out.loss = mse(x, out.output);
  return out;
}

// ---------------------------------------------------------------------------

Gradients Gradients::zeros_like(const LdbpModel& model) {
  Gradients g;
  g.layers.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    g.layers[i].w1.assign(model.layers[i].w1.half_taps().size(), cplx{});
    g.layers[i].w2.assign(model.layers[i].w2.half_taps().size(), cplx{});
  }
  g.mf.assign(model.mf_filter.half_taps().size(), cplx{});
  return g;
}

void Gradients::add(const Gradients& o) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t d = 0; d < layers[i].w1.size(); ++d) layers[i].w1[d] += o.layers[i].w1[d];
    for (std::size_t d = 0; d < layers[i].w2.size(); ++d) layers[i].w2[d] += o.layers[i].w2[d];
    layers[i].alpha += o.layers[i].alpha;
  }
  for (std::size_t d = 0; d < mf.size(); ++d) mf[d] += o.mf[d];
}

void Gradients::scale(double s) {
  for (auto& l : layers) {
    for (auto& v : l.w1) v *= s;
    for (auto& v : l.w2) v *= s;
    l.alpha *= s;
  }
  for (auto& v : mf) v *= s;
}

double Gradients::norm() const {
  double s = 0.0;
  for (double v : flatten_gradients(*this)) s += v * v;
  return std::sqrt(s);
}

bool Gradients::all_finite() const {
  for (double v : flatten_gradients(*this))
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------

namespace {

bool finite(std::span<const cplx> v) {
  for (const auto& x : v)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

// y = h * x (circular, symmetric h).  Accumulates tap adjoints into g_taps
// and writes the input adjoint to g_in.
void conv_backward(std::span<const cplx> x, const SymmetricFilter& h, std::span<const cplx> g_out,
                   CVec& g_taps, CVec& g_in) {
  const std::size_t n = x.size();
  const std::size_t K = h.memory();
  for (std::size_t i = 0; i < n; ++i) g_taps[0] += g_out[i] * std::conj(x[i]);
  for (std::size_t d = 1; d <= K; ++d) {
    cplx acc{};
    for (std::size_t i = 0; i < n; ++i)
      acc += g_out[i] * std::conj(x[(i + n - d) % n] + x[(i + d) % n]);
    g_taps[d] += acc;
  }
  CVec conj_taps = h.half_taps();
  for (auto& t : conj_taps) t = std::conj(t);
  g_in.resize(n);
  circular_convolve(g_out, SymmetricFilter(std::move(conj_taps)), g_in);
}

}  // namespace

Gradients backward(const LdbpModel& model, const Tape& tape, const SymbolBlock& x,
                   double loss_adjoint, RotationMode mode) {
  Gradients grads = Gradients::zeros_like(model);
  const SymbolBlock& x_hat = tape.output;
  const std::size_t m = x_hat.size();
  if (x.size() != m) throw SizeError("backward: reference length mismatch");
  if (tape.layers.size() != model.layers.size()) throw SizeError("backward: tape/model mismatch");

  const LossValue lv = evaluate_loss(x_hat, x, mode);
  const cplx c = lv.correlation;
  const bool rotated = mode != RotationMode::none && std::abs(c) > 0.0;

  // Adjoint of the rotated output, then of the raw network output.
  CVec g_out(m);
  for (std::size_t i = 0; i < m; ++i) g_out[i] = 2.0 * loss_adjoint * (lv.output[i] - x[i]);
  CVec g_xhat(m);
  if (!rotated) {
    g_xhat = g_out;
  } else {
    const cplx e = c / std::abs(c);
    for (std::size_t i = 0; i < m; ++i) g_xhat[i] = std::conj(e) * g_out[i];
    if (mode == RotationMode::differentiated) {
      // The angle arg(c) moves with x_hat through c = sum conj(x_hat) x.
      cplx s{};
      for (std::size_t i = 0; i < m; ++i) s += std::conj(g_out[i]) * x_hat[i];
      const double k = (s * e).imag();
      for (std::size_t i = 0; i < m; ++i) g_xhat[i] += cplx{0.0, k} * x[i] / c;
    }
  }
  if (!finite(g_xhat)) throw NumericError("non-finite adjoint at the loss");

  // Matched filter + decimation.
  const std::size_t n = tape.mf_input.size();
  const std::size_t D = model.decimation;
  const auto& r = tape.mf_input;
  const auto& h = model.mf_filter.half_taps();
  const std::size_t Kmf = model.mf_filter.memory();
  CVec g(n, cplx{});
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t c0 = k * D;
    const cplx gk = g_xhat[k];
    grads.mf[0] += gk * std::conj(r[c0]);
    g[c0] += std::conj(h[0]) * gk;
    for (std::size_t d = 1; d <= Kmf; ++d) {
      const std::size_t lo = (c0 + n - d) % n;
      const std::size_t hi = (c0 + d) % n;
      grads.mf[d] += gk * std::conj(r[lo] + r[hi]);
      const cplx t = std::conj(h[d]) * gk;
      g[lo] += t;
      g[hi] += t;
    }
  }
  if (!finite(g)) throw NumericError("non-finite adjoint at the matched filter");

  CVec g_in;
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const LdbpLayer& layer = model.layers[li];
    const Tape::Layer& rec = tape.layers[li];
    Gradients::Layer& gl = grads.layers[li];

    conv_backward(rec.activation, layer.w2, g, gl.w2, g_in);  // g_in: adjoint of rho output

    const cplx a = layer.alpha;
    cplx g_alpha{};
    for (std::size_t i = 0; i < n; ++i) {
      const cplx u = rec.pre_activation[i];
      const cplx v = rec.activation[i];
      const cplx gv = g_in[i];
      const double p = std::norm(u);
      const cplx e = std::exp(cplx{0.0, -1.0} * a * p);
      const cplx f_u = e * (1.0 - cplx{0.0, 1.0} * a * p);
      const cplx f_ubar = cplx{0.0, -1.0} * a * u * u * e;
      g_alpha += cplx{0.0, p} * std::conj(v) * gv;
      g[i] = std::conj(f_u) * gv + f_ubar * std::conj(gv);
    }
    gl.alpha += g_alpha;

    conv_backward(rec.input, layer.w1, g, gl.w1, g_in);
    g.swap(g_in);
    if (!finite(g) || !finite(gl.w1) || !finite(gl.w2) || !std::isfinite(std::abs(gl.alpha)))
      throw NumericError("non-finite adjoint in layer " + std::to_string(li));
  }
  return grads;
}

// ---------------------------------------------------------------------------

namespace {

void push(std::vector<double>& out, const CVec& v) {
  for (const auto& c : v) {
    out.push_back(c.real());
    out.push_back(c.imag());
  }
}

void pull(CVec& v, std::span<const double> in, std::size_t& pos) {
  for (auto& c : v) {
    c = {in[pos], in[pos + 1]};
    pos += 2;
  }
}

}  // namespace

std::vector<double> flatten_parameters(const LdbpModel& model) {
  std::vector<double> out;
  out.reserve(2 * model.complex_parameter_count());
  for (const auto& l : model.layers) {
    push(out, l.w1.half_taps());
    out.push_back(l.alpha.real());
    out.push_back(l.alpha.imag());
    push(out, l.w2.half_taps());
  }
  push(out, model.mf_filter.half_taps());
  return out;
}

void assign_parameters(LdbpModel& model, std::span<const double> values) {
  if (values.size() != 2 * model.complex_parameter_count())
    throw SizeError("parameter vector does not match the model");
  std::size_t pos = 0;
  for (auto& l : model.layers) {
    pull(l.w1.mutable_half_taps(), values, pos);
    l.alpha = {values[pos], values[pos + 1]};
    pos += 2;
    pull(l.w2.mutable_half_taps(), values, pos);
  }
  pull(model.mf_filter.mutable_half_taps(), values, pos);
}

std::vector<double> flatten_gradients(const Gradients& grads) {
  std::vector<double> out;
  for (const auto& l : grads.layers) {
    push(out, l.w1);
    out.push_back(l.alpha.real());
    out.push_back(l.alpha.imag());
    push(out, l.w2);
  }
  push(out, grads.mf);
  return out;
}

std::vector<bool> trainable_mask(const LdbpModel& model, bool freeze_mf) {
  std::vector<bool> mask(2 * model.complex_parameter_count(), true);
  if (freeze_mf) {
    const std::size_t mf = 2 * model.mf_filter.half_taps().size();
    std::fill(mask.end() - static_cast<std::ptrdiff_t>(mf), mask.end(), false);
  }
  return mask;
}

}  // namespace ldbp
