#pragma once

#include <vector>

#include "ldbp/model.hpp"

namespace ldbp {

// Activations recorded by one forward pass; enough to run the adjoint
// sweep without recomputation.  Memory is (3 * layers + 1) * n samples.
struct Tape {
  struct Layer {
    CVec input;           // into w1
    CVec pre_activation;  // w1 output
    CVec activation;      // rho output, into w2
  };
  std::vector<Layer> layers;
  CVec mf_input;
  SymbolBlock output;  // decimated MF output, before phase rotation

  std::size_t stored_samples() const;
};

// Same arithmetic as forward(); the output is bit-identical.
Tape forward_with_tape(const LdbpModel& model, const ComplexSignal& y);

// How the data-aided phase rotation enters the loss.
enum class RotationMode {
  differentiated,  // rotation angle is a function of the output; adjoint included
  stop_gradient,   // rotation applied, angle treated as a constant
  none,            // no rotation: plain ||x - x_hat||^2
};

struct LossValue {
  double loss = 0.0;   // sum_i |x_i - out_i|^2
  SymbolBlock output;  // after rotation (if any)
  cplx correlation{};  // sum conj(x_hat_i) x_i
};

LossValue evaluate_loss(const SymbolBlock& x_hat, const SymbolBlock& x, RotationMode mode);

// Real-pair gradients: each complex entry holds dL/dRe + i dL/dIm of the
// matching complex parameter.
struct Gradients {
  struct Layer {
    CVec w1;
    cplx alpha{};
    CVec w2;
  };
  std::vector<Layer> layers;
  CVec mf;

  static Gradients zeros_like(const LdbpModel& model);
  void add(const Gradients& other);
  void scale(double s);
  double norm() const;
  bool all_finite() const;
};

// Adjoint sweep for loss_adjoint * L(x, rotate(x_hat)).  Throws
// NumericError naming the layer if any adjoint turns non-finite.
Gradients backward(const LdbpModel& model, const Tape& tape, const SymbolBlock& x,
                   double loss_adjoint, RotationMode mode = RotationMode::differentiated);

// Flattened real views, ordered layer by layer (w1 re/im..., alpha re/im,
// w2 re/im...), then the MF taps.
std::vector<double> flatten_parameters(const LdbpModel& model);
void assign_parameters(LdbpModel& model, std::span<const double> values);
std::vector<double> flatten_gradients(const Gradients& grads);
// Mask of trainable entries (false for MF taps when frozen).
std::vector<bool> trainable_mask(const LdbpModel& model, bool freeze_mf);

}  // namespace ldbp
