#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fcs/kernels.hpp"
#include "fcs/tensor.hpp"

namespace fcs {

/// A trainable (or frozen) tensor plus its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value, bool trainable = true);

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  std::uint64_t id = 0;

  void zero_grad();
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t index = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Records a computation as it executes and replays it backwards.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// valid topological order for the backward sweep. Every `param()` call makes
/// a fresh leaf; gradients from all leaves of the same Parameter are summed
/// into Parameter::grad.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Frozen parameters (trainable == false) enter as constants.
  Var param(Parameter& p);

  /// Appends an op node. `inputs` lists the node indices the op reads.
  Var record(Tensor value, std::vector<std::size_t> inputs, Backward backward);

  const Tensor& value(std::size_t i) const { return nodes_[i].value; }
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }
  /// Gradient slot of node `i`, allocated (zeroed) on first access.
  Tensor& grad(std::size_t i);
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates into every reachable Parameter.
  /// The loss must hold exactly one element.
  void backward(Var loss);

  /// Hash of every non-smooth branch taken so far (ReLU activation masks).
  /// Two evaluations with equal signatures lie on the same smooth piece.
  std::uint64_t branch_signature() const { return branches_; }
  void mix_branch(std::uint64_t bits);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::uint64_t branches_ = 0xcbf29ce484222325ull;
};

// Differentiable operations. Bias arguments may be null Vars (tape == nullptr).

Var conv2d(Var x, Var w, Var b, ConvParams p);
Var deconv2d(Var x, Var w, Var b, ConvParams p);
Var relu(Var x);
Var add(Var a, Var b);
/// x + conv3x3(relu(conv3x3(x, w1, b1)), w2, b2), pad 1, stride 1.
Var residual_block(Var x, Var w1, Var b1, Var w2, Var b2);
/// Mean over all elements of (pred - target)^2, as a 1×1×1×1 tensor.
Var mse_loss(Var pred, Var target);
/// Treats x as rows of length n (x: R×n×1×1) and returns R×m×1×1 rows of x·Wᵀ, W: 1×1×m×n.
Var linear(Var x, Var w);
Var reshape(Var x, Shape shape);
/// Top-left height×width window of every plane.
Var crop(Var x, std::size_t height, std::size_t width);
/// N×1×H×W (H, W multiples of `block`) → (N·B)×1×block×block, blocks in raster order.
Var extract_blocks(Var x, std::size_t block);
/// Inverse of extract_blocks for an N×1×height×width image.
Var assemble_blocks(Var blocks, std::size_t n, std::size_t height, std::size_t width);

/// Drives `loss_of` with a fresh tape and returns the scalar loss; gradients
/// are accumulated into the parameters it reads.
double value_and_grad(const std::function<Var(Tape&)>& loss_of);

}  // namespace fcs
