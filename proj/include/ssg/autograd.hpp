#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "ssg/tensor.hpp"

namespace ssg {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t size() const { return value().size(); }
  bool needs_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of a forward computation.
///
/// Nodes are appended in evaluation order, so the node list is always a
/// topological order. A tape supports exactly one backward() call.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a copy of `value`; never receives gradient.
  Var constant(Tensor value);

  /// Leaf that reads `param` in place. When `track` is set and the tensor
  /// requires grad, backward() accumulates into param.grad(). The tensor
  /// must outlive the tape and stay unmodified until backward() returns.
  Var parameter(Tensor& param, bool track = true);

  /// Appends an interior node. `fn` is dropped when no parent needs grad.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);

  /// Reverse sweep from a single-element loss. Each node is visited once.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Upstream gradient of a node (empty if nothing flowed into it).
  const std::vector<double>& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Mutable gradient buffer of a node, zero-allocated on first use.
  std::vector<double>& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor* sink = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Operations. All shapes are explicit: there is no implicit broadcasting.
// Matrix operations take rank-2 tensors, or rank-1 tensors viewed as rows.

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// 1 - x, element-wise.
Var one_minus(Var a);

/// Adds a [1 x n] row to every row of a [T x n] matrix.
Var add_bias(Var x, Var bias);
/// Stacks a [1 x n] row T times into [T x n].
Var repeat_rows(Var row, std::size_t times);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var exp(Var x);
Var log(Var x);
/// Element-wise clamp; gradient is zero where the input was clamped.
Var clamp(Var x, double lo, double hi);

/// Concatenates along `axis` (0 = rows, 1 = columns). Rank-1 inputs
/// concatenate along their only axis.
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);

Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);

/// Sum of all elements as a single-element tensor.
Var sum(Var x);
/// Mean over rows: [T x n] -> [1 x n].
Var mean_rows(Var x);

/// Max-shifted softmax. axis 1 normalizes each row, axis 0 each column.
Var softmax(Var x, std::size_t axis);

/// Sum over rows of -log softmax(logits[t])[targets[t]]; rows whose target
/// equals `ignore_id` contribute nothing.
Var nll_from_logits(Var logits, std::span<const int> targets, int ignore_id);

/// Row-wise layer normalization with learned [1 x n] gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// Rows `ids` of a [V x d] table as [T x d]; gradient scatters back.
Var gather_rows(Var table, std::span<const int> ids);

/// Replaces entries above the diagonal with `fill` (gradient zero there).
Var causal_mask(Var scores, double fill = -1e30);

/// Valid 1-D convolution over time for each kernel width, ReLU, then max
/// over time per filter. `kernels[i]` is [w_i * d_in x n_filters_i] and
/// `biases[i]` is [1 x n_filters_i]; the width is kernels[i].rows() / d_in.
/// Returns [1 x sum n_filters_i].
Var conv1d_maxpool(Var seq, std::span<const Var> kernels, std::span<const Var> biases);

}  // namespace ssg
