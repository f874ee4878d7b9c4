#pragma once

#include "fitvid/tensor.hpp"

#include <deque>
#include <functional>
#include <memory>
#include <vector>

namespace fitvid {

/// One tensor-valued value in a computation graph. Nodes are owned by the
/// Tape that created them; gradients are allocated lazily during backward.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::function<void()> backprop;

  bool has_grad() const { return grad.size() == value.size() && grad.size() > 0; }
  void ensure_grad() {
    if (!has_grad()) grad = Tensor(value.shape());
  }
  const Shape& shape() const { return value.shape(); }
};

/// Reverse-mode tape. Insertion order is a topological order by construction,
/// so backward is a single reverse sweep.
class Tape {
 public:
  Node* leaf(Tensor value, bool requires_grad) {
    Node* n = alloc();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
  }

  Node* constant(Tensor value) { return leaf(std::move(value), false); }

  /// New op node; requires_grad is inherited from parents.
  Node* make(Tensor value, const std::vector<Node*>& parents);

  /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. root must be scalar.
  void backward(Node* root);

  size_t size() const { return nodes_.size(); }

 private:
  Node* alloc() {
    nodes_.push_back(std::make_unique<Node>());
    return nodes_.back().get();
  }
  std::deque<std::unique_ptr<Node>> nodes_;
};

enum class NormMode { kTrain, kEval };

// ---- primitive ops ---------------------------------------------------------
// All ops append a node to the tape that owns their inputs; mixing tapes is
// the caller's bug and goes undetected, so don't.

Node* add(Tape& t, Node* a, Node* b);
Node* sub(Tape& t, Node* a, Node* b);
Node* mul(Tape& t, Node* a, Node* b);
Node* scale(Tape& t, Node* a, Scalar c);
Node* add_scalar(Tape& t, Node* a, Scalar c);
Node* add_rowvec(Tape& t, Node* x, Node* bias);  // bias broadcast over rows
Node* matmul(Tape& t, Node* a, Node* b);
Node* sigmoid(Tape& t, Node* a);
Node* tanh_op(Tape& t, Node* a);
Node* swish(Tape& t, Node* a);
Node* relu(Tape& t, Node* a);
Node* exp_op(Tape& t, Node* a);
Node* square(Tape& t, Node* a);
Node* sum_all(Tape& t, Node* a);  // -> shape {1}
Node* reshape(Tape& t, Node* a, Shape shape);
Node* slice_cols(Tape& t, Node* a, Index start, Index len);
Node* concat_cols(Tape& t, const std::vector<Node*>& parts);

/// 2-D convolution on NHWC input with (KH,KW,Cin,Cout) kernel, zero padding.
/// bias may be null. out = (H + 2*pad - KH) / stride + 1.
Node* conv2d(Tape& t, Node* x, Node* w, Node* b, Index stride, Index pad);

Node* upsample_nearest2(Tape& t, Node* x);                 // (N,H,W,C) -> (N,2H,2W,C)
Node* global_avg_pool(Tape& t, Node* x);                   // (N,H,W,C) -> (N,C)
Node* channel_gate(Tape& t, Node* x, Node* gate);          // x * gate per channel

/// Batch normalization over all axes but the last (channel) axis. In train
/// mode, batch statistics are used and optionally folded into the running
/// buffers (momentum 0.99 convention lives at the call site). In eval mode
/// the running buffers are used. Buffers are plain tensors outside the graph.
Node* batch_norm(Tape& t, Node* x, Node* gamma, Node* beta, NormMode mode,
                 Tensor* running_mean, Tensor* running_var, Scalar momentum,
                 Scalar eps, bool update_running);

/// Rows of x are (batch, time)-major: row index b*T + t.
Node* select_time(Tape& t, Node* x, Index B, Index T, Index step);
Node* stack_time(Tape& t, const std::vector<Node*>& steps);  // T x (B,...) -> (B*T,...)
Node* repeat_time(Tape& t, Node* x, Index T);                // (B,...) -> (B*T,...)

// ---- composites -------------------------------------------------------------

inline Node* dense(Tape& t, Node* x, Node* w, Node* b) {
  Node* y = matmul(t, x, w);
  return b ? add_rowvec(t, y, b) : y;
}

inline Node* mean_all(Tape& t, Node* a) {
  return scale(t, sum_all(t, a), 1.0 / static_cast<Scalar>(a->value.size()));
}

}  // namespace fitvid
