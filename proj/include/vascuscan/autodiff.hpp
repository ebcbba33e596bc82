#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vascuscan/tensor.hpp"

namespace vascuscan::ad {

enum class Mode { Train, Eval };

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape;

/// Receives the gradient flowing into a node's output and pushes gradients
/// to its inputs via Tape::accumulate.
using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

/// Reverse-mode differentiation record. Operations append nodes in forward
/// order; backward() replays them in exact reverse order. A tape belongs to
/// one thread at a time.
class Tape {
 public:
  Var constant(Tensor value);
  /// A leaf whose gradient is tracked.
  Var parameter(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  /// Accumulated gradient; a zero tensor of matching shape if nothing flowed.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one value.
  void backward(Var loss);

  /// Records an op result. Values are checked for finiteness; `op` names the
  /// operation in error messages. The backward hook only runs when some
  /// input requires a gradient.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward backward);

  /// Adds g into the gradient of v (no-op for constants).
  void accumulate(Var v, const Tensor& g);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    const char* op = "leaf";
    Backward backward;
  };
  std::vector<Node> nodes_;
};

/// Running statistics of a batch-norm layer. Eval mode reads `mean` and
/// `variance` unless `batch_stats_in_eval` is set, in which case it
/// normalises by the statistics of its own input like train mode does (but
/// leaves the running statistics alone). Train mode writes the `update_*`
/// targets when set.
struct BatchNormStats {
  const Tensor* mean = nullptr;      ///< [1 x K]
  const Tensor* variance = nullptr;  ///< [1 x K]
  Tensor* update_mean = nullptr;
  Tensor* update_variance = nullptr;
  bool batch_stats_in_eval = false;
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEpsilon = 1e-5;

Var matmul(Tape& t, Var a, Var b);
/// x[N x K] + bias[1 x K] broadcast over rows.
Var add_row(Tape& t, Var x, Var bias);
Var relu(Tape& t, Var x);
/// Per-column standardisation of x[N x K] over the N rows (train) or by the
/// running statistics (eval), then gamma * xhat + beta. Batch statistics use an
/// order-independent summation, so the output is exactly equivariant under
/// row permutation. With batch statistics N must be at least 2. Train mode
/// updates the running statistics with momentum 0.9 (unbiased variance).
Var batch_norm_points(Tape& t, Var x, Var gamma, Var beta, BatchNormStats stats, Mode mode);
/// [N x K] -> [1 x K] column maxima; gradient goes to the first arg-max row.
Var max_pool_points(Tape& t, Var x);
Var log_softmax(Tape& t, Var logits);
/// Mean negative log-likelihood of targets under row log-probabilities.
Var nll(Tape& t, Var log_probs, std::span<const int> targets);
/// Fused log-softmax + NLL; same value as nll(log_softmax(x)).
Var log_softmax_nll(Tape& t, Var logits, std::span<const int> targets);
Var reshape(Tape& t, Var x, std::vector<std::size_t> shape);
/// ||A A^T - I||_F^2 for square A.
Var orthogonality_penalty(Tape& t, Var a);
/// a + scale * b for single-value tensors.
Var add_scaled(Tape& t, Var a, Var b, double scale);

}  // namespace vascuscan::ad
