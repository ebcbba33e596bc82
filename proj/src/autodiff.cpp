#include "vascuscan/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "vascuscan/error.hpp"

namespace vascuscan::ad {

namespace {

Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

void require_same_cols(const Tensor& x, const Tensor& row, const char* op) {
  if (row.size() != x.cols() || row.rows() != 1) {
    throw ValidationError("shape_mismatch", std::string(op) + ": row vector " +
                                                shape_string(row.shape()) + " does not match " +
                                                shape_string(x.shape()));
  }
}

// Sum whose result depends only on the multiset of values. Every value is
// scaled by the same power of two (chosen from the largest magnitude so the
// total cannot overflow), truncated to a 64-bit integer and added exactly.
// Resolution is 2^-62 of the largest magnitude times the value count.
double order_free_sum(std::span<const double> values) {
  double biggest = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
    biggest = std::max(biggest, std::abs(v));
  }
  if (biggest == 0.0) return 0.0;
  int exponent = 0;
  std::frexp(biggest, &exponent);  // biggest < 2^exponent
  const int count_bits = static_cast<int>(std::bit_width(values.size()));
  const int shift = 62 - count_bits - exponent;
  std::int64_t total = 0;
  if (shift > -1000 && shift < 1000) {
    const double factor = std::ldexp(1.0, shift);
    for (double v : values) total += static_cast<std::int64_t>(v * factor);
  } else {
    for (double v : values) total += static_cast<std::int64_t>(std::ldexp(v, shift));
  }
  return std::ldexp(static_cast<double>(total), -shift);
}

Tensor column_sums(const Tensor& g) {
  Tensor out = Tensor::matrix(1, g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double* r = g.data() + i * g.cols();
    for (std::size_t j = 0; j < g.cols(); ++j) out[j] += r[j];
  }
  return out;
}

void check_targets(const Tensor& x, std::span<const int> targets, const char* op) {
  if (x.rank() != 2 || x.cols() < 2) {
    throw ValidationError("shape_mismatch", std::string(op) + " needs [N x C] input with C >= 2");
  }
  if (targets.size() != x.rows()) {
    throw ValidationError("shape_mismatch", std::string(op) + ": " +
                                                std::to_string(targets.size()) + " targets for " +
                                                std::to_string(x.rows()) + " rows");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= x.cols()) {
      throw ValidationError("invalid_target", "target class " + std::to_string(t) +
                                                  " outside [0, " + std::to_string(x.cols()) + ")");
    }
  }
}

}  // namespace

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NonFiniteError("constant");
  nodes_.push_back({std::move(value), {}, false, "constant", {}});
  return {nodes_.size() - 1};
}

Var Tape::parameter(Tensor value) {
  if (!value.all_finite()) throw NonFiniteError("parameter");
  nodes_.push_back({std::move(value), {}, true, "parameter", {}});
  return {nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 Backward backward) {
  if (!value.all_finite()) throw NonFiniteError(op);
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
  nodes_.push_back({std::move(value), {}, needs, op, needs ? std::move(backward) : Backward{}});
  return {nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (g.size() != n.value.size()) {
    throw ComputationError("shape_mismatch", std::string("gradient shape mismatch at ") + n.op);
  }
  if (n.grad.empty()) {
    n.grad = g.reshaped(n.value.shape());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1) {
    throw ValidationError("shape_mismatch", "backward needs a single-value loss");
  }
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[loss.id].grad = Tensor(nodes_[loss.id].value.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    if (!n.grad.all_finite()) throw NonFiniteError(std::string("backward of ") + n.op);
    // Inputs always precede their consumer, so n.grad is final here.
    n.backward(*this, n.grad);
  }
}

Var matmul(Tape& t, Var a, Var b) {
  return t.record("matmul", vascuscan::matmul(t.value(a), t.value(b)), {a, b},
                  [a, b](Tape& tape, const Tensor& g) {
                    if (tape.requires_grad(a)) tape.accumulate(a, matmul_a_bt(g, tape.value(b)));
                    if (tape.requires_grad(b)) tape.accumulate(b, matmul_at_b(tape.value(a), g));
                  });
}

Var add_row(Tape& t, Var x, Var bias) {
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  require_same_cols(xv, bv, "add_row");
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* r = out.data() + i * out.cols();
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] += bv[j];
  }
  return t.record("add_row", std::move(out), {x, bias}, [x, bias](Tape& tape, const Tensor& g) {
    tape.accumulate(x, g);
    if (tape.requires_grad(bias)) tape.accumulate(bias, column_sums(g));
  });
}

Var relu(Tape& t, Var x) {
  Tensor out = t.value(x);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return t.record("relu", std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(x);
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(xv[i] > 0.0)) dx[i] = 0.0;
    }
    tape.accumulate(x, dx);
  });
}

Var batch_norm_points(Tape& t, Var x, Var gamma, Var beta, BatchNormStats stats, Mode mode) {
  const Tensor& xv = t.value(x);
  const Tensor& gv = t.value(gamma);
  const Tensor& bv = t.value(beta);
  require_same_cols(xv, gv, "batch_norm_points");
  require_same_cols(xv, bv, "batch_norm_points");
  const std::size_t n = xv.rows(), k = xv.cols();

  Tensor mean = Tensor::matrix(1, k);
  Tensor inv_std = Tensor::matrix(1, k);
  const bool batch_stats = mode == Mode::Train || stats.batch_stats_in_eval;
  if (batch_stats) {
    if (n < 2) {
      throw ValidationError("batch_norm_batch", "batch-statistics batch norm needs at least 2 points");
    }
    Tensor var = Tensor::matrix(1, k);
    // Column sums go through an order-free accumulator so the statistics do
    // not depend on the order of the points.
    std::vector<double> column(n);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < n; ++i) column[i] = xv(i, j);
      mean[j] = order_free_sum(column) / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = xv(i, j) - mean[j];
        column[i] = d * d;
      }
      var[j] = order_free_sum(column) / static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(var[j] + kBatchNormEpsilon);
    }
    if (mode == Mode::Train && stats.update_mean && stats.update_variance) {
      const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
      Tensor& rm = *stats.update_mean;
      Tensor& rv = *stats.update_variance;
      if (rm.size() != k || rv.size() != k) {
        throw ValidationError("shape_mismatch", "batch norm running statistics have wrong size");
      }
      for (std::size_t j = 0; j < k; ++j) {
        rm[j] = kBatchNormMomentum * rm[j] + (1.0 - kBatchNormMomentum) * mean[j];
        rv[j] = kBatchNormMomentum * rv[j] + (1.0 - kBatchNormMomentum) * var[j] * unbias;
      }
    }
  } else {
    if (!stats.mean || !stats.variance || stats.mean->size() != k ||
        stats.variance->size() != k) {
      throw ValidationError("batch_norm_stats", "eval-mode batch norm needs running statistics");
    }
    for (std::size_t j = 0; j < k; ++j) {
      mean[j] = (*stats.mean)[j];
      inv_std[j] = 1.0 / std::sqrt((*stats.variance)[j] + kBatchNormEpsilon);
    }
  }

  Tensor xhat = Tensor::matrix(n, k);
  Tensor out = Tensor::matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double h = (xv(i, j) - mean[j]) * inv_std[j];
      xhat(i, j) = h;
      out(i, j) = gv[j] * h + bv[j];
    }
  }

  return t.record(
      "batch_norm_points", std::move(out), {x, gamma, beta},
      [x, gamma, beta, batch_stats, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& tape, const Tensor& g) {
        const std::size_t n = g.rows(), k = g.cols();
        const Tensor& gv = tape.value(gamma);
        Tensor dgamma = Tensor::matrix(1, k);
        Tensor dbeta = Tensor::matrix(1, k);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            dgamma[j] += g(i, j) * xhat(i, j);
            dbeta[j] += g(i, j);
          }
        }
        if (tape.requires_grad(x)) {
          Tensor dx = Tensor::matrix(n, k);
          if (batch_stats) {
            // dx = inv_std / N * (N dxhat - sum(dxhat) - xhat * sum(dxhat * xhat)),
            // with dxhat = g * gamma.
            const double nn = static_cast<double>(n);
            for (std::size_t j = 0; j < k; ++j) {
              const double sum_dxhat = dbeta[j] * gv[j];
              const double sum_dxhat_xhat = dgamma[j] * gv[j];
              for (std::size_t i = 0; i < n; ++i) {
                dx(i, j) = inv_std[j] / nn *
                           (nn * g(i, j) * gv[j] - sum_dxhat - xhat(i, j) * sum_dxhat_xhat);
              }
            }
          } else {
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < k; ++j) dx(i, j) = g(i, j) * gv[j] * inv_std[j];
            }
          }
          tape.accumulate(x, dx);
        }
        tape.accumulate(gamma, dgamma);
        tape.accumulate(beta, dbeta);
      });
}

Var max_pool_points(Tape& t, Var x) {
  auto pooled = vascuscan::max_pool_points(t.value(x));
  return t.record("max_pool_points", std::move(pooled.values), {x},
                  [x, argmax = std::move(pooled.argmax)](Tape& tape, const Tensor& g) {
                    const Tensor& xv = tape.value(x);
                    Tensor dx(xv.shape(), 0.0);
                    for (std::size_t j = 0; j < argmax.size(); ++j) dx(argmax[j], j) += g[j];
                    tape.accumulate(x, dx);
                  });
}

Var log_softmax(Tape& t, Var logits) {
  const Tensor& xv = t.value(logits);
  if (xv.rank() != 2) throw ValidationError("shape_mismatch", "log_softmax expects a matrix");
  return t.record("log_softmax", log_softmax_rows(xv), {logits},
                  [logits](Tape& tape, const Tensor& g) {
                    const Tensor y = log_softmax_rows(tape.value(logits));
                    Tensor dx = g;
                    for (std::size_t i = 0; i < dx.rows(); ++i) {
                      double gsum = 0.0;
                      for (std::size_t j = 0; j < dx.cols(); ++j) gsum += g(i, j);
                      for (std::size_t j = 0; j < dx.cols(); ++j) {
                        dx(i, j) = g(i, j) - std::exp(y(i, j)) * gsum;
                      }
                    }
                    tape.accumulate(logits, dx);
                  });
}

Var nll(Tape& t, Var log_probs, std::span<const int> targets) {
  const Tensor& lp = t.value(log_probs);
  check_targets(lp, targets, "nll");
  const std::size_t n = lp.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total -= lp(i, static_cast<std::size_t>(targets[i]));
  std::vector<int> tg(targets.begin(), targets.end());
  return t.record("nll", scalar(total / static_cast<double>(n)), {log_probs},
                  [log_probs, tg = std::move(tg)](Tape& tape, const Tensor& g) {
                    const Tensor& lp = tape.value(log_probs);
                    Tensor d(lp.shape(), 0.0);
                    const double scale = -g[0] / static_cast<double>(lp.rows());
                    for (std::size_t i = 0; i < lp.rows(); ++i) {
                      d(i, static_cast<std::size_t>(tg[i])) = scale;
                    }
                    tape.accumulate(log_probs, d);
                  });
}

Var log_softmax_nll(Tape& t, Var logits, std::span<const int> targets) {
  const Tensor& xv = t.value(logits);
  check_targets(xv, targets, "log_softmax_nll");
  Tensor y = log_softmax_rows(xv);
  const std::size_t n = xv.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total -= y(i, static_cast<std::size_t>(targets[i]));
  std::vector<int> tg(targets.begin(), targets.end());
  return t.record("log_softmax_nll", scalar(total / static_cast<double>(n)), {logits},
                  [logits, tg = std::move(tg), y = std::move(y)](Tape& tape, const Tensor& g) {
                    Tensor d(y.shape(), 0.0);
                    const double scale = g[0] / static_cast<double>(y.rows());
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                      for (std::size_t j = 0; j < y.cols(); ++j) {
                        const double onehot = static_cast<int>(j) == tg[i] ? 1.0 : 0.0;
                        d(i, j) = scale * (std::exp(y(i, j)) - onehot);
                      }
                    }
                    tape.accumulate(logits, d);
                  });
}

Var reshape(Tape& t, Var x, std::vector<std::size_t> shape) {
  return t.record("reshape", t.value(x).reshaped(std::move(shape)), {x},
                  [x](Tape& tape, const Tensor& g) { tape.accumulate(x, g); });
}

Var orthogonality_penalty(Tape& t, Var a) {
  const Tensor& av = t.value(a);
  if (av.rank() != 2 || av.rows() != av.cols()) {
    throw ValidationError("shape_mismatch", "orthogonality penalty needs a square matrix");
  }
  Tensor m = matmul_a_bt(av, av);
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) -= 1.0;
  for (double v : m.values()) total += v * v;
  return t.record("orthogonality_penalty", scalar(total), {a},
                  [a, m = std::move(m)](Tape& tape, const Tensor& g) {
                    // d||AA^T - I||^2 / dA = 4 (AA^T - I) A
                    Tensor d = vascuscan::matmul(m, tape.value(a));
                    for (double& v : d.values()) v *= 4.0 * g[0];
                    tape.accumulate(a, d);
                  });
}

Var add_scaled(Tape& t, Var a, Var b, double scale) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.size() != 1 || bv.size() != 1) {
    throw ValidationError("shape_mismatch", "add_scaled works on single values");
  }
  return t.record("add_scaled", scalar(av[0] + scale * bv[0]), {a, b},
                  [a, b, scale](Tape& tape, const Tensor& g) {
                    tape.accumulate(a, g);
                    tape.accumulate(b, scalar(scale * g[0]));
                  });
}

}  // namespace vascuscan::ad
