#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace vascuscan {

/// Dense row-major tensor of doubles. Value type; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Leading dimension of a matrix; 1 for rank-1 tensors.
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  /// Trailing dimension.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  bool all_finite() const;
  void fill(double v);
  /// Returns a tensor with the same data under a new shape of equal size.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// a[m x k] * b[k x p]. Each output row depends only on its own input row,
/// accumulated in ascending k, so results are independent of row position.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T * b for a[n x k], b[n x p].
Tensor matmul_at_b(const Tensor& a, const Tensor& b);
/// a * b^T for a[m x p], b[k x p].
Tensor matmul_a_bt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

struct PoolResult {
  Tensor values;                    ///< [1 x K]
  std::vector<std::size_t> argmax;  ///< winning row per column, first on ties
};

/// Column-wise maximum over the rows of x[N x K].
PoolResult max_pool_points(const Tensor& x);

/// Row-wise log-softmax, stabilised by the row maximum.
Tensor log_softmax_rows(const Tensor& logits);

}  // namespace vascuscan
