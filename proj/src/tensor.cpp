#include "vascuscan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vascuscan/error.hpp"

namespace vascuscan {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ValidationError("shape_mismatch", std::string(op) + " expects a matrix, got " +
                                                shape_string(t.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ValidationError("shape_mismatch", std::string(op) + ": incompatible shapes " +
                                              shape_string(a.shape()) + " and " +
                                              shape_string(b.shape()));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw ValidationError("shape", "tensor dimensions must be positive");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ValidationError("shape", "tensor dimensions must be positive");
  }
  if (data_.size() != product(shape_)) {
    throw ValidationError("shape", "data length " + std::to_string(data_.size()) +
                                       " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (product(shape) != data_.size()) {
    throw ValidationError("shape_mismatch", "cannot reshape " + shape_string(shape_) + " to " +
                                                shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

// out[m x p] += a[m x k] * b[k x p]. Four output rows share each row of b.
// Every output element accumulates its k products in ascending order from
// +0, so results do not depend on how rows are grouped (adding a zero
// product to a +0-initialised sum changes no bits).
void gemm_rows(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
               std::size_t p) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * k;
    double* o0 = out + i * p;
    double* o1 = o0 + p;
    double* o2 = o1 + p;
    double* o3 = o2 + p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double s0 = a0[kk], s1 = a0[k + kk], s2 = a0[2 * k + kk], s3 = a0[3 * k + kk];
      if (s0 == 0.0 && s1 == 0.0 && s2 == 0.0 && s3 == 0.0) continue;
      const double* brow = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) {
        const double bj = brow[j];
        o0[j] += s0 * bj;
        o1[j] += s1 * bj;
        o2[j] += s2 * bj;
        o3[j] += s3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double s = arow[kk];
      if (s == 0.0) continue;
      const double* brow = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += s * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  if (b.rows() != k) mismatch("matmul", a, b);
  Tensor out = Tensor::matrix(m, p);
  gemm_rows(a.data(), b.data(), out.data(), m, k, p);
  return out;
}

Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_at_b");
  require_matrix(b, "matmul_at_b");
  const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
  if (b.rows() != n) mismatch("matmul_at_b", a, b);
  Tensor out = Tensor::matrix(k, p);
  for (std::size_t r = 0; r < n; ++r) {
    const double* arow = a.data() + r * k;
    const double* brow = b.data() + r * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double s = arow[kk];
      if (s == 0.0) continue;
      double* orow = out.data() + kk * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += s * brow[j];
    }
  }
  return out;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_a_bt");
  require_matrix(b, "matmul_a_bt");
  const std::size_t m = a.rows(), p = a.cols(), k = b.rows();
  if (b.cols() != p) mismatch("matmul_a_bt", a, b);
  const Tensor bt = transpose(b);
  Tensor out = Tensor::matrix(m, k);
  gemm_rows(a.data(), bt.data(), out.data(), m, p, k);
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out = Tensor::matrix(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

PoolResult max_pool_points(const Tensor& x) {
  require_matrix(x, "max_pool_points");
  const std::size_t n = x.rows(), k = x.cols();
  PoolResult r{Tensor::matrix(1, k), std::vector<std::size_t>(k, 0)};
  for (std::size_t j = 0; j < k; ++j) r.values[j] = x(0, j);
  for (std::size_t i = 1; i < n; ++i) {
    const double* row = x.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      if (row[j] > r.values[j]) {
        r.values[j] = row[j];
        r.argmax[j] = i;
      }
    }
  }
  return r;
}

Tensor log_softmax_rows(const Tensor& logits) {
  require_matrix(logits, "log_softmax");
  Tensor out = logits;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (double& v : row) v -= lse;
  }
  return out;
}

}  // namespace vascuscan
