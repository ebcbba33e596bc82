#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the code under test beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "vascuscan/mesh.hpp"
#include "vascuscan/tensor.hpp"

namespace oracle {

using vascuscan::Face;
using vascuscan::Tensor;
using vascuscan::TriangleMesh;
using vascuscan::Vec3;

/// Height-field grid with jittered positions and randomly chosen diagonals.
/// Continuous coordinates make distinct path lengths tie with probability 0.
inline TriangleMesh jittered_grid(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> height(-0.5, 0.5);
  std::bernoulli_distribution flip(0.5);
  TriangleMesh m;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m.vertices.push_back({c + jitter(gen), r + jitter(gen), height(gen)});
    }
  }
  auto id = [cols](int r, int c) { return static_cast<std::uint32_t>(r * cols + c); };
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const auto a = id(r, c), b = id(r, c + 1), d = id(r + 1, c), e = id(r + 1, c + 1);
      if (flip(gen)) {
        m.faces.push_back({a, b, e});
        m.faces.push_back({a, e, d});
      } else {
        m.faces.push_back({a, b, d});
        m.faces.push_back({b, e, d});
      }
    }
  }
  return m;
}

/// All-pairs shortest path lengths over mesh edges (Euclidean lengths).
inline std::vector<std::vector<double>> floyd_warshall(const TriangleMesh& m) {
  const std::size_t n = m.vertices.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const Face& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k], b = f[(k + 1) % 3];
      const Vec3 diff = m.vertices[a] - m.vertices[b];
      const double len = std::sqrt(diff.x * diff.x + diff.y * diff.y + diff.z * diff.z);
      d[a][b] = std::min(d[a][b], len);
      d[b][a] = std::min(d[b][a], len);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i][k] == inf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double via = d[i][k] + d[k][j];
        if (via < d[i][j]) d[i][j] = via;
      }
    }
  }
  return d;
}

/// The k nearest vertices to `seed` by (distance, index) from a distance row.
inline std::vector<std::uint32_t> knn_from_row(const std::vector<double>& row, std::size_t k) {
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (std::isfinite(row[i])) ids.push_back(static_cast<std::uint32_t>(i));
  }
  std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (row[a] != row[b]) return row[a] < row[b];
    return a < b;
  });
  ids.resize(std::min(k, ids.size()));
  return ids;
}

/// Central finite-difference gradient of a scalar function of `x`.
inline Tensor numeric_gradient(const std::function<double()>& f, Tensor& x, double h = 1e-6) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(|a|, |b|, floor) over all entries.
inline double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& gen, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(gen);
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vascuscan_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace oracle
