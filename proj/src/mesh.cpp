#include "vascuscan/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <tuple>

#include "vascuscan/error.hpp"

namespace vascuscan {

void TriangleMesh::validate() const {
  const std::size_t n = vertices.size();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (std::uint32_t idx : faces[f]) {
      if (idx >= n) {
        throw ValidationError("face_index_out_of_range",
                              "face references vertex " + std::to_string(idx) + " of " +
                                  std::to_string(n),
                              {{"face", std::to_string(f)}});
      }
    }
  }
  if (labels && labels->size() != n) {
    throw ValidationError("channel_size", "label channel length differs from vertex count");
  }
  if (labels) {
    for (auto l : *labels) {
      if (l > 1) throw ValidationError("label_value", "labels must be 0 or 1");
    }
  }
  if (heat) {
    if (heat->size() != n) {
      throw ValidationError("channel_size", "heat channel length differs from vertex count");
    }
    for (double h : *heat) {
      if (!(h >= 0.0 && h <= 1.0)) throw ValidationError("heat_range", "heat outside [0, 1]");
    }
  }
}

double surface_area(const TriangleMesh& m) {
  double area = 0.0;
  for (const auto& f : m.faces) {
    area += triangle_area(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
  }
  return area;
}

namespace {

std::vector<std::pair<std::uint32_t, std::uint32_t>> unique_edges(const TriangleMesh& m) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(m.faces.size() * 3);
  for (const auto& f : m.faces) {
    for (int i = 0; i < 3; ++i) {
      std::uint32_t a = f[i];
      std::uint32_t b = f[(i + 1) % 3];
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      edges.emplace_back(a, b);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace

long euler_characteristic(const TriangleMesh& m) {
  const auto edges = unique_edges(m);
  return static_cast<long>(m.vertices.size()) - static_cast<long>(edges.size()) +
         static_cast<long>(m.faces.size());
}

std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriangleMesh& m) {
  std::vector<std::vector<std::uint32_t>> adj(m.vertices.size());
  for (const auto& [a, b] : unique_edges(m)) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

AdjacencyGraph AdjacencyGraph::from_edges(
    std::size_t vertex_count, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
    std::span<const Vec3> positions) {
  for (auto& e : edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  AdjacencyGraph g;
  g.offsets_.assign(vertex_count + 1, 0);
  for (const auto& [a, b] : edges) {
    if (a >= vertex_count || b >= vertex_count) {
      throw ValidationError("edge_index_out_of_range", "edge references missing vertex");
    }
    if (a == b) continue;
    ++g.offsets_[a + 1];
    ++g.offsets_[b + 1];
  }
  for (std::size_t v = 0; v < vertex_count; ++v) g.offsets_[v + 1] += g.offsets_[v];

  g.neighbors_.resize(g.offsets_.back());
  g.lengths_.resize(g.offsets_.back());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  // Edges are sorted by (a, b), so each vertex's list comes out sorted too:
  // entries for vertex v arrive as (u, v) with u < v first, then (v, w).
  for (const auto& [a, b] : edges) {
    if (a == b) continue;
    const double len = distance(positions[a], positions[b]);
    if (!(len > 0.0)) {
      throw ValidationError("zero_length_edge",
                            "edge between coincident vertices " + std::to_string(a) + " and " +
                                std::to_string(b),
                            {{"u", std::to_string(a)}, {"v", std::to_string(b)}});
    }
    g.neighbors_[cursor[a]] = b;
    g.lengths_[cursor[a]++] = len;
    g.neighbors_[cursor[b]] = a;
    g.lengths_[cursor[b]++] = len;
  }
  return g;
}

AdjacencyGraph build_adjacency(const TriangleMesh& m) {
  m.validate();
  return AdjacencyGraph::from_edges(m.vertices.size(), unique_edges(m), m.vertices);
}

std::vector<GeodesicNeighbor> geodesic_knn(const AdjacencyGraph& g, std::uint32_t seed,
                                           std::size_t k) {
  if (seed >= g.vertex_count()) {
    throw ValidationError("invalid_seed", "seed vertex " + std::to_string(seed) +
                                              " outside graph of " +
                                              std::to_string(g.vertex_count()));
  }
  if (k == 0) throw ValidationError("invalid_k", "k must be positive");

  // Keys are (distance, vertex). With strictly positive edge lengths every
  // vertex at distance d is queued before anything at d is popped, so the
  // pop order is exactly the (distance, index) order.
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<double> dist(g.vertex_count(), std::numeric_limits<double>::infinity());
  std::vector<bool> settled(g.vertex_count(), false);

  std::vector<GeodesicNeighbor> out;
  out.reserve(std::min(k, g.vertex_count()));
  dist[seed] = 0.0;
  heap.emplace(0.0, seed);
  while (!heap.empty() && out.size() < k) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;
    settled[u] = true;
    out.push_back({u, d});
    const auto nbrs = g.neighbors(u);
    const auto lens = g.lengths(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const std::uint32_t v = nbrs[i];
      if (settled[v]) continue;
      const double nd = d + lens[i];
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return out;
}

namespace {

template <typename NeighborFn>
std::vector<std::vector<std::uint32_t>> flood_components(std::size_t n,
                                                         const std::vector<bool>& mask,
                                                         NeighborFn&& neighbors_of) {
  std::vector<std::vector<std::uint32_t>> regions;
  std::vector<bool> seen(n, false);
  std::vector<std::uint32_t> stack;
  for (std::uint32_t start = 0; start < n; ++start) {
    if (!mask[start] || seen[start]) continue;
    std::vector<std::uint32_t> region;
    seen[start] = true;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::uint32_t u = stack.back();
      stack.pop_back();
      region.push_back(u);
      for (std::uint32_t v : neighbors_of(u)) {
        if (mask[v] && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    std::sort(region.begin(), region.end());
    regions.push_back(std::move(region));
  }
  return regions;
}

}  // namespace

std::vector<std::vector<std::uint32_t>> connected_regions(const TriangleMesh& m,
                                                          const std::vector<bool>& mask) {
  if (mask.size() != m.vertices.size()) {
    throw ValidationError("mask_size", "mask length differs from vertex count");
  }
  const auto adj = vertex_neighbors(m);
  return flood_components(m.vertices.size(), mask,
                          [&](std::uint32_t u) -> const std::vector<std::uint32_t>& {
                            return adj[u];
                          });
}

std::vector<std::vector<std::uint32_t>> graph_components(const AdjacencyGraph& g) {
  const std::vector<bool> all(g.vertex_count(), true);
  return flood_components(g.vertex_count(), all, [&](std::uint32_t u) { return g.neighbors(u); });
}

}  // namespace vascuscan
