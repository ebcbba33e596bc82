#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "vascuscan/geometry.hpp"

namespace vascuscan {

/// Per-vertex class values of the label channel.
enum class VertexClass : std::uint8_t { Vessel = 0, Aneurysm = 1 };

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh in millimetres with optional per-vertex channels.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::optional<std::vector<std::uint8_t>> labels;  ///< 0 = vessel, 1 = aneurysm
  std::optional<std::vector<double>> heat;          ///< values in [0, 1]

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool empty() const { return vertices.empty() && faces.empty(); }

  /// Throws ValidationError when an index or channel invariant is broken.
  void validate() const;
};

double surface_area(const TriangleMesh& m);

/// Euler characteristic V - E + F, with E the number of distinct undirected edges.
long euler_characteristic(const TriangleMesh& m);

/// Sorted, duplicate-free neighbour lists derived from the face set.
std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriangleMesh& m);

/// Undirected edge graph of a mesh in compressed row form, with Euclidean
/// edge lengths. Immutable once built.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;

  std::size_t vertex_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const { return neighbors_.size() / 2; }

  std::span<const std::uint32_t> neighbors(std::size_t v) const {
    return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::span<const double> lengths(std::size_t v) const {
    return {lengths_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }

  /// Builds from explicit undirected weighted edges; used by tests and by
  /// build_adjacency. Duplicate edges are merged.
  static AdjacencyGraph from_edges(std::size_t vertex_count,
                                   std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
                                   std::span<const Vec3> positions);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> neighbors_;
  std::vector<double> lengths_;
};

/// Edge graph of the mesh. Zero-length edges (coincident vertices joined by
/// an edge) are rejected.
AdjacencyGraph build_adjacency(const TriangleMesh& m);

struct GeodesicNeighbor {
  std::uint32_t vertex;
  double distance;
  friend bool operator==(const GeodesicNeighbor&, const GeodesicNeighbor&) = default;
};

/// The min(k, reachable) vertices closest to `seed` by shortest-path distance
/// over the edge graph, ordered by (distance, vertex index). The first entry
/// is always (seed, 0).
std::vector<GeodesicNeighbor> geodesic_knn(const AdjacencyGraph& g, std::uint32_t seed,
                                           std::size_t k);

/// Maximal edge-connected components of the masked vertices, each sorted
/// ascending, listed by smallest member.
std::vector<std::vector<std::uint32_t>> connected_regions(const TriangleMesh& m,
                                                          const std::vector<bool>& mask);

/// Edge-connected components of the whole graph (all vertices).
std::vector<std::vector<std::uint32_t>> graph_components(const AdjacencyGraph& g);

}  // namespace vascuscan
