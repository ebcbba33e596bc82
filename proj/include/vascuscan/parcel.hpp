#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "vascuscan/mesh.hpp"

namespace vascuscan {

/// Fixed-size patch of mesh vertices, normalised into the unit ball.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<std::uint32_t> vertex_ids;  ///< source vertex of each point
  std::optional<std::vector<std::uint8_t>> labels;
  std::uint32_t seed = 0;

  std::size_t size() const { return points.size(); }
  bool has_aneurysm() const;
};

/// Centres points on their centroid and scales the farthest one to unit
/// norm. Leaves all-coincident input at the origin.
void normalize_points(std::vector<Vec3>& points);

/// The n geodesically nearest vertices of `seed` (seed included), in
/// geodesic order, normalised. Throws UndersizedComponentError when the
/// seed's component has fewer than n vertices.
PointCloud extract_cloud(const TriangleMesh& m, const AdjacencyGraph& g, std::uint32_t seed,
                         std::size_t n);

struct TrainingPlanOptions {
  std::size_t total = 170;
  std::size_t positives = 50;
  std::size_t negatives = 120;
  std::size_t cloud_size = 3000;
  std::size_t min_aneurysm_points = 1;  ///< positivity threshold for a cloud
  std::size_t retry_cap = 1000;         ///< seed draws allowed per negative cloud
};

struct TrainingPlan {
  std::vector<PointCloud> clouds;  ///< positives first, then negatives
  /// Set when the mesh had no aneurysm vertices and positives were dropped.
  bool positives_dropped = false;
};

/// Training parcellation: `positives` clouds seeded on aneurysm vertices and
/// `negatives` aneurysm-free clouds seeded on vessel vertices. Seeds are only
/// drawn from components large enough to hold a cloud. Overlap between
/// clouds is allowed.
TrainingPlan plan_training(const TriangleMesh& m, const AdjacencyGraph& g, std::uint64_t rng_seed,
                           const TrainingPlanOptions& opts = {});

struct SkippedComponent {
  std::uint32_t first_vertex;
  std::size_t size;
};

struct ParcelPlan {
  std::vector<PointCloud> clouds;
  std::vector<std::uint32_t> coverage;  ///< clouds containing each vertex
  std::vector<SkippedComponent> skipped;
};

/// Covering parcellation for inference. Per component (ascending smallest
/// vertex), seeds are drawn uniformly from vertices no cloud has covered yet
/// until every vertex is covered. Components smaller than n are reported in
/// `skipped` and left uncovered.
ParcelPlan plan_inference(const TriangleMesh& m, const AdjacencyGraph& g, std::uint64_t rng_seed,
                          std::size_t n = 3000);

}  // namespace vascuscan
