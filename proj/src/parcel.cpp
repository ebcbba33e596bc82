#include "vascuscan/parcel.hpp"

#include <algorithm>

#include "vascuscan/error.hpp"
#include "vascuscan/rng.hpp"

namespace vascuscan {

bool PointCloud::has_aneurysm() const {
  if (!labels) return false;
  return std::any_of(labels->begin(), labels->end(), [](std::uint8_t l) { return l == 1; });
}

void normalize_points(std::vector<Vec3>& points) {
  if (points.empty()) return;
  Vec3 centroid;
  for (const auto& p : points) centroid += p;
  centroid *= 1.0 / static_cast<double>(points.size());
  double max_norm = 0.0;
  for (auto& p : points) {
    p -= centroid;
    max_norm = std::max(max_norm, norm(p));
  }
  if (max_norm > 0.0) {
    const double inv = 1.0 / max_norm;
    for (auto& p : points) p *= inv;
  }
}

PointCloud extract_cloud(const TriangleMesh& m, const AdjacencyGraph& g, std::uint32_t seed,
                         std::size_t n) {
  if (g.vertex_count() != m.vertices.size()) {
    throw ValidationError("graph_mismatch", "adjacency graph does not belong to this mesh");
  }
  const auto nearest = geodesic_knn(g, seed, n);
  if (nearest.size() < n) throw UndersizedComponentError(nearest.size(), n);

  PointCloud cloud;
  cloud.seed = seed;
  cloud.points.reserve(n);
  cloud.vertex_ids.reserve(n);
  for (const auto& nb : nearest) {
    cloud.vertex_ids.push_back(nb.vertex);
    cloud.points.push_back(m.vertices[nb.vertex]);
  }
  normalize_points(cloud.points);
  if (m.labels) {
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = (*m.labels)[cloud.vertex_ids[i]];
    cloud.labels = std::move(labels);
  }
  return cloud;
}

namespace {

std::vector<bool> large_component_mask(const AdjacencyGraph& g, std::size_t n) {
  std::vector<bool> ok(g.vertex_count(), false);
  for (const auto& comp : graph_components(g)) {
    if (comp.size() < n) continue;
    for (auto v : comp) ok[v] = true;
  }
  return ok;
}

std::size_t aneurysm_count(const PointCloud& c) {
  return static_cast<std::size_t>(std::count(c.labels->begin(), c.labels->end(), 1));
}

}  // namespace

TrainingPlan plan_training(const TriangleMesh& m, const AdjacencyGraph& g, std::uint64_t rng_seed,
                           const TrainingPlanOptions& opts) {
  if (!m.labels) throw ValidationError("missing_labels", "training parcellation needs labels");
  if (opts.positives + opts.negatives != opts.total) {
    throw ValidationError("plan_counts", "positives + negatives must equal total");
  }
  if (opts.cloud_size == 0) throw ValidationError("plan_counts", "cloud size must be positive");

  const auto eligible = large_component_mask(g, opts.cloud_size);
  std::vector<std::uint32_t> aneurysm_seeds, vessel_seeds;
  for (std::uint32_t v = 0; v < m.vertices.size(); ++v) {
    if (!eligible[v]) continue;
    ((*m.labels)[v] == 1 ? aneurysm_seeds : vessel_seeds).push_back(v);
  }

  TrainingPlan plan;
  std::size_t positives = opts.positives;
  if (positives > 0 && aneurysm_seeds.empty()) {
    positives = 0;
    plan.positives_dropped = true;
  }
  if (opts.negatives > 0 && vessel_seeds.empty()) {
    throw ValidationError("plan_seeds", "no vessel vertex in a component large enough for a cloud");
  }

  Rng rng(rng_seed);
  for (std::size_t i = 0; i < positives; ++i) {
    const auto seed = aneurysm_seeds[rng.uniform_index(aneurysm_seeds.size())];
    PointCloud c = extract_cloud(m, g, seed, opts.cloud_size);
    if (aneurysm_count(c) < opts.min_aneurysm_points) {
      // Only reachable with a positivity threshold above one vertex.
      bool found = false;
      for (std::size_t r = 1; r < opts.retry_cap && !found; ++r) {
        c = extract_cloud(m, g, aneurysm_seeds[rng.uniform_index(aneurysm_seeds.size())],
                          opts.cloud_size);
        found = aneurysm_count(c) >= opts.min_aneurysm_points;
      }
      if (!found) {
        throw ComputationError("retry_cap", "could not draw a positive cloud within the retry cap");
      }
    }
    plan.clouds.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < opts.negatives; ++i) {
    bool found = false;
    for (std::size_t r = 0; r < opts.retry_cap && !found; ++r) {
      PointCloud c =
          extract_cloud(m, g, vessel_seeds[rng.uniform_index(vessel_seeds.size())], opts.cloud_size);
      if (!c.has_aneurysm()) {
        plan.clouds.push_back(std::move(c));
        found = true;
      }
    }
    if (!found) {
      throw ComputationError("retry_cap",
                             "could not draw an aneurysm-free cloud within the retry cap",
                             {{"retry_cap", std::to_string(opts.retry_cap)},
                              {"cloud_size", std::to_string(opts.cloud_size)}});
    }
  }
  return plan;
}

ParcelPlan plan_inference(const TriangleMesh& m, const AdjacencyGraph& g, std::uint64_t rng_seed,
                          std::size_t n) {
  if (n == 0) throw ValidationError("plan_counts", "cloud size must be positive");
  ParcelPlan plan;
  plan.coverage.assign(m.vertices.size(), 0);
  Rng rng(rng_seed);
  for (const auto& comp : graph_components(g)) {
    if (comp.size() < n) {
      plan.skipped.push_back({comp.front(), comp.size()});
      continue;
    }
    std::vector<std::uint32_t> uncovered = comp;
    while (!uncovered.empty()) {
      const auto seed = uncovered[rng.uniform_index(uncovered.size())];
      PointCloud c = extract_cloud(m, g, seed, n);
      for (auto v : c.vertex_ids) ++plan.coverage[v];
      plan.clouds.push_back(std::move(c));
      std::erase_if(uncovered, [&](std::uint32_t v) { return plan.coverage[v] > 0; });
    }
  }
  return plan;
}

}  // namespace vascuscan
