#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vascuscan/mesh.hpp"
#include "vascuscan/parcel.hpp"
#include "vascuscan/pointnet.hpp"

namespace vascuscan {

/// Per-vertex mean aneurysm probability over all clouds that contained the
/// vertex. Vertices no cloud reached have count 0 and heat 0.
struct Heatmap {
  std::vector<double> heat;
  std::vector<std::uint32_t> count;

  std::size_t size() const { return heat.size(); }
};

/// Fuses per-cloud probabilities. For each vertex the contributions are
/// sorted before summation, so the result does not depend on cloud order.
Heatmap aggregate_predictions(std::size_t vertex_count, const std::vector<PointCloud>& clouds,
                              const std::vector<std::vector<double>>& probabilities);

/// Eval-mode inference over every cloud of `plan` (up to `jobs` clouds at a
/// time), then aggregate_predictions.
Heatmap predict_heatmap(const TriangleMesh& m, const ModelParams& params, const ParcelPlan& plan,
                        std::size_t jobs = 1);

/// Mesh PLY with the heat channel set (labels kept if present).
void write_heatmap(const TriangleMesh& m, const Heatmap& h, const std::filesystem::path& path);

/// Heat channel of a mesh as a Heatmap; count is 1 where the mesh has heat.
Heatmap heatmap_from_mesh(const TriangleMesh& m);

}  // namespace vascuscan
