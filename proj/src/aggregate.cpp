#include "vascuscan/aggregate.hpp"

#include <algorithm>

#include "vascuscan/error.hpp"
#include "vascuscan/parallel.hpp"
#include "vascuscan/ply.hpp"

namespace vascuscan {

Heatmap aggregate_predictions(std::size_t vertex_count, const std::vector<PointCloud>& clouds,
                              const std::vector<std::vector<double>>& probabilities) {
  if (clouds.size() != probabilities.size()) {
    throw ValidationError("shape_mismatch", "one probability vector per cloud is required");
  }
  std::vector<std::vector<double>> contributions(vertex_count);
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const auto& ids = clouds[c].vertex_ids;
    if (ids.size() != probabilities[c].size()) {
      throw ValidationError("shape_mismatch",
                            "cloud " + std::to_string(c) + " has " + std::to_string(ids.size()) +
                                " points but " + std::to_string(probabilities[c].size()) +
                                " predictions");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] >= vertex_count) {
        throw ValidationError("plan_mismatch",
                              "cloud " + std::to_string(c) + " references vertex " +
                                  std::to_string(ids[i]) + " outside the mesh",
                              {{"cloud", std::to_string(c)}, {"vertex", std::to_string(ids[i])}});
      }
      contributions[ids[i]].push_back(probabilities[c][i]);
    }
  }
  Heatmap h;
  h.heat.assign(vertex_count, 0.0);
  h.count.assign(vertex_count, 0);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    auto& list = contributions[v];
    if (list.empty()) continue;
    std::sort(list.begin(), list.end());
    double sum = 0.0;
    for (double p : list) sum += p;
    h.count[v] = static_cast<std::uint32_t>(list.size());
    h.heat[v] = std::clamp(sum / static_cast<double>(list.size()), 0.0, 1.0);
  }
  return h;
}

Heatmap predict_heatmap(const TriangleMesh& m, const ModelParams& params, const ParcelPlan& plan,
                        std::size_t jobs) {
  std::vector<std::vector<double>> probs(plan.clouds.size());
  parallel_for(plan.clouds.size(), jobs, [&](std::size_t c) {
    probs[c] = forward(params, plan.clouds[c]).prediction.aneurysm_prob;
  });
  return aggregate_predictions(m.vertices.size(), plan.clouds, probs);
}

void write_heatmap(const TriangleMesh& m, const Heatmap& h, const std::filesystem::path& path) {
  if (h.size() != m.vertices.size()) {
    throw ValidationError("shape_mismatch", "heatmap size does not match the mesh");
  }
  TriangleMesh out = m;
  out.heat = h.heat;
  save_ply(out, path);
}

Heatmap heatmap_from_mesh(const TriangleMesh& m) {
  if (!m.heat) {
    throw ValidationError("missing_heat", "mesh has no heat channel");
  }
  Heatmap h;
  h.heat = *m.heat;
  h.count.assign(h.heat.size(), 1);
  return h;
}

}  // namespace vascuscan
