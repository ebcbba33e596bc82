#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vascuscan/aggregate.hpp"
#include "vascuscan/mesh.hpp"

namespace vascuscan {

/// Regions must have more than this many vertices to count as detections.
inline constexpr std::size_t kMinDetectionSize = 50;

struct Detection {
  std::vector<std::uint32_t> region;  ///< ascending vertex ids
  double score = 0.0;                 ///< max heat in the region
  std::size_t size() const { return region.size(); }
};

/// Connected regions of vertices with heat > threshold that have more than
/// kMinDetectionSize vertices. threshold must lie in [0, 1].
std::vector<Detection> binarize_and_label(const TriangleMesh& m, const Heatmap& h, double threshold);

/// Ground-truth regions: connected components of aneurysm-labelled vertices.
std::vector<std::vector<std::uint32_t>> truth_regions(const TriangleMesh& m);

struct DetectionReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// (detection index, truth region index) for every overlapping pair.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  double threshold = 0.0;
};

/// A truth region counts as hit when some detection shares at least one
/// vertex with it and, if min_overlap_fraction > 0, the shared vertices
/// make up at least that fraction of the truth region. TP counts hit truth
/// regions, FN the others; FP counts detections that hit nothing.
DetectionReport match(const std::vector<Detection>& dets,
                      const std::vector<std::vector<std::uint32_t>>& truth,
                      double min_overlap_fraction = 0.0);

/// TP / (TP + FN); 0 when there is no truth region at all.
double sensitivity(std::size_t tp, std::size_t fn);
double fp_per_image(std::size_t fp, std::size_t images);

/// Descending default sweep 0.95, 0.90, ..., 0.05.
std::vector<double> default_thresholds();

struct FrocPoint {
  double threshold = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double sensitivity = 0.0;
  double fp_per_image = 0.0;
};

struct FrocSample {
  double fp_per_image = 0.0;
  double sensitivity = 0.0;
};

struct FrocCurve {
  std::vector<FrocPoint> points;    ///< pooled counts, one per threshold, input order
  std::vector<FrocSample> samples;  ///< sorted by FP/I with non-decreasing sensitivity
  double auc = 0.0;
};

struct EvalCase {
  const TriangleMesh* mesh = nullptr;  ///< must carry labels
  const Heatmap* heat = nullptr;
};

/// Pools TP/FP/FN over all cases for every threshold. AUC is the trapezoid
/// area under the sample curve from FP/I 0 to its maximum (the curve is
/// anchored at (0, 0) when its first sample lies right of 0), divided by
/// that maximum. When the maximum is 0 the AUC is the sensitivity there.
FrocCurve froc(std::span<const EvalCase> cases, const std::vector<double>& thresholds,
               double min_overlap_fraction = 0.0);

/// Sorted, running-max samples and normalised AUC for raw points.
void finish_curve(FrocCurve& curve);

nlohmann::json to_json(const DetectionReport& r);
nlohmann::json to_json(const FrocCurve& c);
/// "fp_per_image,sensitivity" header, six decimals.
std::string froc_csv(const FrocCurve& c);

}  // namespace vascuscan
