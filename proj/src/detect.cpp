#include "vascuscan/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "vascuscan/error.hpp"

namespace vascuscan {

std::vector<Detection> binarize_and_label(const TriangleMesh& m, const Heatmap& h,
                                          double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("invalid_threshold", "threshold must lie in [0, 1]");
  }
  if (h.size() != m.vertices.size()) {
    throw ValidationError("shape_mismatch", "heatmap size does not match the mesh");
  }
  std::vector<bool> mask(h.size());
  for (std::size_t v = 0; v < h.size(); ++v) mask[v] = h.heat[v] > threshold;
  std::vector<Detection> out;
  for (auto& region : connected_regions(m, mask)) {
    if (region.size() <= kMinDetectionSize) continue;
    Detection d;
    for (std::uint32_t v : region) d.score = std::max(d.score, h.heat[v]);
    d.region = std::move(region);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> truth_regions(const TriangleMesh& m) {
  if (!m.labels) throw ValidationError("missing_labels", "mesh has no label channel");
  std::vector<bool> mask(m.vertices.size());
  for (std::size_t v = 0; v < mask.size(); ++v) {
    mask[v] = (*m.labels)[v] == static_cast<std::uint8_t>(VertexClass::Aneurysm);
  }
  return connected_regions(m, mask);
}

DetectionReport match(const std::vector<Detection>& dets,
                      const std::vector<std::vector<std::uint32_t>>& truth,
                      double min_overlap_fraction) {
  DetectionReport r;
  std::vector<bool> truth_hit(truth.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    bool any = false;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      // Both regions are sorted, so a merge walk counts the shared vertices.
      std::size_t shared = 0;
      auto a = dets[d].region.begin(), ae = dets[d].region.end();
      auto b = truth[t].begin(), be = truth[t].end();
      while (a != ae && b != be) {
        if (*a < *b) ++a;
        else if (*b < *a) ++b;
        else { ++shared; ++a; ++b; }
      }
      if (shared == 0) continue;
      if (min_overlap_fraction > 0.0 &&
          static_cast<double>(shared) < min_overlap_fraction * static_cast<double>(truth[t].size())) {
        continue;
      }
      any = true;
      truth_hit[t] = true;
      r.matches.emplace_back(d, t);
    }
    if (!any) ++r.fp;
  }
  for (bool hit : truth_hit) (hit ? r.tp : r.fn)++;
  return r;
}

double sensitivity(std::size_t tp, std::size_t fn) {
  if (tp + fn == 0) return 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double fp_per_image(std::size_t fp, std::size_t images) {
  if (images == 0) throw ValidationError("no_images", "FP per image needs at least one image");
  return static_cast<double>(fp) / static_cast<double>(images);
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 19; i >= 1; --i) t.push_back(i / 20.0);
  return t;
}

void finish_curve(FrocCurve& c) {
  c.samples.clear();
  for (const auto& p : c.points) c.samples.push_back({p.fp_per_image, p.sensitivity});
  std::sort(c.samples.begin(), c.samples.end(), [](const FrocSample& a, const FrocSample& b) {
    if (a.fp_per_image != b.fp_per_image) return a.fp_per_image < b.fp_per_image;
    return a.sensitivity < b.sensitivity;
  });
  double best = 0.0;
  for (auto& s : c.samples) {
    best = std::max(best, s.sensitivity);
    s.sensitivity = best;
  }
  c.auc = 0.0;
  if (c.samples.empty()) return;
  const double max_fp = c.samples.back().fp_per_image;
  if (max_fp <= 0.0) {
    c.auc = c.samples.back().sensitivity;
    return;
  }
  double prev_x = 0.0;
  double prev_y = c.samples.front().fp_per_image > 0.0 ? 0.0 : c.samples.front().sensitivity;
  double area = 0.0;
  for (const auto& s : c.samples) {
    area += (s.fp_per_image - prev_x) * (s.sensitivity + prev_y) / 2.0;
    prev_x = s.fp_per_image;
    prev_y = s.sensitivity;
  }
  c.auc = std::clamp(area / max_fp, 0.0, 1.0);
}

FrocCurve froc(std::span<const EvalCase> cases, const std::vector<double>& thresholds,
               double min_overlap_fraction) {
  if (thresholds.empty()) throw ValidationError("empty_thresholds", "threshold list is empty");
  if (cases.empty()) throw ValidationError("no_images", "FROC needs at least one mesh");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0)) {
      throw ValidationError("invalid_threshold", "thresholds must lie in (0, 1]");
    }
    if (i > 0 && !(thresholds[i] < thresholds[i - 1])) {
      throw ValidationError("invalid_threshold", "thresholds must be strictly descending");
    }
  }
  std::vector<std::vector<std::vector<std::uint32_t>>> truth;
  for (const auto& c : cases) truth.push_back(truth_regions(*c.mesh));

  FrocCurve curve;
  for (double t : thresholds) {
    FrocPoint p;
    p.threshold = t;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      DetectionReport r =
          match(binarize_and_label(*cases[i].mesh, *cases[i].heat, t), truth[i], min_overlap_fraction);
      p.tp += r.tp;
      p.fp += r.fp;
      p.fn += r.fn;
    }
    p.sensitivity = sensitivity(p.tp, p.fn);
    p.fp_per_image = fp_per_image(p.fp, cases.size());
    curve.points.push_back(p);
  }
  finish_curve(curve);
  return curve;
}

nlohmann::json to_json(const DetectionReport& r) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& [d, t] : r.matches) matches.push_back({{"detection", d}, {"truth", t}});
  return {{"threshold", r.threshold}, {"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"matches", matches}};
}

nlohmann::json to_json(const FrocCurve& c) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : c.points) {
    points.push_back({{"threshold", p.threshold},
                      {"tp", p.tp},
                      {"fp", p.fp},
                      {"fn", p.fn},
                      {"sensitivity", p.sensitivity},
                      {"fp_per_image", p.fp_per_image}});
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : c.samples) {
    samples.push_back({{"fp_per_image", s.fp_per_image}, {"sensitivity", s.sensitivity}});
  }
  return {{"points", points}, {"samples", samples}, {"auc", c.auc}};
}

std::string froc_csv(const FrocCurve& c) {
  std::string out = "fp_per_image,sensitivity\n";
  char buf[64];
  for (const auto& s : c.samples) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", s.fp_per_image, s.sensitivity);
    out += buf;
  }
  return out;
}

}  // namespace vascuscan
