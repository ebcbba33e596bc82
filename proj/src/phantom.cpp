#include "vascuscan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vascuscan/error.hpp"
#include "vascuscan/rng.hpp"

namespace vascuscan {

using nlohmann::json;

PhantomSpec PhantomSpec::for_family(PhantomFamily family, std::uint64_t seed) {
  PhantomSpec s;
  s.seed = seed;
  s.family = family;
  if (family == PhantomFamily::B) {
    s.tube_radius_min = 2.0;
    s.tube_radius_max = 2.7;
    s.max_turn_deg = 35.0;
    s.segments_per_tube = 5;
    s.tube_count = 5;
    s.blob_radius_min = 4.0;
    s.blob_radius_max = 5.5;
  }
  return s;
}

namespace {

Vec3 normalized(const Vec3& v) { return v * (1.0 / norm(v)); }

Vec3 random_unit(Rng& rng) {
  while (true) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = norm(v);
    if (n > 1e-9) return v * (1.0 / n);
  }
}

Vec3 random_perpendicular(Rng& rng, const Vec3& d) {
  while (true) {
    const Vec3 u = random_unit(rng);
    const Vec3 p = u - d * dot(u, d);
    const double n = norm(p);
    if (n > 1e-6) return p * (1.0 / n);
  }
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + ab * t);
}

struct Bounds {
  std::array<int, 3> dims;
  double margin;
  bool contains(const Vec3& p, double r) const {
    for (int a = 0; a < 3; ++a) {
      if (p[a] - r < margin || p[a] + r > dims[a] - 1 - margin) return false;
    }
    return true;
  }
};

struct Tube {
  std::vector<Vec3> points;  // polyline in voxel coordinates
  double radius;
};

// Random walk from `start` along `dir`. Steps leaving the grid are
// re-drawn; the walk stops early when no step fits.
std::vector<Vec3> walk(Rng& rng, const PhantomSpec& spec, const Bounds& bounds, Vec3 start,
                       Vec3 dir, double radius) {
  std::vector<Vec3> pts{start};
  const double max_turn = spec.max_turn_deg * std::numbers::pi / 180.0;
  Vec3 cur = start;
  for (int s = 0; s < spec.segments_per_tube; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < 30 && !placed; ++attempt) {
      // Later attempts may turn harder to escape a wall.
      const double limit = std::min(std::numbers::pi / 2, max_turn * (1.0 + attempt / 5.0));
      const double angle = rng.uniform(0.0, limit);
      const Vec3 perp = random_perpendicular(rng, dir);
      const Vec3 nd = normalized(dir * std::cos(angle) + perp * std::sin(angle));
      const Vec3 next = cur + nd * spec.segment_length;
      if (bounds.contains(next, radius)) {
        pts.push_back(next);
        cur = next;
        dir = nd;
        placed = true;
      }
    }
    if (!placed) break;
  }
  return pts;
}

void rasterize_capsule(ScalarVolume& v, const Vec3& a, const Vec3& b, double r) {
  std::array<int, 3> lo{}, hi{};
  for (int k = 0; k < 3; ++k) {
    lo[k] = std::max(0, static_cast<int>(std::floor(std::min(a[k], b[k]) - r)));
    hi[k] = std::min(v.dims[k] - 1, static_cast<int>(std::ceil(std::max(a[k], b[k]) + r)));
  }
  for (int z = lo[2]; z <= hi[2]; ++z) {
    for (int y = lo[1]; y <= hi[1]; ++y) {
      for (int x = lo[0]; x <= hi[0]; ++x) {
        if (segment_distance({double(x), double(y), double(z)}, a, b) <= r) v.at(x, y, z) = 1.0f;
      }
    }
  }
}

void validate_spec(const PhantomSpec& s) {
  auto fail = [](const std::string& msg) { throw ValidationError("phantom_spec", msg); };
  for (int d : s.dims) {
    if (d < 8) fail("grid dimensions must be at least 8");
  }
  if (!(s.spacing_mm > 0.0)) fail("spacing must be positive");
  if (s.tube_count < 1) fail("need at least one tube");
  if (!(s.tube_radius_min > 0.0) || s.tube_radius_max < s.tube_radius_min) {
    fail("bad tube radius range");
  }
  if (s.segments_per_tube < 1 || !(s.segment_length > 0.0)) fail("bad tube segmentation");
  if (s.blob_count < 0) fail("blob count must be non-negative");
  if (s.blob_count > 0 && !(s.blob_radius_max > s.tube_radius_min)) {
    fail("blob radii must exceed tube radii");
  }
  if (s.blob_radius_max < s.blob_radius_min) fail("bad blob radius range");
  if (s.smoothing_sigma < 0.0 || s.label_margin < 0.0) fail("negative sigma or margin");
}

struct Layout {
  std::vector<Capsule> capsules;  // voxel units
  std::vector<Blob> blobs;        // voxel units
};

// One draw of the vessel tree and its blobs. Returns false when the blobs
// cannot be placed on this tree.
bool draw_layout(Rng& rng, const PhantomSpec& spec, const Bounds& bounds, Layout& out) {
  std::vector<Tube> tubes;
  for (int t = 0; t < spec.tube_count; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
      const double radius = rng.uniform(spec.tube_radius_min, spec.tube_radius_max);
      Vec3 start, dir;
      if (tubes.empty()) {
        // Trunk enters near the bottom face and heads roughly upward.
        start = {rng.uniform(0.3, 0.7) * (spec.dims[0] - 1),
                 rng.uniform(0.3, 0.7) * (spec.dims[1] - 1), bounds.margin + radius + 1.0};
        const Vec3 tilt = random_perpendicular(rng, {0, 0, 1});
        const double angle = rng.uniform(0.0, 0.4);
        dir = normalized(Vec3{0, 0, 1} * std::cos(angle) + tilt * std::sin(angle));
      } else {
        const Tube& parent = tubes[rng.uniform_index(tubes.size())];
        const std::size_t seg = rng.uniform_index(parent.points.size() - 1);
        const Vec3& a = parent.points[seg];
        const Vec3& b = parent.points[seg + 1];
        start = a + (b - a) * rng.uniform(0.2, 0.8);
        const Vec3 pd = normalized(b - a);
        const double angle = rng.uniform(45.0, 75.0) * std::numbers::pi / 180.0;
        dir = normalized(pd * std::cos(angle) + random_perpendicular(rng, pd) * std::sin(angle));
      }
      if (!bounds.contains(start, radius)) continue;
      auto pts = walk(rng, spec, bounds, start, dir, radius);
      if (pts.size() < 2) continue;
      tubes.push_back({std::move(pts), radius});
      placed = true;
    }
    if (!placed) {
      throw ValidationError("phantom_bounds", "tube geometry does not fit inside the grid",
                            {{"tube", std::to_string(t)}});
    }
  }

  std::vector<Capsule>& capsules_vox = out.capsules;
  capsules_vox.clear();
  std::vector<std::size_t> capsule_tube;
  for (std::size_t t = 0; t < tubes.size(); ++t) {
    for (std::size_t i = 0; i + 1 < tubes[t].points.size(); ++i) {
      capsules_vox.push_back({tubes[t].points[i], tubes[t].points[i + 1], tubes[t].radius});
      capsule_tube.push_back(t);
    }
  }

  std::vector<Blob>& blobs_vox = out.blobs;
  blobs_vox.clear();
  for (int b = 0; b < spec.blob_count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
      const std::size_t ci = rng.uniform_index(capsules_vox.size());
      const Capsule& host = capsules_vox[ci];
      const Vec3 axis_pt = host.a + (host.b - host.a) * rng.uniform(0.25, 0.75);
      const Vec3 perp = random_perpendicular(rng, normalized(host.b - host.a));
      const double radius = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
      if (radius <= 1.2 * host.radius) continue;
      const Vec3 center = axis_pt + perp * host.radius;
      if (!bounds.contains(center, radius)) continue;
      bool clear = true;
      for (const auto& other : blobs_vox) {
        if (distance(center, other.center) <
            radius + other.radius + 2.0 * spec.label_margin + 4.0) {
          clear = false;
        }
      }
      // Keep blobs away from tubes other than the host chain.
      for (std::size_t k = 0; k < capsules_vox.size() && clear; ++k) {
        if (capsule_tube[k] == capsule_tube[ci]) continue;
        const auto& c = capsules_vox[k];
        if (segment_distance(center, c.a, c.b) < radius + c.radius + 2.0) clear = false;
      }
      if (!clear) continue;
      blobs_vox.push_back({center, radius, host.radius});
      placed = true;
    }
    if (!placed) return false;
  }
  return true;

}

}  // namespace

void gaussian_blur(ScalarVolume& v, double sigma) {
  if (sigma <= 0.0) return;
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * half + 1);
  double total = 0.0;
  for (int i = -half; i <= half; ++i) {
    w[i + half] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += w[i + half];
  }
  for (auto& x : w) x /= total;

  std::vector<float> tmp(v.data.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (int z = 0; z < v.dims[2]; ++z) {
      for (int y = 0; y < v.dims[1]; ++y) {
        for (int x = 0; x < v.dims[0]; ++x) {
          std::array<int, 3> p{x, y, z};
          double acc = 0.0;
          for (int i = -half; i <= half; ++i) {
            std::array<int, 3> q = p;
            q[axis] += i;
            if (q[axis] < 0 || q[axis] >= v.dims[axis]) continue;
            acc += w[i + half] * v.at(q[0], q[1], q[2]);
          }
          tmp[v.index(x, y, z)] = static_cast<float>(acc);
        }
      }
    }
    v.data.swap(tmp);
  }
}

Phantom generate_phantom(const PhantomSpec& spec) {
  validate_spec(spec);
  Rng rng(derive_seed(spec.seed, "phantom"));
  const Bounds bounds{spec.dims, 1.0 + std::ceil(3.0 * spec.smoothing_sigma)};

  // The tree is redrawn when its blobs cannot be placed.
  constexpr int kLayoutAttempts = 10;
  Layout layout;
  bool ok = false;
  for (int attempt = 0; attempt < kLayoutAttempts && !ok; ++attempt) {
    ok = draw_layout(rng, spec, bounds, layout);
  }
  if (!ok) {
    throw ValidationError("phantom_bounds", "could not place isolated blobs inside the grid",
                          {{"blob_count", std::to_string(spec.blob_count)}});
  }
  const auto& capsules_vox = layout.capsules;
  const auto& blobs_vox = layout.blobs;

  Phantom out;
  const double s = spec.spacing_mm;
  out.volume = ScalarVolume(spec.dims, {s, s, s}, {0.0, 0.0, 0.0});
  for (const auto& c : capsules_vox) rasterize_capsule(out.volume, c.a, c.b, c.radius);
  for (const auto& bl : blobs_vox) rasterize_capsule(out.volume, bl.center, bl.center, bl.radius);
  gaussian_blur(out.volume, spec.smoothing_sigma);

  for (const auto& c : capsules_vox) out.tubes.push_back({c.a * s, c.b * s, c.radius * s});
  for (const auto& bl : blobs_vox) {
    out.blobs.push_back({bl.center * s, bl.radius * s, bl.tube_radius * s});
  }
  return out;
}

TriangleMesh label_mesh(TriangleMesh m, std::span<const Blob> blobs, double margin_mm) {
  std::vector<std::uint8_t> labels(m.vertices.size(), 0);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    for (const auto& b : blobs) {
      if (distance(m.vertices[i], b.center) <= b.radius + margin_mm) {
        labels[i] = 1;
        break;
      }
    }
  }
  m.labels = std::move(labels);
  return m;
}

ScalarVolume make_ball_volume(std::array<int, 3> dims, Vec3 center, double radius,
                              double smoothing_sigma) {
  ScalarVolume v(dims, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0});
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        if (distance({double(x), double(y), double(z)}, center) <= radius) v.at(x, y, z) = 1.0f;
      }
    }
  }
  gaussian_blur(v, smoothing_sigma);
  return v;
}

std::string to_string(PhantomFamily f) { return f == PhantomFamily::A ? "A" : "B"; }

PhantomFamily parse_family(const std::string& s) {
  if (s == "A" || s == "a") return PhantomFamily::A;
  if (s == "B" || s == "b") return PhantomFamily::B;
  throw ValidationError("phantom_family", "phantom family must be A or B", {{"value", s}});
}

json to_json(const PhantomSpec& s) {
  return {{"seed", s.seed},
          {"family", to_string(s.family)},
          {"dims", s.dims},
          {"spacing_mm", s.spacing_mm},
          {"tube_count", s.tube_count},
          {"tube_radius_min", s.tube_radius_min},
          {"tube_radius_max", s.tube_radius_max},
          {"segments_per_tube", s.segments_per_tube},
          {"segment_length", s.segment_length},
          {"max_turn_deg", s.max_turn_deg},
          {"blob_count", s.blob_count},
          {"blob_radius_min", s.blob_radius_min},
          {"blob_radius_max", s.blob_radius_max},
          {"smoothing_sigma", s.smoothing_sigma},
          {"label_margin", s.label_margin}};
}

PhantomSpec phantom_spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("phantom_spec", "phantom spec must be an object");
  PhantomSpec s;
  if (j.contains("family")) s = PhantomSpec::for_family(parse_family(j["family"].get<std::string>()), 0);
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "family") continue;
      else if (key == "dims") s.dims = value.get<std::array<int, 3>>();
      else if (key == "spacing_mm") s.spacing_mm = value.get<double>();
      else if (key == "tube_count") s.tube_count = value.get<int>();
      else if (key == "tube_radius_min") s.tube_radius_min = value.get<double>();
      else if (key == "tube_radius_max") s.tube_radius_max = value.get<double>();
      else if (key == "segments_per_tube") s.segments_per_tube = value.get<int>();
      else if (key == "segment_length") s.segment_length = value.get<double>();
      else if (key == "max_turn_deg") s.max_turn_deg = value.get<double>();
      else if (key == "blob_count") s.blob_count = value.get<int>();
      else if (key == "blob_radius_min") s.blob_radius_min = value.get<double>();
      else if (key == "blob_radius_max") s.blob_radius_max = value.get<double>();
      else if (key == "smoothing_sigma") s.smoothing_sigma = value.get<double>();
      else if (key == "label_margin") s.label_margin = value.get<double>();
      else throw ValidationError("unknown_field", "unknown phantom field '" + key + "'", {{"field", key}});
    } catch (const json::exception& e) {
      throw ValidationError("phantom_spec", "bad value for phantom field '" + key + "'",
                            {{"field", key}});
    }
  }
  validate_spec(s);
  return s;
}

json blobs_to_json(std::span<const Blob> blobs) {
  json arr = json::array();
  for (const auto& b : blobs) {
    arr.push_back({{"center_mm", {b.center.x, b.center.y, b.center.z}},
                   {"radius_mm", b.radius},
                   {"tube_radius_mm", b.tube_radius}});
  }
  return arr;
}

std::vector<Blob> blobs_from_json(const json& j) {
  std::vector<Blob> out;
  try {
    for (const auto& e : j) {
      const auto c = e.at("center_mm").get<std::array<double, 3>>();
      out.push_back({{c[0], c[1], c[2]},
                     e.at("radius_mm").get<double>(),
                     e.value("tube_radius_mm", 0.0)});
    }
  } catch (const json::exception& e) {
    throw ValidationError("truth_format", std::string("malformed blob list: ") + e.what());
  }
  return out;
}

}  // namespace vascuscan
