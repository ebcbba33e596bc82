#include "vascuscan/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vascuscan/error.hpp"

namespace vascuscan {

namespace fs = std::filesystem;
using nlohmann::json;

ScalarVolume::ScalarVolume(std::array<int, 3> dims_, std::array<double, 3> spacing_,
                           std::array<double, 3> origin_)
    : dims(dims_), spacing(spacing_), origin(origin_) {
  for (int d : dims) {
    if (d <= 0) throw ValidationError("volume_dims", "volume dimensions must be positive");
  }
  data.assign(voxel_count(), 0.0f);
}

void ScalarVolume::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw ValidationError("volume_dims", "volume dimensions must be positive");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw ValidationError("volume_spacing", "spacing must be strictly positive");
    }
    if (!std::isfinite(origin[a])) throw ValidationError("volume_origin", "origin not finite");
  }
  if (data.size() != voxel_count()) {
    throw ValidationError("volume_length",
                          "data holds " + std::to_string(data.size()) + " values, dims need " +
                              std::to_string(voxel_count()));
  }
}

namespace {

struct VolumePaths {
  fs::path raw;
  fs::path sidecar;
};

VolumePaths volume_paths(const fs::path& path) {
  fs::path stem = path;
  if (path.extension() == ".f32" || path.extension() == ".json") stem.replace_extension();
  fs::path raw = stem;
  raw += ".f32";
  fs::path sidecar = stem;
  sidecar += ".json";
  return {raw, sidecar};
}

template <typename T>
std::array<T, 3> read_triple(const json& j, const char* key, const fs::path& sidecar) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw ValidationError("sidecar_field", std::string("sidecar field '") + key +
                                               "' must be an array of 3 numbers",
                          {{"path", sidecar.string()}, {"field", key}});
  }
  std::array<T, 3> out{};
  for (int i = 0; i < 3; ++i) {
    const auto& e = j[key][i];
    if (!e.is_number() || (std::is_integral_v<T> && !e.is_number_integer())) {
      throw ValidationError("sidecar_field", std::string("bad value in sidecar field '") + key + "'",
                            {{"path", sidecar.string()}, {"field", key}});
    }
    out[i] = e.get<T>();
  }
  return out;
}

}  // namespace

ScalarVolume load_volume(const fs::path& path) {
  const auto [raw, sidecar] = volume_paths(path);
  if (!fs::exists(sidecar)) {
    throw ValidationError("missing_sidecar", "volume sidecar not found: " + sidecar.string(),
                          {{"path", sidecar.string()}});
  }
  if (!fs::exists(raw)) {
    throw ValidationError("missing_volume", "volume data not found: " + raw.string(),
                          {{"path", raw.string()}});
  }

  json meta;
  {
    std::ifstream in(sidecar);
    try {
      meta = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("sidecar_parse", std::string("cannot parse sidecar: ") + e.what(),
                            {{"path", sidecar.string()}});
    }
  }
  if (!meta.is_object()) {
    throw ValidationError("sidecar_parse", "sidecar must be a JSON object",
                          {{"path", sidecar.string()}});
  }

  ScalarVolume v;
  v.dims = read_triple<int>(meta, "dims", sidecar);
  v.spacing = read_triple<double>(meta, "spacing_mm", sidecar);
  v.origin = read_triple<double>(meta, "origin_mm", sidecar);
  for (int a = 0; a < 3; ++a) {
    if (v.dims[a] <= 0 || !(v.spacing[a] > 0.0)) {
      throw ValidationError("sidecar_field", "dims and spacing must be positive",
                            {{"path", sidecar.string()}});
    }
  }

  const auto bytes = fs::file_size(raw);
  const std::size_t expected = v.voxel_count();
  if (bytes != expected * sizeof(float)) {
    throw ValidationError("volume_length",
                          "volume file holds " + std::to_string(bytes / sizeof(float)) +
                              " floats, sidecar dims need " + std::to_string(expected),
                          {{"path", raw.string()},
                           {"expected", std::to_string(expected)},
                           {"bytes", std::to_string(bytes)}});
  }
  v.data.resize(expected);
  std::ifstream in(raw, std::ios::binary);
  in.read(reinterpret_cast<char*>(v.data.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw ValidationError("io", "short read", {{"path", raw.string()}});
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : v.data) {
      auto u = std::bit_cast<std::uint32_t>(f);
      u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
      f = std::bit_cast<float>(u);
    }
  }
  return v;
}

void save_volume(const ScalarVolume& v, const fs::path& path) {
  v.validate();
  const auto [raw, sidecar] = volume_paths(path);
  {
    std::ofstream out(raw, std::ios::binary);
    if (!out) throw ComputationError("io", "cannot open for writing", {{"path", raw.string()}});
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(v.data.data()),
                static_cast<std::streamsize>(v.data.size() * sizeof(float)));
    } else {
      for (float f : v.data) {
        auto u = std::bit_cast<std::uint32_t>(f);
        unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                              static_cast<unsigned char>(u >> 16),
                              static_cast<unsigned char>(u >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
      }
    }
    if (!out) throw ComputationError("io", "write failed", {{"path", raw.string()}});
  }
  json meta = {{"dims", v.dims}, {"spacing_mm", v.spacing}, {"origin_mm", v.origin}};
  std::ofstream out(sidecar);
  if (!out) throw ComputationError("io", "cannot open for writing", {{"path", sidecar.string()}});
  out << meta.dump(2) << "\n";
}

ScalarVolume crop(const ScalarVolume& v, const CropBox& box) {
  v.validate();
  for (int a = 0; a < 3; ++a) {
    if (box.lo[a] < 0 || box.lo[a] >= box.hi[a] || box.hi[a] > v.dims[a]) {
      throw ValidationError("invalid_crop",
                            "crop box must satisfy 0 <= lo < hi <= dims on every axis",
                            {{"axis", std::to_string(a)},
                             {"lo", std::to_string(box.lo[a])},
                             {"hi", std::to_string(box.hi[a])}});
    }
  }
  ScalarVolume out;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = box.hi[a] - box.lo[a];
    out.spacing[a] = v.spacing[a];
    out.origin[a] = v.origin[a] + box.lo[a] * v.spacing[a];
  }
  out.data.resize(out.voxel_count());
  for (int z = 0; z < out.dims[2]; ++z) {
    for (int y = 0; y < out.dims[1]; ++y) {
      const float* src = &v.data[v.index(box.lo[0], box.lo[1] + y, box.lo[2] + z)];
      std::copy(src, src + out.dims[0], &out.data[out.index(0, y, z)]);
    }
  }
  return out;
}

TriangleMesh smooth_non_shrinking(TriangleMesh m, const SmoothingParams& params) {
  if (params.passes < 0) throw ValidationError("smoothing_params", "passes must be >= 0");
  if (!(params.lambda > 0.0 && params.lambda < 1.0)) {
    throw ValidationError("smoothing_params", "lambda must lie in (0, 1)");
  }
  if (!(params.mu > -1.0 && params.mu < 0.0)) {
    throw ValidationError("smoothing_params", "mu must lie in (-1, 0)");
  }
  if (!(-params.mu > params.lambda)) {
    throw ValidationError("smoothing_params", "|mu| must exceed lambda");
  }
  m.validate();
  if (params.passes == 0 || m.vertices.empty()) return m;
  for (const auto& f : m.faces) {
    if (!(triangle_area(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]) > 1e-12)) {
      throw ValidationError("degenerate_face", "smoothing requires non-degenerate faces");
    }
  }

  const auto adj = vertex_neighbors(m);
  std::vector<Vec3> delta(m.vertices.size());
  auto step = [&](double factor) {
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      const auto& nbrs = adj[i];
      if (nbrs.empty()) {
        delta[i] = {};
        continue;
      }
      Vec3 mean;
      for (auto j : nbrs) mean += m.vertices[j];
      mean *= 1.0 / static_cast<double>(nbrs.size());
      delta[i] = mean - m.vertices[i];
    }
    for (std::size_t i = 0; i < m.vertices.size(); ++i) m.vertices[i] += factor * delta[i];
  };
  for (int pass = 0; pass < params.passes; ++pass) {
    step(params.lambda);
    step(params.mu);
  }
  return m;
}

}  // namespace vascuscan
