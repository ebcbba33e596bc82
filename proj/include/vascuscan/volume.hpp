#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "vascuscan/mesh.hpp"

namespace vascuscan {

/// 3D intensity grid, x-fastest, with physical spacing and origin in mm.
struct ScalarVolume {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::vector<float> data;

  ScalarVolume() = default;
  ScalarVolume(std::array<int, 3> dims, std::array<double, 3> spacing,
               std::array<double, 3> origin);

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  }
  float at(int x, int y, int z) const { return data[index(x, y, z)]; }
  float& at(int x, int y, int z) { return data[index(x, y, z)]; }

  /// Physical position of a voxel centre.
  Vec3 position(int x, int y, int z) const {
    return {origin[0] + x * spacing[0], origin[1] + y * spacing[1], origin[2] + z * spacing[2]};
  }

  void validate() const;
};

/// Axis-aligned voxel box, `hi` exclusive.
struct CropBox {
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};
};

/// Loads `<name>.f32` plus its `<name>.json` sidecar. `path` may name either
/// file or the bare stem.
ScalarVolume load_volume(const std::filesystem::path& path);

/// Writes `<stem>.f32` and `<stem>.json`; `path` may carry either extension.
void save_volume(const ScalarVolume& v, const std::filesystem::path& path);

ScalarVolume crop(const ScalarVolume& v, const CropBox& box);

/// Isosurface of {intensity = iso}. Voxels with value > iso count as inside;
/// triangles wind so their normals point from the inside (above iso) toward
/// the outside. Vertices shared between cells are merged; vertex order
/// follows the first cell (x-fastest scan) that emits each vertex.
///
/// Ambiguous faces always separate the inside corners, so adjacent cells
/// agree on every shared face and the result is closed wherever the level
/// set does not touch the grid boundary. Interior (saddle) ambiguities are
/// not resolved topologically.
TriangleMesh marching_cubes(const ScalarVolume& v, double iso);

struct SmoothingParams {
  int passes = 10;
  double lambda = 0.5;
  double mu = -0.53;
};

/// Taubin lambda|mu smoothing with the uniform umbrella Laplacian. Each pass
/// is one shrinking step (lambda) followed by one inflating step (mu).
/// Connectivity and channels are untouched.
TriangleMesh smooth_non_shrinking(TriangleMesh m, const SmoothingParams& params = {});

}  // namespace vascuscan
