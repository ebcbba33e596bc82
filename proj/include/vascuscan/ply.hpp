#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "vascuscan/geometry.hpp"
#include "vascuscan/mesh.hpp"

namespace vascuscan {

/// ASCII PLY with per-vertex x, y, z (float) plus optional `label` (uchar)
/// and `heat` (float). Values are written at float32 precision using the
/// shortest round-tripping decimal form, so save -> load -> save is
/// byte-stable.
void write_ply(std::ostream& os, const TriangleMesh& m);
void save_ply(const TriangleMesh& m, const std::filesystem::path& path);

/// Reads ASCII PLY. Unknown scalar vertex properties are skipped; faces must
/// be triangles.
TriangleMesh read_ply(std::istream& is);
TriangleMesh load_ply(const std::filesystem::path& path);

/// Point-set PLY (no faces) with an optional label channel; used for cloud
/// debug dumps.
void save_point_ply(const std::vector<Vec3>& points, const std::vector<std::uint8_t>* labels,
                    const std::filesystem::path& path);

}  // namespace vascuscan
