#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vascuscan/error.hpp"
#include "vascuscan/volume.hpp"

namespace vascuscan {

namespace {

// Cube corner c sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
constexpr int corner_bit(int c, int axis) { return (c >> axis) & 1; }

struct CubeEdge {
  int from;  // corner with the axis bit clear
  int to;
  int axis;
};

struct CaseTable {
  std::array<CubeEdge, 12> edges{};
  std::array<std::array<int, 8>, 8> edge_of{};  // corner pair -> edge index
  std::array<std::vector<std::array<int, 3>>, 256> triangles;
};

// True when two cube edges lie on a common cube face.
bool share_face(const CubeEdge& a, const CubeEdge& b) {
  for (int axis = 0; axis < 3; ++axis) {
    if (axis == a.axis || axis == b.axis) continue;
    if (corner_bit(a.from, axis) == corner_bit(b.from, axis)) return true;
  }
  return false;
}

// Triangulates the polygon `poly` (cube edge ids in loop order) so that no
// chord joins two edges on a common cube face. Such a chord would lie in the
// face plane, where the neighbouring cell may emit it too and the surface
// would meet itself along that edge.
bool triangulate_polygon(const CaseTable& t, const std::vector<int>& poly,
                         std::vector<std::array<int, 3>>& out) {
  const std::size_t k = poly.size();
  if (k < 3) return true;
  if (k == 3) {
    out.push_back({poly[0], poly[1], poly[2]});
    return true;
  }
  auto chord_ok = [&](std::size_t i, std::size_t j) {
    return !share_face(t.edges[poly[i]], t.edges[poly[j]]);
  };
  // The triangle on side (0, 1) has its apex at some j; both sides left over
  // are triangulated recursively.
  for (std::size_t j = 2; j < k; ++j) {
    if (j != 2 && !chord_ok(1, j)) continue;
    if (j != k - 1 && !chord_ok(j, 0)) continue;
    std::vector<std::array<int, 3>> tris{{poly[0], poly[1], poly[j]}};
    const std::vector<int> left(poly.begin() + 1, poly.begin() + j + 1);
    std::vector<int> right(poly.begin() + j, poly.end());
    right.push_back(poly[0]);
    if (triangulate_polygon(t, left, tris) && triangulate_polygon(t, right, tris)) {
      out.insert(out.end(), tris.begin(), tris.end());
      return true;
    }
  }
  return false;
}

// Builds the 256-case triangulation from one rule instead of a hand-typed
// table. On every cube face the iso-segments are oriented with the inside
// corners on their right when the face is viewed from outside the cube, and
// each out->in crossing is joined to the next crossing counter-clockwise.
// That pairing cuts off inside corners individually on ambiguous faces, and
// since it depends only on the four face corners, neighbouring cells make the
// same choice. The segments chain into closed loops on the cube boundary.
// Each loop is triangulated without chords on the cube faces, and loop
// direction gives normals pointing from inside to outside.
CaseTable build_case_table() {
  CaseTable t;
  int e = 0;
  for (auto& row : t.edge_of) row.fill(-1);
  for (int axis = 0; axis < 3; ++axis) {
    for (int c = 0; c < 8; ++c) {
      if (corner_bit(c, axis) != 0) continue;
      const int d = c | (1 << axis);
      t.edges[e] = {c, d, axis};
      t.edge_of[c][d] = t.edge_of[d][c] = e;
      ++e;
    }
  }

  // Faces listed counter-clockwise as seen from outside the cube.
  std::array<std::array<int, 4>, 6> faces{};
  int f = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const int base = side << axis;
      std::array<int, 4> ring = {base, base | (1 << u), base | (1 << u) | (1 << v),
                                 base | (1 << v)};
      if (side == 0) ring = {ring[3], ring[2], ring[1], ring[0]};
      faces[f++] = ring;
    }
  }

  for (int cfg = 0; cfg < 256; ++cfg) {
    auto inside = [cfg](int c) { return ((cfg >> c) & 1) != 0; };
    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& ring : faces) {
      // Crossings in counter-clockwise order, flagged when entering inside.
      std::array<std::pair<int, bool>, 4> crossings{};
      int n = 0;
      for (int i = 0; i < 4; ++i) {
        const int a = ring[i];
        const int b = ring[(i + 1) % 4];
        if (inside(a) != inside(b)) crossings[n++] = {t.edge_of[a][b], inside(b)};
      }
      for (int i = 0; i < n; ++i) {
        if (crossings[i].second) next[crossings[i].first] = crossings[(i + 1) % n].first;
      }
    }
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      std::vector<int> loop;
      for (int cur = start; !used[cur]; cur = next[cur]) {
        used[cur] = true;
        loop.push_back(cur);
      }
      if (!triangulate_polygon(t, loop, t.triangles[cfg])) {
        throw std::logic_error("marching cubes: no face-free triangulation");
      }
    }
  }
  return t;
}

const CaseTable& case_table() {
  static const CaseTable table = build_case_table();
  return table;
}

}  // namespace

TriangleMesh marching_cubes(const ScalarVolume& v, double iso) {
  v.validate();
  for (float value : v.data) {
    if (!std::isfinite(value)) {
      throw ValidationError("non_finite_volume", "volume contains non-finite intensities");
    }
  }
  if (!std::isfinite(iso)) throw ValidationError("iso", "iso value must be finite");

  const auto& table = case_table();
  TriangleMesh mesh;
  const int nx = v.dims[0], ny = v.dims[1], nz = v.dims[2];
  if (nx < 2 || ny < 2 || nz < 2) return mesh;

  // Vertex id per lattice edge: (lattice point, axis) -> index + 1.
  std::vector<std::uint32_t> edge_vertex(v.voxel_count() * 3, 0);

  auto vertex_for = [&](int x, int y, int z, const CubeEdge& ce) -> std::uint32_t {
    const int px = x + corner_bit(ce.from, 0);
    const int py = y + corner_bit(ce.from, 1);
    const int pz = z + corner_bit(ce.from, 2);
    const std::size_t key = v.index(px, py, pz) * 3 + ce.axis;
    if (edge_vertex[key] != 0) return edge_vertex[key] - 1;

    const double a = v.at(px, py, pz);
    const int qx = px + (ce.axis == 0), qy = py + (ce.axis == 1), qz = pz + (ce.axis == 2);
    const double b = v.at(qx, qy, qz);
    const double s = (iso - a) / (b - a);
    std::array<double, 3> grid = {static_cast<double>(px), static_cast<double>(py),
                                  static_cast<double>(pz)};
    grid[ce.axis] += s;
    mesh.vertices.push_back({v.origin[0] + grid[0] * v.spacing[0],
                             v.origin[1] + grid[1] * v.spacing[1],
                             v.origin[2] + grid[2] * v.spacing[2]});
    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
    edge_vertex[key] = id;
    return id - 1;
  };

  for (int z = 0; z + 1 < nz; ++z) {
    for (int y = 0; y + 1 < ny; ++y) {
      for (int x = 0; x + 1 < nx; ++x) {
        int cfg = 0;
        for (int c = 0; c < 8; ++c) {
          const double value =
              v.at(x + corner_bit(c, 0), y + corner_bit(c, 1), z + corner_bit(c, 2));
          if (value > iso) cfg |= 1 << c;
        }
        if (cfg == 0 || cfg == 255) continue;
        for (const auto& tri : table.triangles[cfg]) {
          Face face;
          for (int k = 0; k < 3; ++k) face[k] = vertex_for(x, y, z, table.edges[tri[k]]);
          mesh.faces.push_back(face);
        }
      }
    }
  }
  return mesh;
}

}  // namespace vascuscan
