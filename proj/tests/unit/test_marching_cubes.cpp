#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <utility>

#include "vascuscan/mesh.hpp"
#include "vascuscan/phantom.hpp"
#include "vascuscan/volume.hpp"

using namespace vascuscan;

namespace {

// Every directed edge must appear once and its reverse once: closed,
// edge-manifold and consistently oriented.
bool closed_and_oriented(const TriangleMesh& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];
  }
  for (const auto& [e, n] : directed) {
    if (n != 1) return false;
    const auto it = directed.find({e.second, e.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

double signed_volume(const TriangleMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces) {
    const Vec3& a = m.vertices[f[0]];
    const Vec3& b = m.vertices[f[1]];
    const Vec3& c = m.vertices[f[2]];
    v += dot(a, cross(b, c)) / 6.0;
  }
  return v;
}

// 4x4x4 zero grid with one 2x2x2 block of corner values in the middle.
ScalarVolume single_cube(int config) {
  ScalarVolume v({4, 4, 4}, {1, 1, 1}, {0, 0, 0});
  for (int c = 0; c < 8; ++c) {
    v.at(1 + (c & 1), 1 + ((c >> 1) & 1), 1 + ((c >> 2) & 1)) = (config >> c) & 1 ? 1.0f : 0.0f;
  }
  return v;
}

}  // namespace

TEST_CASE("empty and full volumes give no triangles") {
  ScalarVolume v({5, 5, 5}, {1, 1, 1}, {0, 0, 0});
  CHECK(marching_cubes(v, 0.5).faces.empty());
  for (auto& x : v.data) x = 1.0f;
  CHECK(marching_cubes(v, 0.5).faces.empty());
}

TEST_CASE("single inside voxel gives an octahedron around it") {
  ScalarVolume v({3, 3, 3}, {1, 1, 1}, {0, 0, 0});
  v.at(1, 1, 1) = 1.0f;
  const auto m = marching_cubes(v, 0.5);
  CHECK(m.vertices.size() == 6);
  CHECK(m.faces.size() == 8);
  CHECK(euler_characteristic(m) == 2);
  CHECK(closed_and_oriented(m));
  CHECK(signed_volume(m) > 0.0);
  for (const auto& p : m.vertices) CHECK(distance(p, {1, 1, 1}) == doctest::Approx(0.5));
}

TEST_CASE("every corner configuration closes up inside a zero border") {
  for (int config = 1; config < 256; ++config) {
    CAPTURE(config);
    const auto m = marching_cubes(single_cube(config), 0.5);
    REQUIRE(!m.faces.empty());
    CHECK(closed_and_oriented(m));
    CHECK(signed_volume(m) > 0.0);
    m.validate();
  }
}

TEST_CASE("random blobs give closed, outward-oriented surfaces") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 20; ++trial) {
    ScalarVolume v({9, 8, 7}, {1, 1, 1}, {0, 0, 0});
    for (int z = 1; z < 6; ++z)
      for (int y = 1; y < 7; ++y)
        for (int x = 1; x < 8; ++x) v.at(x, y, z) = u(gen);
    const auto m = marching_cubes(v, 0.5);
    if (m.faces.empty()) continue;
    CHECK(closed_and_oriented(m));
    CHECK(signed_volume(m) > 0.0);
  }
}

TEST_CASE("vertices interpolate linearly along grid edges") {
  ScalarVolume w({2, 2, 2}, {2.0, 1.0, 1.0}, {10.0, 0.0, 0.0});
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y) {
      w.at(0, y, z) = 0.0f;
      w.at(1, y, z) = 1.0f;
    }
  const auto m = marching_cubes(w, 0.25);
  REQUIRE(m.vertices.size() == 4);
  for (const auto& p : m.vertices) CHECK(p.x == doctest::Approx(10.5));
}

TEST_CASE("spacing and origin map vertices to physical space") {
  auto v = make_ball_volume({16, 16, 16}, {7.5, 7.5, 7.5}, 4.0);
  const auto unit = marching_cubes(v, 0.5);
  v.spacing = {0.5, 2.0, 1.5};
  v.origin = {1.0, -2.0, 3.0};
  const auto scaled = marching_cubes(v, 0.5);
  REQUIRE(unit.faces == scaled.faces);
  for (std::size_t i = 0; i < unit.vertices.size(); ++i) {
    const Vec3& a = unit.vertices[i];
    const Vec3& b = scaled.vertices[i];
    CHECK(b.x == doctest::Approx(1.0 + 0.5 * a.x));
    CHECK(b.y == doctest::Approx(-2.0 + 2.0 * a.y));
    CHECK(b.z == doctest::Approx(3.0 + 1.5 * a.z));
  }
}

TEST_CASE("ball surface is a sphere within one voxel diagonal") {
  const Vec3 c{19.5, 19.5, 19.5};
  const double r = 16.0;
  const auto m = marching_cubes(make_ball_volume({40, 40, 40}, c, r), 0.5);
  CHECK(euler_characteristic(m) == 2);
  CHECK(closed_and_oriented(m));
  double worst = 0.0;
  for (const auto& p : m.vertices) worst = std::max(worst, std::abs(distance(p, c) - r));
  CHECK(worst <= std::sqrt(3.0));
  CHECK(signed_volume(m) == doctest::Approx(4.0 / 3.0 * M_PI * r * r * r).epsilon(0.05));
}

TEST_CASE("shifting intensities and iso together changes nothing") {
  auto v = make_ball_volume({18, 18, 18}, {8.2, 8.9, 9.1}, 5.5, 0.8);
  const auto a = marching_cubes(v, 0.5);
  for (auto& x : v.data) x += 2.0f;
  const auto b = marching_cubes(v, 2.5);
  REQUIRE(a.faces == b.faces);
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    CHECK(distance(a.vertices[i], b.vertices[i]) < 1e-5);
  }
}

TEST_CASE("output is deterministic") {
  const auto v = make_ball_volume({20, 20, 20}, {9.3, 10.1, 9.7}, 6.0, 1.0);
  const auto a = marching_cubes(v, 0.5);
  const auto b = marching_cubes(v, 0.5);
  CHECK(a.vertices == b.vertices);
  CHECK(a.faces == b.faces);
}
