#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

#include "oracles.hpp"
#include "vascuscan/error.hpp"
#include "vascuscan/phantom.hpp"
#include "vascuscan/volume.hpp"

using namespace vascuscan;

namespace {

void write_raw(const std::filesystem::path& p, std::size_t floats) {
  std::ofstream out(p, std::ios::binary);
  std::vector<float> zeros(floats, 0.0f);
  out.write(reinterpret_cast<const char*>(zeros.data()), static_cast<std::streamsize>(floats * 4));
}

void write_sidecar(const std::filesystem::path& p, int n) {
  std::ofstream out(p);
  out << "{\"dims\": [" << n << "," << n << "," << n
      << "], \"spacing_mm\": [1,1,1], \"origin_mm\": [0,0,0]}";
}

double mean_sphere_residual(const TriangleMesh& m, Vec3 c, double r) {
  double s = 0.0;
  for (const auto& v : m.vertices) s += std::abs(distance(v, c) - r);
  return s / static_cast<double>(m.vertices.size());
}

}  // namespace

TEST_CASE("loads a 2x2x2 zero volume") {
  const auto dir = oracle::temp_dir("vol_zero");
  write_raw(dir / "v.f32", 8);
  write_sidecar(dir / "v.json", 2);
  for (const auto& path : {dir / "v.f32", dir / "v.json", dir / "v"}) {
    const auto v = load_volume(path);
    CHECK(v.dims == std::array<int, 3>{2, 2, 2});
    CHECK(v.data == std::vector<float>(8, 0.0f));
  }
}

TEST_CASE("data length must match the sidecar dims") {
  const auto dir = oracle::temp_dir("vol_len");
  write_raw(dir / "v.f32", 999);
  write_sidecar(dir / "v.json", 10);
  try {
    load_volume(dir / "v.f32");
    FAIL("expected length mismatch");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "volume_length");
  }
}

TEST_CASE("missing sidecar names the file") {
  const auto dir = oracle::temp_dir("vol_sidecar");
  write_raw(dir / "v.f32", 8);
  try {
    load_volume(dir / "v.f32");
    FAIL("expected missing sidecar");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "missing_sidecar");
    CHECK(std::string(e.what()).find("v.json") != std::string::npos);
  }
}

TEST_CASE("phantom volume round-trips bit-exactly") {
  auto p = generate_phantom(PhantomSpec::for_family(PhantomFamily::B, 4));
  p.volume.spacing = {0.5, 0.75, 1.25};
  p.volume.origin = {-3.5, 0.1, 7.0};
  const auto dir = oracle::temp_dir("vol_rt");
  save_volume(p.volume, dir / "ph.f32");
  const auto back = load_volume(dir / "ph");
  CHECK(back.dims == p.volume.dims);
  CHECK(back.spacing == p.volume.spacing);
  CHECK(back.origin == p.volume.origin);
  CHECK(back.data == p.volume.data);
}

TEST_CASE("crop index arithmetic and identity") {
  ScalarVolume v({4, 4, 4}, {1, 2, 3}, {10, 20, 30});
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(i);
  const auto full = crop(v, {{0, 0, 0}, {4, 4, 4}});
  CHECK(full.data == v.data);
  CHECK(full.origin == v.origin);
  const auto c = crop(v, {{1, 1, 1}, {3, 3, 3}});
  CHECK(c.dims == std::array<int, 3>{2, 2, 2});
  CHECK(c.at(0, 0, 0) == v.at(1, 1, 1));
  CHECK(c.at(1, 0, 1) == v.at(2, 1, 2));
  CHECK(c.origin == std::array<double, 3>{11, 22, 33});
  CHECK_THROWS_AS(crop(v, {{0, 0, 0}, {5, 4, 4}}), ValidationError);
  CHECK_THROWS_AS(crop(v, {{2, 0, 0}, {2, 4, 4}}), ValidationError);
  CHECK_THROWS_AS(crop(v, {{-1, 0, 0}, {2, 4, 4}}), ValidationError);
}

TEST_CASE("crop of a crop equals the composed crop") {
  ScalarVolume v({9, 8, 7}, {1, 1, 1}, {0, 0, 0});
  std::mt19937 gen(2);
  for (auto& x : v.data) x = static_cast<float>(gen() % 1000);
  const CropBox outer{{1, 2, 0}, {8, 7, 6}};
  const CropBox inner{{2, 1, 1}, {6, 4, 5}};
  const CropBox composed{{3, 3, 1}, {7, 6, 5}};
  const auto twice = crop(crop(v, outer), inner);
  const auto once = crop(v, composed);
  CHECK(twice.dims == once.dims);
  CHECK(twice.origin == once.origin);
  CHECK(twice.data == once.data);
}

TEST_CASE("crop then isosurface equals isosurface of the region") {
  // Isolated ball well inside both the full grid and the crop box.
  ScalarVolume v = make_ball_volume({30, 30, 30}, {14.3, 15.1, 13.7}, 5.0, 0.8);
  v.spacing = {0.5, 0.5, 0.5};
  const auto full = marching_cubes(v, 0.5);
  const auto cropped = marching_cubes(crop(v, {{5, 5, 5}, {25, 25, 25}}), 0.5);
  REQUIRE(full.vertices.size() == cropped.vertices.size());
  REQUIRE(full.faces == cropped.faces);
  for (std::size_t i = 0; i < full.vertices.size(); ++i) {
    CHECK(distance(full.vertices[i], cropped.vertices[i]) < 1e-6);
  }
}

TEST_CASE("smoothing with zero passes is the identity") {
  const auto m = marching_cubes(make_ball_volume({20, 20, 20}, {9.5, 9.5, 9.5}, 6.0), 0.5);
  const auto s = smooth_non_shrinking(m, {0, 0.5, -0.53});
  CHECK(s.vertices == m.vertices);
  CHECK(s.faces == m.faces);
}

TEST_CASE("default smoothing keeps the sphere phantom area within 5 percent") {
  // Blurred like the vessel phantoms; roughly 5000 vertices.
  const auto m =
      marching_cubes(make_ball_volume({40, 40, 40}, {19.5, 19.5, 19.5}, 16.0, 0.7), 0.5);
  const auto s = smooth_non_shrinking(m);
  CHECK(s.faces == m.faces);
  CHECK(s.vertices.size() == m.vertices.size());
  const double a0 = surface_area(m), a1 = surface_area(s);
  CHECK(std::abs(a1 - a0) / a0 < 0.05);
}

TEST_CASE("smoothing pulls a noisy sphere toward the true surface") {
  const Vec3 c{15.5, 15.5, 15.5};
  const double r = 10.0;
  auto m = marching_cubes(make_ball_volume({32, 32, 32}, c, r, 0.8), 0.5);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (auto& v : m.vertices) v += Vec3{u(gen), u(gen), u(gen)};
  const double before = mean_sphere_residual(m, c, r);
  const double after = mean_sphere_residual(smooth_non_shrinking(m), c, r);
  CHECK(after < before);
}

TEST_CASE("smoothing validates its parameters and input") {
  const auto m = marching_cubes(make_ball_volume({12, 12, 12}, {5.5, 5.5, 5.5}, 3.0), 0.5);
  CHECK_THROWS_AS(smooth_non_shrinking(m, {-1, 0.5, -0.53}), ValidationError);
  CHECK_THROWS_AS(smooth_non_shrinking(m, {10, 1.5, -0.53}), ValidationError);
  CHECK_THROWS_AS(smooth_non_shrinking(m, {10, 0.5, -0.4}), ValidationError);
  CHECK_THROWS_AS(smooth_non_shrinking(m, {10, 0.5, 0.3}), ValidationError);
  TriangleMesh bad;
  bad.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  bad.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(smooth_non_shrinking(bad), ValidationError);
}
