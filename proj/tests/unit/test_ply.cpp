#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "vascuscan/error.hpp"
#include "vascuscan/phantom.hpp"
#include "vascuscan/ply.hpp"
#include "vascuscan/volume.hpp"

using namespace vascuscan;

namespace {

TriangleMesh roundtrip(const TriangleMesh& m) {
  std::stringstream ss;
  write_ply(ss, m);
  return read_ply(ss);
}

std::string to_text(const TriangleMesh& m) {
  std::stringstream ss;
  write_ply(ss, m);
  return ss.str();
}

}  // namespace

TEST_CASE("empty mesh round-trips") {
  const auto text = to_text(TriangleMesh{});
  CHECK(text.find("element vertex 0") != std::string::npos);
  CHECK(text.find("element face 0") != std::string::npos);
  CHECK(text.find("comment vascuscan v1") != std::string::npos);
  const auto back = roundtrip(TriangleMesh{});
  CHECK(back.vertices.empty());
  CHECK(back.faces.empty());
}

TEST_CASE("labels without heat omit the heat property") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  m.labels = std::vector<std::uint8_t>{0, 1, 1};
  const auto text = to_text(m);
  CHECK(text.find("property uchar label") != std::string::npos);
  CHECK(text.find("heat") == std::string::npos);
  const auto back = roundtrip(m);
  REQUIRE(back.labels.has_value());
  CHECK(*back.labels == *m.labels);
  CHECK_FALSE(back.heat.has_value());
}

TEST_CASE("coordinates and heat survive at float32 precision") {
  TriangleMesh m;
  m.vertices = {{0.1, 1.0 / 3.0, -2.5e-7}, {1e5, 0.7, 3.25}, {0.0, 1.0, 12.345678}};
  m.faces = {{0, 1, 2}};
  m.heat = std::vector<double>{0.0, 0.123456789, 1.0};
  const auto back = roundtrip(m);
  for (std::size_t i = 0; i < 3; ++i) {
    for (int a = 0; a < 3; ++a) {
      CHECK(back.vertices[i][a] == static_cast<double>(static_cast<float>(m.vertices[i][a])));
    }
    CHECK((*back.heat)[i] == static_cast<double>(static_cast<float>((*m.heat)[i])));
  }
}

TEST_CASE("phantom mesh save-load-save is byte-identical") {
  auto spec = PhantomSpec::for_family(PhantomFamily::A, 3);
  const auto p = generate_phantom(spec);
  auto m = label_mesh(marching_cubes(p.volume, 0.5), p.blobs, spec.label_margin);
  m.heat = std::vector<double>(m.vertices.size(), 0.25);
  const auto dir = oracle::temp_dir("ply");
  save_ply(m, dir / "a.ply");
  save_ply(load_ply(dir / "a.ply"), dir / "b.ply");
  const auto a = oracle::read_file(dir / "a.ply");
  CHECK(!a.empty());
  CHECK(a == oracle::read_file(dir / "b.ply"));
}

TEST_CASE("malformed files are rejected") {
  auto parse = [](const std::string& s) {
    std::stringstream ss(s);
    return read_ply(ss);
  };
  const std::string header =
      "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
      "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n";
  CHECK_NOTHROW(parse(header + "0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"));
  CHECK_THROWS_AS(parse("plx\n"), ValidationError);
  CHECK_THROWS_AS(parse(header + "0 0 0\n1 0 0\n"), ValidationError);
  CHECK_THROWS_AS(parse(header + "0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n9 9 9\n"), ValidationError);
  CHECK_THROWS_AS(parse(header + "0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n"), ValidationError);
  CHECK_THROWS_AS(parse(header + "0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"), ValidationError);
  const std::string binary =
      "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
  CHECK_THROWS_AS(parse(binary), ValidationError);
  try {
    load_ply("/nonexistent/file.ply");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "file_not_found");
  }
}

TEST_CASE("unknown vertex properties are skipped") {
  std::stringstream ss(
      "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float nx\n"
      "property float y\nproperty float z\nproperty uchar label\nelement face 1\n"
      "property list uchar int vertex_indices\nend_header\n"
      "0 9 0 0 1\n1 9 0 0 0\n0 9 1 0 1\n3 0 1 2\n");
  const auto m = read_ply(ss);
  CHECK(m.vertices[1].x == 1.0);
  CHECK(m.vertices[2].y == 1.0);
  CHECK(*m.labels == std::vector<std::uint8_t>{1, 0, 1});
}

TEST_CASE("point PLY has no faces") {
  const auto dir = oracle::temp_dir("pointply");
  std::vector<Vec3> pts{{0, 0, 0}, {1, 2, 3}};
  std::vector<std::uint8_t> labels{0, 1};
  save_point_ply(pts, &labels, dir / "p.ply");
  const auto m = load_ply(dir / "p.ply");
  CHECK(m.vertices.size() == 2);
  CHECK(m.faces.empty());
  CHECK(*m.labels == labels);
}
