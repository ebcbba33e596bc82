#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vascuscan/error.hpp"
#include "vascuscan/mesh.hpp"
#include "vascuscan/phantom.hpp"
#include "vascuscan/volume.hpp"

using namespace vascuscan;

TEST_CASE("phantoms are deterministic in their spec") {
  const auto spec = PhantomSpec::for_family(PhantomFamily::A, 11);
  const auto a = generate_phantom(spec);
  const auto b = generate_phantom(spec);
  CHECK(a.volume.data == b.volume.data);
  REQUIRE(a.blobs.size() == b.blobs.size());
  for (std::size_t i = 0; i < a.blobs.size(); ++i) CHECK(a.blobs[i].center == b.blobs[i].center);
  const auto c = generate_phantom(PhantomSpec::for_family(PhantomFamily::A, 12));
  CHECK(c.volume.data != a.volume.data);
}

TEST_CASE("families differ in their defaults") {
  const auto a = PhantomSpec::for_family(PhantomFamily::A, 0);
  const auto b = PhantomSpec::for_family(PhantomFamily::B, 0);
  CHECK(b.tube_radius_max > a.tube_radius_max);
  CHECK(b.max_turn_deg > a.max_turn_deg);
  CHECK(parse_family("b") == PhantomFamily::B);
  CHECK(to_string(PhantomFamily::A) == "A");
  CHECK_THROWS_AS(parse_family("C"), ValidationError);
}

TEST_CASE("blobs sit on the surface of their host tube") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto spec = PhantomSpec::for_family(seed % 2 ? PhantomFamily::B : PhantomFamily::A, seed);
    spec.blob_count = 2;
    const auto p = generate_phantom(spec);
    REQUIRE(p.blobs.size() == 2);
    for (const auto& bl : p.blobs) {
      CHECK(bl.radius > bl.tube_radius);
      double nearest = 1e9;
      for (const auto& t : p.tubes) {
        const Vec3 ab = t.b - t.a;
        double u = dot(bl.center - t.a, ab) / dot(ab, ab);
        u = std::clamp(u, 0.0, 1.0);
        nearest = std::min(nearest, distance(bl.center, t.a + ab * u) - t.radius);
      }
      CHECK(std::abs(nearest) < 1e-6);
    }
  }
}

TEST_CASE("extracted phantom surface carries both labels") {
  const auto p = generate_phantom(PhantomSpec::for_family(PhantomFamily::A, 3));
  auto m = smooth_non_shrinking(marching_cubes(p.volume, 0.5));
  m = label_mesh(std::move(m), p.blobs, 1.0);
  REQUIRE(m.labels.has_value());
  std::size_t positives = 0;
  for (auto l : *m.labels) positives += l;
  CHECK(positives > 50);
  CHECK(positives < m.vertices.size() / 2);
  CHECK(m.vertices.size() > 2000);
}

TEST_CASE("labelling uses radius plus margin") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {2.0, 0, 0}, {2.5, 0, 0}, {3.01, 0, 0}};
  const Blob b{{0, 0, 0}, 2.0, 1.0};
  const auto none = label_mesh(m, std::span(&b, 1), 0.0);
  CHECK(*none.labels == std::vector<std::uint8_t>{1, 1, 0, 0});
  const auto wide = label_mesh(m, std::span(&b, 1), 1.0);
  CHECK(*wide.labels == std::vector<std::uint8_t>{1, 1, 1, 0});
}

TEST_CASE("gaussian blur preserves mass away from the border") {
  ScalarVolume v({21, 21, 21}, {1, 1, 1}, {0, 0, 0});
  v.at(10, 10, 10) = 1.0f;
  gaussian_blur(v, 1.0);
  double total = 0.0;
  for (float x : v.data) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(v.at(9, 10, 10) == doctest::Approx(v.at(11, 10, 10)));
  CHECK(v.at(10, 9, 10) == doctest::Approx(v.at(10, 10, 11)));
}

TEST_CASE("spec JSON round-trips and rejects bad specs") {
  auto spec = PhantomSpec::for_family(PhantomFamily::B, 99);
  spec.blob_count = 3;
  const auto back = phantom_spec_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  auto bad = spec;
  bad.tube_count = 0;
  CHECK_THROWS_AS(generate_phantom(bad), ValidationError);
  bad = spec;
  bad.dims = {4, 64, 64};
  CHECK_THROWS_AS(generate_phantom(bad), ValidationError);
}

TEST_CASE("blob JSON round-trips") {
  const std::vector<Blob> blobs{{{1.5, 2.5, 3.5}, 4.25, 2.0}, {{-1, 0, 7}, 3.0, 1.5}};
  const auto back = blobs_from_json(blobs_to_json(blobs));
  REQUIRE(back.size() == 2);
  CHECK(back[1].center == blobs[1].center);
  CHECK(back[0].radius == blobs[0].radius);
  CHECK(back[0].tube_radius == blobs[0].tube_radius);
}

TEST_CASE("a single straight tube gives a capped, closed surface") {
  auto spec = PhantomSpec::for_family(PhantomFamily::A, 2);
  spec.tube_count = 1;
  spec.segments_per_tube = 3;
  spec.max_turn_deg = 0.0;
  spec.blob_count = 0;
  const auto p = generate_phantom(spec);
  REQUIRE(p.tubes.size() == 3);
  const Vec3 d0 = p.tubes[0].b - p.tubes[0].a;
  const Vec3 d2 = p.tubes[2].b - p.tubes[2].a;
  CHECK(norm(cross(d0, d2)) < 1e-9 * norm(d0) * norm(d2));
  const auto m = marching_cubes(p.volume, 0.5);
  CHECK(euler_characteristic(m) == 2);
  const auto labelled = label_mesh(m, p.blobs, 0.0);
  for (auto l : *labelled.labels) CHECK(l == 0);
}

TEST_CASE("a large blob protrudes beyond the tubes") {
  auto spec = PhantomSpec::for_family(PhantomFamily::A, 8);
  spec.tube_count = 1;
  spec.blob_radius_min = spec.blob_radius_max = 3.0 * spec.tube_radius_max;
  const auto p = generate_phantom(spec);
  REQUIRE(p.blobs.size() == 1);
  const auto& bl = p.blobs[0];
  auto axis_point = [](const Capsule& c, const Vec3& q) {
    const Vec3 ab = c.b - c.a;
    return c.a + ab * std::clamp(dot(q - c.a, ab) / dot(ab, ab), 0.0, 1.0);
  };
  const Capsule* host = &p.tubes.front();
  for (const auto& c : p.tubes) {
    if (distance(bl.center, axis_point(c, bl.center)) <
        distance(bl.center, axis_point(*host, bl.center)))
      host = &c;
  }
  const Vec3 away = bl.center - axis_point(*host, bl.center);
  const Vec3 tip = bl.center + away * (bl.radius / norm(away));
  double clearance = 1e9;
  for (const auto& c : p.tubes) clearance = std::min(clearance, distance(tip, axis_point(c, tip)) - c.radius);
  CHECK(clearance > 1.0);
}

TEST_CASE("each isolated blob yields exactly one labelled region") {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    auto spec = PhantomSpec::for_family(seed % 2 ? PhantomFamily::B : PhantomFamily::A, seed);
    spec.blob_count = 1 + static_cast<int>(seed % 2);
    const auto p = generate_phantom(spec);
    const auto m = label_mesh(marching_cubes(p.volume, 0.5), p.blobs, spec.label_margin);
    std::vector<bool> mask(m.vertices.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (*m.labels)[i] == 1;
    CHECK(connected_regions(m, mask).size() == p.blobs.size());
  }
}

TEST_CASE("families differ in tube radius location") {
  std::vector<double> a, b;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (const auto& t : generate_phantom(PhantomSpec::for_family(PhantomFamily::A, seed)).tubes)
      a.push_back(t.radius);
    for (const auto& t : generate_phantom(PhantomSpec::for_family(PhantomFamily::B, seed)).tubes)
      b.push_back(t.radius);
  }
  // Mann-Whitney U statistic as a fraction of all pairs.
  double wins = 0.0;
  for (double x : a)
    for (double y : b) wins += y > x ? 1.0 : (y == x ? 0.5 : 0.0);
  CHECK(wins / static_cast<double>(a.size() * b.size()) > 0.8);
}
