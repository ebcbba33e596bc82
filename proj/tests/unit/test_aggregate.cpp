#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "vascuscan/aggregate.hpp"
#include "vascuscan/error.hpp"
#include "vascuscan/ply.hpp"

using namespace vascuscan;

namespace {

PointCloud cloud_of(std::vector<std::uint32_t> ids) {
  PointCloud c;
  c.vertex_ids = std::move(ids);
  c.points.resize(c.vertex_ids.size());
  return c;
}

}  // namespace

TEST_CASE("heat is the mean over covering clouds") {
  const std::vector<PointCloud> clouds{cloud_of({0, 1, 2}), cloud_of({2, 3})};
  const auto h = aggregate_predictions(5, clouds, {{0.2, 0.4, 0.6}, {0.8, 1.0}});
  CHECK(h.heat[0] == 0.2);
  CHECK(h.heat[2] == doctest::Approx(0.7));
  CHECK(h.heat[3] == 1.0);
  CHECK(h.heat[4] == 0.0);
  CHECK(h.count == std::vector<std::uint32_t>{1, 1, 2, 1, 0});
}

TEST_CASE("cloud order does not change the heatmap") {
  std::mt19937_64 gen(5);
  std::vector<PointCloud> clouds;
  std::vector<std::vector<double>> probs;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 30; ++c) {
    std::vector<std::uint32_t> ids;
    for (int i = 0; i < 20; ++i) ids.push_back(static_cast<std::uint32_t>(gen() % 50));
    clouds.push_back(cloud_of(ids));
    std::vector<double> p(20);
    for (auto& x : p) x = u(gen);
    probs.push_back(p);
  }
  const auto a = aggregate_predictions(50, clouds, probs);
  std::vector<std::size_t> order(30);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), gen);
  std::vector<PointCloud> c2;
  std::vector<std::vector<double>> p2;
  for (auto i : order) {
    c2.push_back(clouds[i]);
    p2.push_back(probs[i]);
  }
  const auto b = aggregate_predictions(50, c2, p2);
  CHECK(a.heat == b.heat);
  CHECK(a.count == b.count);
}

TEST_CASE("mismatched plans are rejected") {
  const std::vector<PointCloud> clouds{cloud_of({0, 7})};
  CHECK_THROWS_AS(aggregate_predictions(5, clouds, {{0.1, 0.2}}), ValidationError);
  CHECK_THROWS_AS(aggregate_predictions(10, clouds, {{0.1}}), ValidationError);
  CHECK_THROWS_AS(aggregate_predictions(10, clouds, {}), ValidationError);
}

TEST_CASE("predicted heat covers the mesh and round-trips through PLY") {
  const auto m = oracle::jittered_grid(12, 12, 3);
  const auto g = build_adjacency(m);
  const auto plan = plan_inference(m, g, 4, 40);
  const auto params = init_params(ModelConfig::miniature(), 1);
  const auto h = predict_heatmap(m, params, plan, 1);
  const auto h2 = predict_heatmap(m, params, plan, 3);
  CHECK(h.heat == h2.heat);
  CHECK(h.count == plan.coverage);
  for (double x : h.heat) CHECK((x >= 0.0 && x <= 1.0));
  const auto dir = oracle::temp_dir("aggregate");
  write_heatmap(m, h, dir / "heat.ply");
  const auto back = heatmap_from_mesh(load_ply(dir / "heat.ply"));
  REQUIRE(back.size() == h.size());
  for (std::size_t v = 0; v < h.size(); ++v) CHECK(back.heat[v] == doctest::Approx(h.heat[v]).epsilon(1e-6));
  CHECK_THROWS_AS(heatmap_from_mesh(m), ValidationError);
}
