#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "vascuscan/error.hpp"
#include "vascuscan/pointnet.hpp"

using namespace vascuscan;
namespace ad = vascuscan::ad;

namespace {

Tensor random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return oracle::random_tensor({n, 3}, gen);
}

std::vector<int> random_labels(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<int> out(n);
  for (auto& l : out) l = static_cast<int>(gen() % 2);
  return out;
}

// Moves parameters off their special initial values (zero transform
// weights, unit gamma) so every path carries gradient.
void jitter(ModelParams& p, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& e : p.entries()) {
    if (!e.trainable) continue;
    for (double& v : e.value.values()) v += u(gen);
  }
}

double train_loss(ModelParams p, const Tensor& x, const std::vector<int>& labels) {
  ad::Tape t;
  const auto g = record_forward(t, p, x, ad::Mode::Train);
  return t.value(record_loss(t, g, labels, p.config().ortho_weight))[0];
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor out = x;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(perm[i], j);
  return out;
}

}  // namespace

TEST_CASE("config JSON round-trips and rejects unknown fields") {
  auto c = ModelConfig::miniature();
  c.ortho_weight = 0.25;
  c.tnet_enabled = false;
  CHECK(model_config_from_json(to_json(c)) == c);
  auto j = to_json(c);
  j["dropout"] = 0.5;
  CHECK_THROWS_AS(model_config_from_json(j), ValidationError);
  c.local_dims.clear();
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("initial parameters are deterministic and float-representable") {
  const auto a = init_params(ModelConfig::miniature(), 5);
  const auto b = init_params(ModelConfig::miniature(), 5);
  const auto c = init_params(ModelConfig::miniature(), 6);
  CHECK(a == b);
  CHECK(!(a == c));
  for (const auto& e : a.entries()) {
    for (double v : e.value.values()) CHECK(v == static_cast<double>(static_cast<float>(v)));
  }
  CHECK(a.entries().front().name == "input_tnet.point0.weight");
  CHECK(a.entries().back().name == "head.bias");
  CHECK(!a.contains("seg1.bn_gamma"));
  CHECK_THROWS_AS(a.at("nope"), ValidationError);
}

TEST_CASE("transforms start as the identity and outputs start near uniform") {
  const auto p = init_params(ModelConfig::miniature(), 1);
  const auto r = forward(p, random_points(64, 2));
  CHECK(r.feature_transform == Tensor::identity(8));
  CHECK(r.prediction.log_probs.rows() == 64);
  for (double q : r.prediction.aneurysm_prob) CHECK(std::abs(q - 0.5) < 0.05);
  CHECK(r.global_feature.shape() == std::vector<std::size_t>{1, 32});
}

TEST_CASE("end-to-end gradient matches finite differences") {
  for (bool tnet : {true, false}) {
    CAPTURE(tnet);
    auto cfg = ModelConfig::miniature();
    cfg.tnet_enabled = tnet;
    cfg.ortho_weight = 0.05;
    auto p = init_params(cfg, 3);
    jitter(p, 4);
    const Tensor x = random_points(16, 5);
    const auto labels = random_labels(16, 6);

    ModelParams work = p;
    ad::Tape t;
    const auto g = record_forward(t, work, x, ad::Mode::Train);
    t.backward(record_loss(t, g, labels, cfg.ortho_weight));

    std::mt19937_64 pick(7);
    std::size_t leaf = 0;
    double worst = 0.0;
    for (std::size_t e = 0; e < p.entries().size(); ++e) {
      if (!p.entries()[e].trainable) continue;
      const Tensor analytic = t.grad(g.parameters[leaf++]);
      for (int s = 0; s < 6; ++s) {
        const std::size_t i = pick() % analytic.size();
        ModelParams q = p;
        const double h = 1e-6;
        q.entries()[e].value[i] += h;
        const double up = train_loss(q, x, labels);
        q.entries()[e].value[i] -= 2 * h;
        const double down = train_loss(q, x, labels);
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-4});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
      }
    }
    CHECK(leaf == g.parameters.size());
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("predictions are permutation equivariant and the global feature invariant") {
  auto p = init_params(ModelConfig::miniature(), 9);
  jitter(p, 10);
  const Tensor x = random_points(200, 11);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(12);
  std::shuffle(perm.begin(), perm.end(), gen);
  const auto a = forward(p, x);
  const auto b = forward(p, permute_rows(x, perm));
  CHECK(a.global_feature == b.global_feature);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(b.prediction.aneurysm_prob[i] == a.prediction.aneurysm_prob[perm[i]]);
  }
}

TEST_CASE("recorded eval pass matches forward and leaves statistics alone") {
  auto p = init_params(ModelConfig::miniature(), 13);
  jitter(p, 14);
  const Tensor x = random_points(40, 15);
  const auto r = forward(p, x);
  ModelParams q = p;
  ad::Tape t;
  const auto g = record_forward(t, q, x, ad::Mode::Eval);
  CHECK(t.value(g.log_probs) == r.prediction.log_probs);
  CHECK(q == p);
}

TEST_CASE("train pass updates running statistics only") {
  auto p = init_params(ModelConfig::miniature(), 16);
  ModelParams q = p;
  ad::Tape t;
  record_forward(t, q, random_points(30, 17), ad::Mode::Train);
  for (std::size_t e = 0; e < p.entries().size(); ++e) {
    const bool changed = !(p.entries()[e].value == q.entries()[e].value);
    CHECK(changed == !p.entries()[e].trainable);
  }
}

TEST_CASE("running-statistic inference differs from cloud normalisation") {
  auto cfg = ModelConfig::miniature();
  auto p = init_params(cfg, 18);
  jitter(p, 19);
  const Tensor x = random_points(50, 20);
  const auto cloud = forward(p, x);
  cfg.cloud_norm_at_inference = false;
  ModelParams running(cfg);
  for (const auto& e : p.entries()) running.add(e.name, e.value, e.trainable);
  const auto r = forward(running, x);
  CHECK(!(r.prediction.log_probs == cloud.prediction.log_probs));
}

TEST_CASE("value-level loss agrees with the recorded loss") {
  auto p = init_params(ModelConfig::miniature(), 21);
  jitter(p, 22);
  const Tensor x = random_points(25, 23);
  const auto labels = random_labels(25, 24);
  const auto r = forward(p, x);
  ModelParams q = p;
  ad::Tape t;
  const auto g = record_forward(t, q, x, ad::Mode::Eval);
  const double recorded = t.value(record_loss(t, g, labels, 0.3))[0];
  CHECK(loss(r.prediction, labels, r.feature_transform, 0.3) == doctest::Approx(recorded));
}

TEST_CASE("input validation") {
  const auto p = init_params(ModelConfig::miniature(), 1);
  CHECK_THROWS_AS(forward(p, Tensor::matrix(4, 2)), ValidationError);
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(cloud_targets(c), ValidationError);
  c.labels = std::vector<std::uint8_t>{0, 1};
  CHECK(cloud_targets(c) == std::vector<int>{0, 1});
  CHECK(cloud_tensor(c)(1, 0) == 1.0);
}
