#include "vascuscan/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vascuscan/adam.hpp"
#include "vascuscan/error.hpp"
#include "vascuscan/parallel.hpp"
#include "vascuscan/rng.hpp"

namespace vascuscan {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train_config", "epochs must be >= 1");
  if (decay_step < 1) throw ValidationError("train_config", "decay_step must be >= 1");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) {
    throw ValidationError("train_config", "decay_rate must be in (0, 1]");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("train_config", "lr must be > 0");
  if (plan.cloud_size < 2) throw ValidationError("train_config", "cloud_size must be >= 2");
  model.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"decay_rate", c.decay_rate},
          {"decay_step", c.decay_step},
          {"seed", c.seed},
          {"clouds_total", c.plan.total},
          {"clouds_positive", c.plan.positives},
          {"clouds_negative", c.plan.negatives},
          {"cloud_size", c.plan.cloud_size},
          {"min_aneurysm_points", c.plan.min_aneurysm_points},
          {"retry_cap", c.plan.retry_cap},
          {"model", to_json(c.model)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ValidationError("train_config", "train config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "decay_rate") c.decay_rate = v.get<double>();
      else if (key == "decay_step") c.decay_step = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "clouds_total") c.plan.total = v.get<std::size_t>();
      else if (key == "clouds_positive") c.plan.positives = v.get<std::size_t>();
      else if (key == "clouds_negative") c.plan.negatives = v.get<std::size_t>();
      else if (key == "cloud_size") c.plan.cloud_size = v.get<std::size_t>();
      else if (key == "min_aneurysm_points") c.plan.min_aneurysm_points = v.get<std::size_t>();
      else if (key == "retry_cap") c.plan.retry_cap = v.get<std::size_t>();
      else if (key == "model") c.model = model_config_from_json(v);
      else {
        throw ValidationError("unknown_field", "train config: unknown field '" + key + "'",
                              {{"field", key}});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("train_config", std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double effective_lr(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(cfg.decay_rate, static_cast<double>(epoch / cfg.decay_step));
}

std::string train_log_jsonl(const TrainLog& log) {
  std::ostringstream os;
  for (const auto& r : log.epochs) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"mean_loss", r.mean_loss},
                        {"accuracy", r.accuracy},
                        {"lr", r.lr}};
    os << j.dump() << "\n";
  }
  return os.str();
}

void write_train_log(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("io_error", "cannot write " + path.string(), {{"path", path.string()}});
  out << train_log_jsonl(log);
}

std::vector<PointCloud> prepare_training_clouds(const std::vector<TriangleMesh>& meshes,
                                                const TrainConfig& cfg, std::size_t jobs) {
  std::vector<std::vector<PointCloud>> per_mesh(meshes.size());
  parallel_for(meshes.size(), jobs, [&](std::size_t i) {
    try {
      AdjacencyGraph g = build_adjacency(meshes[i]);
      per_mesh[i] = plan_training(meshes[i], g, derive_seed(cfg.seed, "plan", i), cfg.plan).clouds;
    } catch (Error& e) {
      e.context()["mesh_index"] = std::to_string(i);
      throw;
    }
  });
  std::vector<PointCloud> all;
  for (auto& v : per_mesh) {
    for (auto& c : v) all.push_back(std::move(c));
  }
  return all;
}

TrainResult train(const std::vector<TriangleMesh>& meshes, const TrainConfig& cfg,
                  std::size_t jobs, const EpochCallback& on_epoch) {
  cfg.validate();
  if (meshes.empty()) throw ValidationError("no_meshes", "training needs at least one mesh");
  return train_on_clouds(prepare_training_clouds(meshes, cfg, jobs), cfg, on_epoch);
}

TrainResult train_on_clouds(const std::vector<PointCloud>& clouds, const TrainConfig& cfg,
                            const EpochCallback& on_epoch) {
  cfg.validate();
  if (clouds.empty()) throw ValidationError("no_clouds", "training needs at least one cloud");
  std::vector<Tensor> inputs;
  std::vector<std::vector<int>> targets;
  inputs.reserve(clouds.size());
  for (const auto& c : clouds) {
    inputs.push_back(cloud_tensor(c));
    targets.push_back(cloud_targets(c));
  }

  TrainResult result{init_params(cfg.model, derive_seed(cfg.seed, "init")), {}};
  ModelParams& params = result.params;
  std::vector<Tensor*> trainable;
  for (auto& e : params.entries()) {
    if (e.trainable) trainable.push_back(&e.value);
  }
  AdamState state;
  std::vector<std::size_t> order(clouds.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    AdamOptions opts;
    opts.lr = effective_lr(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, "shuffle", epoch));
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0, points = 0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const std::size_t ci = order[step];
      try {
        ad::Tape tape;
        ForwardGraph g = record_forward(tape, params, inputs[ci], ad::Mode::Train);
        ad::Var l = record_loss(tape, g, targets[ci], cfg.model.ortho_weight);
        tape.backward(l);
        std::vector<Tensor> grads;
        grads.reserve(g.parameters.size());
        for (ad::Var v : g.parameters) {
          grads.push_back(tape.grad(v));
          if (!grads.back().all_finite()) throw NonFiniteError("gradient");
        }
        loss_sum += tape.value(l)[0];
        const Tensor& lp = tape.value(g.log_probs);
        for (std::size_t i = 0; i < lp.rows(); ++i) {
          std::size_t best = 0;
          for (std::size_t k = 1; k < lp.cols(); ++k) {
            if (lp(i, k) > lp(i, best)) best = k;
          }
          if (static_cast<int>(best) == targets[ci][i]) ++correct;
        }
        points += lp.rows();
        adam_step(trainable, grads, state, opts);
        params.round_to_float();
        for (Tensor* p : trainable) {
          if (!p->all_finite()) throw NonFiniteError("parameter update");
        }
      } catch (Error& e) {
        if (e.code() == "non_finite") {
          throw ComputationError("non_finite_loss",
                                 std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                     ", cloud " + std::to_string(ci),
                                 {{"epoch", std::to_string(epoch)},
                                  {"cloud", std::to_string(ci)}});
        }
        throw;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(order.size());
    rec.accuracy = static_cast<double>(correct) / static_cast<double>(points);
    rec.lr = opts.lr;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::vector<Fold> kfold_split(const std::vector<std::size_t>& ids, std::size_t k,
                              std::uint64_t seed) {
  if (k < 1 || k > ids.size()) {
    throw ValidationError("invalid_folds",
                          "fold count " + std::to_string(k) + " must be in [1, " +
                              std::to_string(ids.size()) + "]",
                          {{"k", std::to_string(k)}});
  }
  std::vector<std::size_t> shuffled = ids;
  Rng rng(seed);
  rng.shuffle(shuffled);
  std::vector<Fold> folds(k);
  const std::size_t base = ids.size() / k, extra = ids.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                         shuffled.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].test.begin(), folds[g].test.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

}  // namespace vascuscan
