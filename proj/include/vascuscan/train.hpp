#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vascuscan/mesh.hpp"
#include "vascuscan/parcel.hpp"
#include "vascuscan/pointnet.hpp"

namespace vascuscan {

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 0.001;
  double decay_rate = 0.5;
  std::size_t decay_step = 20;
  std::uint64_t seed = 0;
  TrainingPlanOptions plan;
  ModelConfig model;  ///< also carries ortho_weight

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Fills fields present in `j` over `base`; unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// lr * decay_rate^floor(epoch / decay_step).
double effective_lr(std::size_t epoch, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;  ///< fraction of points whose arg-max class equals the label
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

/// One JSON object per line. Wall time is left out so logs of identical
/// runs are byte-identical.
void write_train_log(const TrainLog& log, const std::filesystem::path& path);
std::string train_log_jsonl(const TrainLog& log);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Builds one training plan per mesh (stream "plan", mesh index) and trains
/// on the union of their clouds. `jobs` bounds parallel cloud preparation.
TrainResult train(const std::vector<TriangleMesh>& meshes, const TrainConfig& cfg,
                  std::size_t jobs = 1, const EpochCallback& on_epoch = {});

/// Trains on prepared clouds. Each epoch visits every cloud once in an order
/// shuffled by stream ("shuffle", epoch), one Adam step per cloud.
TrainResult train_on_clouds(const std::vector<PointCloud>& clouds, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {});

/// Training clouds for all meshes, concatenated in mesh order.
std::vector<PointCloud> prepare_training_clouds(const std::vector<TriangleMesh>& meshes,
                                                const TrainConfig& cfg, std::size_t jobs = 1);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Shuffles ids with `seed`, then cuts them into k contiguous test folds
/// whose sizes differ by at most one. Each fold's train set is the rest, in
/// ascending order.
std::vector<Fold> kfold_split(const std::vector<std::size_t>& ids, std::size_t k,
                              std::uint64_t seed);

}  // namespace vascuscan
