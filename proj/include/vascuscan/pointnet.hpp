#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vascuscan/autodiff.hpp"
#include "vascuscan/parcel.hpp"
#include "vascuscan/tensor.hpp"

namespace vascuscan {

/// Layer widths of the point segmentation network.
///
/// Points pass through an optional input transform (a small network that
/// predicts a 3x3 alignment), the shared `local_dims` layers, an optional
/// feature transform, then the shared `feature_dims` layers whose last
/// width K is max-pooled into a global feature. Each point's transformed
/// local feature is joined with the global feature and classified by the
/// `seg_dims` head.
struct ModelConfig {
  std::size_t point_dim = 3;
  bool tnet_enabled = true;
  std::vector<std::size_t> local_dims{64, 64};
  std::vector<std::size_t> feature_dims{64, 128, 1024};
  std::vector<std::size_t> seg_dims{512, 256, 128};
  std::vector<std::size_t> tnet_point_dims{64, 128, 1024};
  std::vector<std::size_t> tnet_fc_dims{512, 256};
  std::size_t classes = 2;
  double ortho_weight = 0.001;
  /// Eval-mode batch norm normalises each cloud by its own statistics, the
  /// same way training does with one cloud per step. When false it uses the
  /// running averages instead.
  bool cloud_norm_at_inference = true;

  /// Tiny widths for tests: 8/8 local, K = 32.
  static ModelConfig miniature();

  std::size_t global_dim() const { return feature_dims.back(); }
  std::size_t local_dim() const { return local_dims.back(); }

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Named parameter store. Insertion order is fixed by the architecture and
/// defines checkpoint layout.
class ModelParams {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  ModelParams() = default;
  explicit ModelParams(ModelConfig config) : config_(std::move(config)) {}

  const ModelConfig& config() const { return config_; }

  void add(std::string name, Tensor value, bool trainable);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Rounds every value to the nearest float32 so checkpoints are lossless.
  void round_to_float();

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.config_ == b.config_) || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto& x = a.entries_[i];
      const auto& y = b.entries_[i];
      if (x.name != y.name || x.trainable != y.trainable || !(x.value == y.value)) return false;
    }
    return true;
  }

 private:
  ModelConfig config_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Fresh parameters: He-uniform weights, zero biases, identity batch-norm,
/// transform-network output layers producing exactly the identity, and a
/// down-scaled classifier layer so initial predictions are near uniform.
/// Values are rounded to float32.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct Prediction {
  Tensor log_probs;                   ///< [N x classes]
  std::vector<double> aneurysm_prob;  ///< exp(log_probs[:, 1])
};

struct ForwardResult {
  Prediction prediction;
  Tensor feature_transform;  ///< [k x k]; identity when transforms are disabled
  Tensor global_feature;     ///< [1 x K]
};

/// Points of a cloud as an [N x 3] tensor.
Tensor cloud_tensor(const PointCloud& cloud);

/// Eval-mode inference; parameters are read only.
ForwardResult forward(const ModelParams& params, const Tensor& points);
inline ForwardResult forward(const ModelParams& params, const PointCloud& cloud) {
  return forward(params, cloud_tensor(cloud));
}

/// Graph handles of one recorded forward pass.
struct ForwardGraph {
  ad::Var log_probs;
  ad::Var feature_transform;
  bool has_feature_transform = false;
  ad::Var global_feature;
  /// Tape variable for each trainable parameter, in entries() order
  /// (restricted to trainable entries).
  std::vector<ad::Var> parameters;
};

/// Records a forward pass on `tape`. Trainable parameters become tape leaves.
/// In train mode batch-norm running statistics in `params` are updated.
ForwardGraph record_forward(ad::Tape& tape, ModelParams& params, const Tensor& points,
                            ad::Mode mode);

/// NLL of the labels plus ortho_weight * ||A A^T - I||_F^2 of the feature
/// transform (if any).
ad::Var record_loss(ad::Tape& tape, const ForwardGraph& graph, std::span<const int> labels,
                    double ortho_weight);

/// Value-level loss for a finished prediction.
double loss(const Prediction& pred, std::span<const int> labels, const Tensor& feature_transform,
            double ortho_weight);

/// Labels of a cloud as class indices.
std::vector<int> cloud_targets(const PointCloud& cloud);

}  // namespace vascuscan
