#include "vascuscan/pointnet.hpp"

#include <cmath>
#include <functional>

#include "vascuscan/error.hpp"
#include "vascuscan/rng.hpp"

namespace vascuscan {

ModelConfig ModelConfig::miniature() {
  ModelConfig c;
  c.local_dims = {8, 8};
  c.feature_dims = {8, 16, 32};
  c.seg_dims = {16, 8};
  c.tnet_point_dims = {8, 16, 32};
  c.tnet_fc_dims = {16, 8};
  return c;
}

namespace {

void require_widths(const std::vector<std::size_t>& dims, const char* field) {
  if (dims.empty()) {
    throw ValidationError("model_config", std::string("model config: ") + field + " is empty",
                          {{"field", field}});
  }
  for (std::size_t d : dims) {
    if (d == 0) {
      throw ValidationError("model_config",
                            std::string("model config: ") + field + " has a zero width",
                            {{"field", field}});
    }
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (point_dim == 0) throw ValidationError("model_config", "model config: point_dim is zero");
  if (classes < 2) throw ValidationError("model_config", "model config: classes must be >= 2");
  if (!(ortho_weight >= 0.0) || !std::isfinite(ortho_weight)) {
    throw ValidationError("model_config", "model config: ortho_weight must be finite and >= 0");
  }
  require_widths(local_dims, "local_dims");
  require_widths(feature_dims, "feature_dims");
  require_widths(seg_dims, "seg_dims");
  if (tnet_enabled) {
    require_widths(tnet_point_dims, "tnet_point_dims");
    require_widths(tnet_fc_dims, "tnet_fc_dims");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"point_dim", c.point_dim},
          {"tnet_enabled", c.tnet_enabled},
          {"local_dims", c.local_dims},
          {"feature_dims", c.feature_dims},
          {"seg_dims", c.seg_dims},
          {"tnet_point_dims", c.tnet_point_dims},
          {"tnet_fc_dims", c.tnet_fc_dims},
          {"classes", c.classes},
          {"ortho_weight", c.ortho_weight},
          {"cloud_norm_at_inference", c.cloud_norm_at_inference}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("model_config", "model config must be a JSON object");
  ModelConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "point_dim") {
        c.point_dim = value.get<std::size_t>();
      } else if (key == "tnet_enabled") {
        c.tnet_enabled = value.get<bool>();
      } else if (key == "local_dims") {
        c.local_dims = value.get<std::vector<std::size_t>>();
      } else if (key == "feature_dims") {
        c.feature_dims = value.get<std::vector<std::size_t>>();
      } else if (key == "seg_dims") {
        c.seg_dims = value.get<std::vector<std::size_t>>();
      } else if (key == "tnet_point_dims") {
        c.tnet_point_dims = value.get<std::vector<std::size_t>>();
      } else if (key == "tnet_fc_dims") {
        c.tnet_fc_dims = value.get<std::vector<std::size_t>>();
      } else if (key == "classes") {
        c.classes = value.get<std::size_t>();
      } else if (key == "ortho_weight") {
        c.ortho_weight = value.get<double>();
      } else if (key == "cloud_norm_at_inference") {
        c.cloud_norm_at_inference = value.get<bool>();
      } else {
        throw ValidationError("unknown_field", "model config: unknown field '" + key + "'",
                              {{"field", key}});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model_config", std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

void ModelParams::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) {
    throw ValidationError("duplicate_parameter", "duplicate parameter " + name, {{"name", name}});
  }
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value), trainable});
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ValidationError("missing_parameter", "no parameter named " + name, {{"name", name}});
  }
  return entries_[it->second].value;
}

const Tensor& ModelParams::at(const std::string& name) const {
  return const_cast<ModelParams*>(this)->at(name);
}

void ModelParams::round_to_float() {
  for (auto& e : entries_) {
    for (double& v : e.value.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

namespace {

void add_linear(ModelParams& p, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                bool bias, double scale = 1.0) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in)) * scale;
  Tensor w = Tensor::matrix(in, out);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  p.add(name + ".weight", std::move(w), true);
  if (bias) p.add(name + ".bias", Tensor::matrix(1, out), true);
}

void add_point_layer(ModelParams& p, Rng& rng, const std::string& name, std::size_t in,
                     std::size_t out) {
  add_linear(p, rng, name, in, out, false);
  p.add(name + ".bn_gamma", Tensor::matrix(1, out, 1.0), true);
  p.add(name + ".bn_beta", Tensor::matrix(1, out), true);
  p.add(name + ".bn_mean", Tensor::matrix(1, out), false);
  p.add(name + ".bn_var", Tensor::matrix(1, out, 1.0), false);
}

void add_tnet(ModelParams& p, Rng& rng, const std::string& prefix, std::size_t k,
              const ModelConfig& c) {
  std::size_t in = k;
  for (std::size_t i = 0; i < c.tnet_point_dims.size(); ++i) {
    add_point_layer(p, rng, prefix + ".point" + std::to_string(i), in, c.tnet_point_dims[i]);
    in = c.tnet_point_dims[i];
  }
  for (std::size_t i = 0; i < c.tnet_fc_dims.size(); ++i) {
    add_linear(p, rng, prefix + ".fc" + std::to_string(i), in, c.tnet_fc_dims[i], true);
    in = c.tnet_fc_dims[i];
  }
  p.add(prefix + ".out.weight", Tensor::matrix(in, k * k), true);
  Tensor bias = Tensor::identity(k).reshaped({1, k * k});
  p.add(prefix + ".out.bias", std::move(bias), true);
}

}  // namespace

ModelParams init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  ModelParams p(c);
  Rng rng(seed);
  if (c.tnet_enabled) add_tnet(p, rng, "input_tnet", c.point_dim, c);
  std::size_t in = c.point_dim;
  for (std::size_t i = 0; i < c.local_dims.size(); ++i) {
    add_point_layer(p, rng, "local" + std::to_string(i), in, c.local_dims[i]);
    in = c.local_dims[i];
  }
  if (c.tnet_enabled) add_tnet(p, rng, "feature_tnet", c.local_dim(), c);
  for (std::size_t i = 0; i < c.feature_dims.size(); ++i) {
    add_point_layer(p, rng, "feature" + std::to_string(i), in, c.feature_dims[i]);
    in = c.feature_dims[i];
  }
  // First head layer sees [local | global]; its weight is stored as two blocks.
  {
    const std::size_t width = c.seg_dims[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(c.local_dim() + c.global_dim()));
    Tensor wl = Tensor::matrix(c.local_dim(), width);
    for (double& v : wl.values()) v = rng.uniform(-bound, bound);
    Tensor wg = Tensor::matrix(c.global_dim(), width);
    for (double& v : wg.values()) v = rng.uniform(-bound, bound);
    p.add("seg0.weight_local", std::move(wl), true);
    p.add("seg0.weight_global", std::move(wg), true);
    p.add("seg0.bias", Tensor::matrix(1, width), true);
    in = width;
  }
  for (std::size_t i = 1; i < c.seg_dims.size(); ++i) {
    add_linear(p, rng, "seg" + std::to_string(i), in, c.seg_dims[i], true);
    in = c.seg_dims[i];
  }
  add_linear(p, rng, "head", in, c.classes, true, 0.01);
  p.round_to_float();
  return p;
}

Tensor cloud_tensor(const PointCloud& cloud) {
  Tensor t = Tensor::matrix(cloud.size(), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) t(i, a) = cloud.points[i][a];
  }
  return t;
}

std::vector<int> cloud_targets(const PointCloud& cloud) {
  if (!cloud.labels) throw ValidationError("missing_labels", "point cloud has no labels");
  std::vector<int> out(cloud.labels->begin(), cloud.labels->end());
  return out;
}

namespace {

// Builds the network on a tape. `mut` is non-null only for recorded
// training passes, where trainable parameters become gradient leaves and
// batch-norm running statistics are updated in train mode.
class Builder {
 public:
  Builder(ad::Tape& tape, const ModelParams& params, ModelParams* mut, ad::Mode mode)
      : tape_(tape), params_(params), mut_(mut), mode_(mode) {}

  ForwardGraph run(const Tensor& points) {
    const ModelConfig& c = params_.config();
    if (points.rank() != 2 || points.cols() != c.point_dim) {
      throw ValidationError("shape_mismatch", "model input must be [N x " +
                                                  std::to_string(c.point_dim) + "], got " +
                                                  shape_string(points.shape()));
    }
    if (points.rows() == 0) throw ValidationError("empty_cloud", "model input has no points");

    ForwardGraph g;
    ad::Var x = tape_.constant(points);
    if (c.tnet_enabled) {
      ad::Var t = tnet("input_tnet", x, c.point_dim);
      x = ad::matmul(tape_, x, t);
    }
    for (std::size_t i = 0; i < c.local_dims.size(); ++i) {
      x = point_layer("local" + std::to_string(i), x);
    }
    if (c.tnet_enabled) {
      g.feature_transform = tnet("feature_tnet", x, c.local_dim());
      g.has_feature_transform = true;
      x = ad::matmul(tape_, x, g.feature_transform);
    }
    ad::Var local = x;
    for (std::size_t i = 0; i < c.feature_dims.size(); ++i) {
      x = point_layer("feature" + std::to_string(i), x);
    }
    g.global_feature = ad::max_pool_points(tape_, x);

    ad::Var global_part =
        ad::add_row(tape_, ad::matmul(tape_, g.global_feature, param("seg0.weight_global")),
                    param("seg0.bias"));
    ad::Var h = ad::relu(
        tape_, ad::add_row(tape_, ad::matmul(tape_, local, param("seg0.weight_local")), global_part));
    for (std::size_t i = 1; i < c.seg_dims.size(); ++i) {
      h = ad::relu(tape_, linear("seg" + std::to_string(i), h));
    }
    g.log_probs = ad::log_softmax(tape_, linear("head", h));
    g.parameters = std::move(leaves_);
    return g;
  }

 private:
  ad::Var param(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    ad::Var v = tape_.constant(params_.at(name));
    vars_.emplace(name, v);
    return v;
  }

  ad::Var linear(const std::string& name, ad::Var x) {
    return ad::add_row(tape_, ad::matmul(tape_, x, param(name + ".weight")),
                       param(name + ".bias"));
  }

  ad::Var point_layer(const std::string& name, ad::Var x) {
    ad::Var y = ad::matmul(tape_, x, param(name + ".weight"));
    ad::BatchNormStats stats;
    stats.mean = &params_.at(name + ".bn_mean");
    stats.variance = &params_.at(name + ".bn_var");
    stats.batch_stats_in_eval = params_.config().cloud_norm_at_inference;
    if (mut_ && mode_ == ad::Mode::Train) {
      stats.update_mean = &mut_->at(name + ".bn_mean");
      stats.update_variance = &mut_->at(name + ".bn_var");
    }
    y = ad::batch_norm_points(tape_, y, param(name + ".bn_gamma"), param(name + ".bn_beta"),
                              stats, mode_);
    return ad::relu(tape_, y);
  }

  ad::Var tnet(const std::string& prefix, ad::Var x, std::size_t k) {
    const ModelConfig& c = params_.config();
    ad::Var h = x;
    for (std::size_t i = 0; i < c.tnet_point_dims.size(); ++i) {
      h = point_layer(prefix + ".point" + std::to_string(i), h);
    }
    h = ad::max_pool_points(tape_, h);
    for (std::size_t i = 0; i < c.tnet_fc_dims.size(); ++i) {
      h = ad::relu(tape_, linear(prefix + ".fc" + std::to_string(i), h));
    }
    h = linear(prefix + ".out", h);
    return ad::reshape(tape_, h, {k, k});
  }

 public:
  // Registers trainable parameters as leaves up front so their order on the
  // tape and in ForwardGraph::parameters matches entries().
  void declare_leaves() {
    if (!mut_) return;
    for (const auto& e : params_.entries()) {
      if (!e.trainable) continue;
      ad::Var v = tape_.parameter(e.value);
      vars_.emplace(e.name, v);
      leaves_.push_back(v);
    }
  }

 private:
  ad::Tape& tape_;
  const ModelParams& params_;
  ModelParams* mut_;
  ad::Mode mode_;
  std::map<std::string, ad::Var> vars_;
  std::vector<ad::Var> leaves_;
};

}  // namespace

ForwardGraph record_forward(ad::Tape& tape, ModelParams& params, const Tensor& points,
                            ad::Mode mode) {
  Builder b(tape, params, &params, mode);
  b.declare_leaves();
  return b.run(points);
}

ForwardResult forward(const ModelParams& params, const Tensor& points) {
  ad::Tape tape;
  Builder b(tape, params, nullptr, ad::Mode::Eval);
  ForwardGraph g = b.run(points);
  ForwardResult r;
  r.prediction.log_probs = tape.value(g.log_probs);
  const Tensor& lp = r.prediction.log_probs;
  r.prediction.aneurysm_prob.resize(lp.rows());
  for (std::size_t i = 0; i < lp.rows(); ++i) r.prediction.aneurysm_prob[i] = std::exp(lp(i, 1));
  r.feature_transform = g.has_feature_transform ? tape.value(g.feature_transform)
                                                : Tensor::identity(params.config().local_dim());
  r.global_feature = tape.value(g.global_feature);
  return r;
}

ad::Var record_loss(ad::Tape& tape, const ForwardGraph& graph, std::span<const int> labels,
                    double ortho_weight) {
  ad::Var l = ad::nll(tape, graph.log_probs, labels);
  if (graph.has_feature_transform && ortho_weight > 0.0) {
    l = ad::add_scaled(tape, l, ad::orthogonality_penalty(tape, graph.feature_transform),
                       ortho_weight);
  }
  return l;
}

double loss(const Prediction& pred, std::span<const int> labels, const Tensor& feature_transform,
            double ortho_weight) {
  const Tensor& lp = pred.log_probs;
  if (labels.size() != lp.rows()) {
    throw ValidationError("shape_mismatch", "label count does not match prediction rows");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= lp.cols()) {
      throw ValidationError("invalid_label", "label out of range");
    }
    total -= lp(i, static_cast<std::size_t>(labels[i]));
  }
  double value = total / static_cast<double>(labels.size());
  if (ortho_weight > 0.0 && !feature_transform.empty()) {
    Tensor m = matmul_a_bt(feature_transform, feature_transform);
    double pen = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) -= 1.0;
    for (double v : m.values()) pen += v * v;
    value += ortho_weight * pen;
  }
  return value;
}

}  // namespace vascuscan
