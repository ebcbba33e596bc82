#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "vascuscan/aggregate.hpp"
#include "vascuscan/checkpoint.hpp"
#include "vascuscan/detect.hpp"
#include "vascuscan/error.hpp"
#include "vascuscan/parcel.hpp"
#include "vascuscan/phantom.hpp"
#include "vascuscan/ply.hpp"
#include "vascuscan/rng.hpp"

namespace vascuscan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) {
    throw ValidationError("config_schema", "config section '" + section + "' must be an object",
                          {{"section", section}});
  }
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) {
      const std::string where = section.empty() ? key : section + "." + key;
      throw ValidationError("unknown_field", "config: unknown field '" + where + "'",
                            {{"field", where}});
    }
  }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    const std::string where = section.empty() ? key : section + "." + key;
    throw ValidationError("config_schema", "config field '" + where + "': " + e.what(),
                          {{"field", where}});
  }
}

void validate_thresholds(const std::vector<double>& t) {
  if (t.empty()) throw ValidationError("config_schema", "detect.thresholds is empty");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0 && t[i] <= 1.0) || (i > 0 && !(t[i] < t[i - 1]))) {
      throw ValidationError("config_schema",
                            "detect.thresholds must lie in (0, 1] and be strictly descending");
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"schema_version", "seed", "jobs", "extract", "parcel", "train", "detect", "phantom",
                 "ball"},
             "");
  if (!j.contains("schema_version")) {
    throw ValidationError("config_schema", "config is missing schema_version");
  }
  const int version = get_field<int>(j, "schema_version", "");
  if (version != kSchemaVersion) {
    throw ValidationError("config_version",
                          "config schema_version " + std::to_string(version) +
                              " is not supported (expected " + std::to_string(kSchemaVersion) + ")",
                          {{"found", std::to_string(version)}});
  }
  RunConfig c;
  c.thresholds = default_thresholds();
  if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed", "");
  if (j.contains("jobs")) c.jobs = get_field<std::size_t>(j, "jobs", "");
  if (j.contains("extract")) {
    const json& e = j["extract"];
    check_keys(e, {"iso", "smoothing", "crop"}, "extract");
    if (e.contains("iso")) c.iso = get_field<double>(e, "iso", "extract");
    if (e.contains("smoothing")) {
      const json& s = e["smoothing"];
      check_keys(s, {"passes", "lambda", "mu"}, "extract.smoothing");
      if (s.contains("passes")) c.smoothing.passes = get_field<int>(s, "passes", "extract.smoothing");
      if (s.contains("lambda")) c.smoothing.lambda = get_field<double>(s, "lambda", "extract.smoothing");
      if (s.contains("mu")) c.smoothing.mu = get_field<double>(s, "mu", "extract.smoothing");
    }
    if (e.contains("crop")) {
      const json& b = e["crop"];
      check_keys(b, {"lo", "hi"}, "extract.crop");
      CropBox box;
      box.lo = get_field<std::array<int, 3>>(b, "lo", "extract.crop");
      box.hi = get_field<std::array<int, 3>>(b, "hi", "extract.crop");
      c.crop = box;
    }
  }
  if (j.contains("parcel")) {
    const json& p = j["parcel"];
    check_keys(p, {"cloud_size"}, "parcel");
    if (p.contains("cloud_size")) c.cloud_size = get_field<std::size_t>(p, "cloud_size", "parcel");
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    if (t.is_object() && t.contains("cloud_size")) {
      throw ValidationError("unknown_field",
                            "config: cloud size is set once, under parcel.cloud_size",
                            {{"field", "train.cloud_size"}});
    }
    c.train = train_config_from_json(t);
  }
  if (j.contains("detect")) {
    const json& d = j["detect"];
    check_keys(d, {"thresholds", "threshold", "min_overlap_fraction"}, "detect");
    if (d.contains("thresholds")) c.thresholds = get_field<std::vector<double>>(d, "thresholds", "detect");
    if (d.contains("threshold")) c.threshold = get_field<double>(d, "threshold", "detect");
    if (d.contains("min_overlap_fraction")) {
      c.min_overlap_fraction = get_field<double>(d, "min_overlap_fraction", "detect");
    }
  }
  if (j.contains("phantom")) {
    c.phantom = j["phantom"];
    if (c.phantom.is_object() && c.phantom.contains("seed")) {
      throw ValidationError("unknown_field", "config: phantom seeds come from --seed",
                            {{"field", "phantom.seed"}});
    }
    phantom_spec_from_json(c.phantom);  // validates the overrides
  }
  if (j.contains("ball")) {
    const json& b = j["ball"];
    check_keys(b, {"radius", "dims"}, "ball");
    if (b.contains("radius")) c.ball_radius = get_field<double>(b, "radius", "ball");
    if (b.contains("dims")) c.ball_dims = get_field<int>(b, "dims", "ball");
  }
  validate_thresholds(c.thresholds);
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) {
    throw ValidationError("config_schema", "detect.threshold must lie in [0, 1]");
  }
  if (c.cloud_size < 2) throw ValidationError("config_schema", "parcel.cloud_size must be >= 2");
  if (c.jobs < 1) throw ValidationError("config_schema", "jobs must be >= 1");
  c.train.plan.cloud_size = c.cloud_size;
  return c;
}

json to_json(const RunConfig& c) {
  json train = to_json(c.train);
  train.erase("cloud_size");
  json extract = {{"iso", c.iso},
                  {"smoothing",
                   {{"passes", c.smoothing.passes},
                    {"lambda", c.smoothing.lambda},
                    {"mu", c.smoothing.mu}}}};
  if (c.crop) extract["crop"] = {{"lo", c.crop->lo}, {"hi", c.crop->hi}};
  return {{"schema_version", kSchemaVersion},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"extract", extract},
          {"parcel", {{"cloud_size", c.cloud_size}}},
          {"train", train},
          {"detect",
           {{"thresholds", c.thresholds},
            {"threshold", c.threshold},
            {"min_overlap_fraction", c.min_overlap_fraction}}},
          {"phantom", c.phantom},
          {"ball", {{"radius", c.ball_radius}, {"dims", c.ball_dims}}}};
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("file_not_found", "config file not found: " + path.string(),
                          {{"path", path.string()}});
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config_parse", "cannot parse config " + path.string() + ": " + e.what(),
                          {{"path", path.string()}});
  }
  try {
    return run_config_from_json(j);
  } catch (Error& e) {
    e.context()["path"] = path.string();
    throw;
  }
}

namespace {

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) {
    throw ValidationError("file_not_found", std::string(what) + " not found: " + p.string(),
                          {{"path", p.string()}});
  }
}

void ensure_dir(const fs::path& p) {
  if (!p.empty()) fs::create_directories(p);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) ensure_dir(p.parent_path());
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("io_error", "cannot write " + p.string(), {{"path", p.string()}});
  out << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

TriangleMesh extract_mesh(const ScalarVolume& vol, const RunConfig& cfg) {
  ScalarVolume v = cfg.crop ? crop(vol, *cfg.crop) : vol;
  return smooth_non_shrinking(marching_cubes(v, cfg.iso), cfg.smoothing);
}

// Reads one mesh path per line; blank lines and '#' comments are skipped.
// Relative paths resolve against the manifest's directory.
std::vector<fs::path> read_manifest(const fs::path& manifest) {
  require_file(manifest, "mesh manifest");
  std::ifstream in(manifest);
  std::vector<fs::path> paths;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    fs::path p = line.substr(first, last - first + 1);
    if (p.is_relative()) p = manifest.parent_path() / p;
    paths.push_back(p);
  }
  if (paths.empty()) {
    throw ValidationError("empty_manifest", "mesh manifest lists no meshes: " + manifest.string(),
                          {{"path", manifest.string()}});
  }
  return paths;
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

RunConfig resolve_config(const Flags& f) {
  RunConfig cfg;
  std::string path = f.config;
  if (path.empty()) {
    if (const char* env = std::getenv("VASCUSCAN_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) {
    cfg = load_run_config(path);
  } else {
    cfg = run_config_from_json(json{{"schema_version", kSchemaVersion}});
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) {
    if (*f.jobs < 1) throw ValidationError("invalid_flag", "--jobs must be >= 1");
    cfg.jobs = *f.jobs;
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

// ---- extract ----------------------------------------------------------------

struct ExtractArgs {
  std::string volume, out, truth;
  std::optional<double> iso;
  double label_margin = 0.0;
};

int cmd_extract(const ExtractArgs& a, RunConfig cfg, std::ostream& out, std::ostream& err) {
  if (a.iso) cfg.iso = *a.iso;
  std::vector<Blob> blobs;
  if (!a.truth.empty()) {
    require_file(a.truth, "truth file");
    std::ifstream in(a.truth);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ValidationError("truth_format", "cannot parse " + a.truth + ": " + e.what(),
                            {{"path", a.truth}});
    }
    blobs = blobs_from_json(j);
  }
  const ScalarVolume vol = load_volume(a.volume);
  TriangleMesh m = extract_mesh(vol, cfg);
  if (!a.truth.empty()) m = label_mesh(std::move(m), blobs, a.label_margin);
  if (m.vertices.empty()) {
    err << json{{"warning", "empty_isosurface"},
                {"message", "no voxel crosses the iso level; writing an empty mesh"},
                {"volume", a.volume}}
               .dump()
        << "\n";
  }
  ensure_parent(a.out);
  save_ply(m, a.out);
  out << "vertices " << m.vertices.size() << " faces " << m.faces.size() << "\n";
  return 0;
}

// ---- parcel -----------------------------------------------------------------

struct ParcelArgs {
  std::string mesh, out_dir, mode = "inference";
  std::optional<std::size_t> cloud_size;
  bool dump_clouds = false;
};

json cloud_json(const PointCloud& c) {
  json j = {{"seed_vertex", c.seed}, {"size", c.size()}, {"vertex_ids", c.vertex_ids}};
  if (c.labels) j["has_aneurysm"] = c.has_aneurysm();
  return j;
}

int cmd_parcel(const ParcelArgs& a, RunConfig cfg, std::ostream& out) {
  require_file(a.mesh, "mesh");
  if (a.mode != "inference" && a.mode != "training") {
    throw ValidationError("invalid_flag", "--mode must be inference or training");
  }
  if (a.cloud_size) cfg.cloud_size = cfg.train.plan.cloud_size = *a.cloud_size;
  const TriangleMesh m = load_ply(a.mesh);
  const AdjacencyGraph g = build_adjacency(m);
  std::vector<PointCloud> clouds;
  json report = {{"mesh", fs::path(a.mesh).filename().string()},
                 {"mode", a.mode},
                 {"cloud_size", cfg.cloud_size}};
  if (a.mode == "inference") {
    ParcelPlan plan = plan_inference(m, g, derive_seed(cfg.seed, "infer"), cfg.cloud_size);
    json skipped = json::array();
    for (const auto& s : plan.skipped) skipped.push_back({{"first_vertex", s.first_vertex}, {"size", s.size}});
    report["skipped_components"] = skipped;
    report["min_coverage"] = plan.coverage.empty()
                                 ? 0u
                                 : *std::min_element(plan.coverage.begin(), plan.coverage.end());
    clouds = std::move(plan.clouds);
  } else {
    TrainingPlan plan = plan_training(m, g, derive_seed(cfg.seed, "plan"), cfg.train.plan);
    report["positives_dropped"] = plan.positives_dropped;
    clouds = std::move(plan.clouds);
  }
  json list = json::array();
  for (const auto& c : clouds) list.push_back(cloud_json(c));
  report["clouds"] = list;
  ensure_dir(a.out_dir);
  write_json(fs::path(a.out_dir) / "plan.json", report);
  if (a.dump_clouds) {
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      const auto* labels = clouds[i].labels ? &*clouds[i].labels : nullptr;
      save_point_ply(clouds[i].points, labels, fs::path(a.out_dir) / ("cloud_" + padded(i) + ".ply"));
    }
  }
  out << "clouds " << clouds.size() << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string manifest, out_dir;
  std::size_t folds = 1;
  std::optional<std::size_t> epochs, decay_step, positives, negatives, cloud_size;
  std::optional<double> lr, decay_rate, ortho_weight;
  std::string model;
};

int cmd_train(const TrainArgs& a, RunConfig cfg, std::ostream& out) {
  TrainConfig& t = cfg.train;
  if (a.epochs) t.epochs = *a.epochs;
  if (a.decay_step) t.decay_step = *a.decay_step;
  if (a.lr) t.lr = *a.lr;
  if (a.decay_rate) t.decay_rate = *a.decay_rate;
  if (a.cloud_size) cfg.cloud_size = t.plan.cloud_size = *a.cloud_size;
  if (a.positives || a.negatives) {
    if (a.positives) t.plan.positives = *a.positives;
    if (a.negatives) t.plan.negatives = *a.negatives;
    t.plan.total = t.plan.positives + t.plan.negatives;
  }
  if (!a.model.empty()) {
    const double w = t.model.ortho_weight;
    if (a.model == "miniature") t.model = ModelConfig::miniature();
    else if (a.model == "default") t.model = ModelConfig{};
    else throw ValidationError("invalid_flag", "--model must be miniature or default");
    t.model.ortho_weight = w;
  }
  if (a.ortho_weight) t.model.ortho_weight = *a.ortho_weight;
  t.validate();

  // Pre-flight: every input must exist before anything is written.
  const std::vector<fs::path> paths = read_manifest(a.manifest);
  for (const auto& p : paths) require_file(p, "mesh");
  if (a.folds < 1 || a.folds > paths.size()) {
    throw ValidationError("invalid_folds",
                          "--folds must be between 1 and the number of meshes (" +
                              std::to_string(paths.size()) + ")");
  }
  std::vector<TriangleMesh> meshes;
  for (const auto& p : paths) meshes.push_back(load_ply(p));

  const fs::path dir = a.out_dir;
  auto run_one = [&](const std::vector<std::size_t>& ids, std::uint64_t seed, const std::string& name) {
    std::vector<TriangleMesh> subset;
    for (std::size_t i : ids) subset.push_back(meshes[i]);
    TrainConfig fold_cfg = t;
    fold_cfg.seed = seed;
    TrainResult r = train(subset, fold_cfg, cfg.jobs);
    ensure_dir(dir);
    save_checkpoint(r.params, dir / name);
    write_train_log(r.log, dir / (name + ".log.jsonl"));
    const auto& last = r.log.epochs.back();
    out << name << ": epochs " << r.log.epochs.size() << " loss " << last.mean_loss
        << " accuracy " << last.accuracy << "\n";
  };

  if (a.folds == 1) {
    std::vector<std::size_t> all(meshes.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    run_one(all, cfg.seed, "model");
    return 0;
  }
  std::vector<std::size_t> ids(meshes.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const auto folds = kfold_split(ids, a.folds, derive_seed(cfg.seed, "folds"));
  json fold_json = json::array();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    json tr = json::array(), te = json::array();
    for (std::size_t i : folds[f].train) tr.push_back(paths[i].filename().string());
    for (std::size_t i : folds[f].test) te.push_back(paths[i].filename().string());
    fold_json.push_back({{"name", "fold_" + std::to_string(f)}, {"train", tr}, {"test", te}});
  }
  for (std::size_t f = 0; f < folds.size(); ++f) {
    run_one(folds[f].train, derive_seed(cfg.seed, "fold", f), "fold_" + std::to_string(f));
  }
  write_json(dir / "folds.json", {{"folds", fold_json}});
  return 0;
}

// ---- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string mesh, checkpoint, out, report;
  std::optional<std::size_t> cloud_size;
};

int cmd_predict(const PredictArgs& a, RunConfig cfg, std::ostream& out) {
  require_file(a.mesh, "mesh");
  const fs::path base = checkpoint_base(a.checkpoint);
  require_file(fs::path(base.string() + ".manifest.json"), "checkpoint manifest");
  require_file(fs::path(base.string() + ".bin"), "checkpoint blob");
  if (a.cloud_size) cfg.cloud_size = *a.cloud_size;

  const TriangleMesh m = load_ply(a.mesh);
  const ModelParams params = load_checkpoint(base);
  const AdjacencyGraph g = build_adjacency(m);
  const ParcelPlan plan = plan_inference(m, g, derive_seed(cfg.seed, "infer"), cfg.cloud_size);
  const Heatmap h = predict_heatmap(m, params, plan, cfg.jobs);
  ensure_parent(a.out);
  write_heatmap(m, h, a.out);

  json skipped = json::array();
  for (const auto& s : plan.skipped) skipped.push_back({{"first_vertex", s.first_vertex}, {"size", s.size}});
  std::size_t covered = 0;
  for (auto c : h.count) covered += c > 0;
  json report = {{"vertices", m.vertices.size()},
                 {"clouds", plan.clouds.size()},
                 {"covered_vertices", covered},
                 {"cloud_size", cfg.cloud_size},
                 {"skipped_components", skipped}};
  if (!a.report.empty()) write_json(a.report, report);
  out << report.dump() << "\n";
  return 0;
}

// ---- detect -----------------------------------------------------------------

struct DetectArgs {
  std::string heat, truth, out;
  std::optional<double> threshold;
};

json detections_json(const std::vector<Detection>& dets) {
  json arr = json::array();
  for (const auto& d : dets) {
    arr.push_back({{"size", d.size()}, {"score", d.score}, {"vertices", d.region}});
  }
  return arr;
}

TriangleMesh truth_mesh(const TriangleMesh& heat_mesh, const std::string& truth_path) {
  if (truth_path.empty()) return heat_mesh;
  TriangleMesh t = load_ply(truth_path);
  if (t.vertices.size() != heat_mesh.vertices.size() || t.faces != heat_mesh.faces) {
    throw ValidationError("mesh_mismatch", "truth mesh does not match the heatmap mesh",
                          {{"path", truth_path}});
  }
  return t;
}

int cmd_detect(const DetectArgs& a, RunConfig cfg, std::ostream& out) {
  require_file(a.heat, "heatmap mesh");
  if (!a.truth.empty()) require_file(a.truth, "truth mesh");
  if (a.threshold) cfg.threshold = *a.threshold;
  const TriangleMesh m = load_ply(a.heat);
  const Heatmap h = heatmap_from_mesh(m);
  const auto dets = binarize_and_label(m, h, cfg.threshold);
  json result = {{"threshold", cfg.threshold}, {"detections", detections_json(dets)}};
  const TriangleMesh t = truth_mesh(m, a.truth);
  if (t.labels) {
    DetectionReport r = match(dets, truth_regions(t), cfg.min_overlap_fraction);
    r.threshold = cfg.threshold;
    result["report"] = to_json(r);
  }
  write_json(a.out, result);
  out << "detections " << dets.size() << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> heat, truth;
  std::string out_json, out_csv;
};

int cmd_eval(const EvalArgs& a, const RunConfig& cfg, std::ostream& out) {
  if (a.heat.empty()) throw ValidationError("invalid_flag", "--heat needs at least one file");
  if (!a.truth.empty() && a.truth.size() != a.heat.size()) {
    throw ValidationError("invalid_flag", "--truth must list one file per --heat file");
  }
  for (const auto& p : a.heat) require_file(p, "heatmap mesh");
  for (const auto& p : a.truth) require_file(p, "truth mesh");

  std::vector<TriangleMesh> meshes;
  std::vector<Heatmap> heats;
  for (std::size_t i = 0; i < a.heat.size(); ++i) {
    const TriangleMesh hm = load_ply(a.heat[i]);
    heats.push_back(heatmap_from_mesh(hm));
    TriangleMesh t = truth_mesh(hm, a.truth.empty() ? std::string() : a.truth[i]);
    if (!t.labels) {
      throw ValidationError("missing_labels", "no labels for " + a.heat[i], {{"path", a.heat[i]}});
    }
    meshes.push_back(std::move(t));
  }
  std::vector<EvalCase> cases;
  for (std::size_t i = 0; i < meshes.size(); ++i) cases.push_back({&meshes[i], &heats[i]});
  const FrocCurve curve = froc(cases, cfg.thresholds, cfg.min_overlap_fraction);

  json per_mesh = json::array();
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    DetectionReport r = match(binarize_and_label(meshes[i], heats[i], cfg.threshold),
                              truth_regions(meshes[i]), cfg.min_overlap_fraction);
    r.threshold = cfg.threshold;
    json rj = to_json(r);
    rj["mesh"] = fs::path(a.heat[i]).filename().string();
    per_mesh.push_back(rj);
  }
  json report = {{"images", meshes.size()},
                 {"operating_threshold", cfg.threshold},
                 {"per_mesh", per_mesh},
                 {"froc", to_json(curve)}};
  if (!a.out_json.empty()) write_json(a.out_json, report);
  if (!a.out_csv.empty()) write_text(a.out_csv, froc_csv(curve));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", curve.auc);
  out << "images " << meshes.size() << " auc " << buf << "\n";
  return 0;
}

// ---- phantom ----------------------------------------------------------------

struct PhantomArgs {
  std::string out_dir, kind = "vessel", family = "A";
  std::size_t count = 1, start = 0;
  std::optional<int> blobs;
};

int cmd_phantom(const PhantomArgs& a, const RunConfig& cfg, std::ostream& out) {
  if (a.kind != "vessel" && a.kind != "ball") {
    throw ValidationError("invalid_flag", "--kind must be vessel or ball");
  }
  const PhantomFamily family = parse_family(a.family);
  const fs::path dir = a.out_dir;
  ensure_dir(dir);
  std::string manifest;
  for (std::size_t k = 0; k < a.count; ++k) {
    const std::size_t idx = a.start + k;
    const std::uint64_t seed = derive_seed(cfg.seed, "phantom", idx);
    if (a.kind == "ball") {
      Rng rng(seed);
      const double c = (cfg.ball_dims - 1) / 2.0;
      const Vec3 center{c + rng.uniform(-0.5, 0.5), c + rng.uniform(-0.5, 0.5),
                        c + rng.uniform(-0.5, 0.5)};
      const ScalarVolume vol =
          make_ball_volume({cfg.ball_dims, cfg.ball_dims, cfg.ball_dims}, center, cfg.ball_radius);
      const std::string stem = "ball_" + padded(idx);
      save_volume(vol, dir / (stem + ".f32"));
      TriangleMesh m = label_mesh(extract_mesh(vol, cfg), {}, 0.0);
      save_ply(m, dir / (stem + ".ply"));
      write_json(dir / (stem + ".truth.json"),
                 {{"center_voxels", {center.x, center.y, center.z}}, {"radius_voxels", cfg.ball_radius}});
      manifest += stem + ".ply\n";
      out << stem << " vertices " << m.vertices.size() << "\n";
      continue;
    }
    json j = cfg.phantom;
    j["family"] = to_string(family);
    j["seed"] = seed;
    if (a.blobs) j["blob_count"] = *a.blobs;
    const PhantomSpec spec = phantom_spec_from_json(j);
    const Phantom p = generate_phantom(spec);
    const std::string stem = "phantom_" + to_string(family) + "_" + padded(idx);
    save_volume(p.volume, dir / (stem + ".f32"));
    const TriangleMesh m = label_mesh(extract_mesh(p.volume, cfg), p.blobs, spec.label_margin);
    save_ply(m, dir / (stem + ".ply"));
    write_json(dir / (stem + ".spec.json"), to_json(spec));
    write_json(dir / (stem + ".truth.json"), blobs_to_json(p.blobs));
    manifest += stem + ".ply\n";
    out << stem << " vertices " << m.vertices.size() << " blobs " << p.blobs.size() << "\n";
  }
  write_text(dir / "manifest.txt", manifest);
  return 0;
}

void emit_error(std::ostream& err, const std::string& code, const std::string& message,
                const std::map<std::string, std::string>& context) {
  json ctx = json::object();
  for (const auto& [k, v] : context) ctx[k] = v;
  err << json{{"code", code}, {"message", message}, {"context", ctx}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Surface-based lesion detection on vessel meshes", "vascuscan"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config,
                 "JSON run configuration (default: $VASCUSCAN_CONFIG if set)");
  app.add_option("--seed", flags.seed, "Root seed for every random stream");
  app.add_option("--jobs", flags.jobs, "Worker threads for per-mesh and per-cloud work (default 1)");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Volume to smoothed isosurface mesh (PLY)");
  extract->add_option("--volume", ex.volume, "Volume file (.f32 with .json sidecar)")->required();
  extract->add_option("--out", ex.out, "Output PLY")->required();
  extract->add_option("--iso", ex.iso, "Iso level (overrides config)");
  extract->add_option("--truth", ex.truth, "Blob list JSON; labels vertices inside blobs");
  extract->add_option("--label-margin", ex.label_margin, "Labelling margin in mm");

  ParcelArgs pa;
  auto* parcel = app.add_subcommand("parcel", "Split a mesh into geodesic point clouds");
  parcel->add_option("--mesh", pa.mesh, "Input PLY")->required();
  parcel->add_option("--out-dir", pa.out_dir, "Output directory")->required();
  parcel->add_option("--mode", pa.mode, "inference (covering) or training (50:120 regime)");
  parcel->add_option("--cloud-size", pa.cloud_size, "Points per cloud");
  parcel->add_flag("--dump-clouds", pa.dump_clouds, "Also write each cloud as a point PLY");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train the point segmentation model");
  trainc->add_option("--manifest", ta.manifest, "Text file listing labelled mesh PLYs")->required();
  trainc->add_option("--out-dir", ta.out_dir, "Directory for checkpoints and logs")->required();
  trainc->add_option("--folds", ta.folds, "k-fold cross-validation (1 trains on everything)");
  trainc->add_option("--epochs", ta.epochs, "Epochs");
  trainc->add_option("--lr", ta.lr, "Initial learning rate");
  trainc->add_option("--decay-rate", ta.decay_rate, "Learning-rate decay factor");
  trainc->add_option("--decay-step", ta.decay_step, "Epochs between decays");
  trainc->add_option("--clouds-positive", ta.positives, "Aneurysm clouds per mesh");
  trainc->add_option("--clouds-negative", ta.negatives, "Vessel-only clouds per mesh");
  trainc->add_option("--cloud-size", ta.cloud_size, "Points per cloud");
  trainc->add_option("--model", ta.model, "Layer widths: miniature or default");
  trainc->add_option("--ortho-weight", ta.ortho_weight, "Feature-transform orthogonality weight");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Per-vertex aneurysm heatmap for a mesh");
  predict->add_option("--mesh", pr.mesh, "Input PLY")->required();
  predict->add_option("--checkpoint", pr.checkpoint, "Checkpoint path (without extension)")->required();
  predict->add_option("--out", pr.out, "Output heat PLY")->required();
  predict->add_option("--report", pr.report, "Optional JSON coverage report");
  predict->add_option("--cloud-size", pr.cloud_size, "Points per cloud");

  DetectArgs de;
  auto* detect = app.add_subcommand("detect", "Threshold a heatmap into detections");
  detect->add_option("--heat", de.heat, "Heat PLY")->required();
  detect->add_option("--truth", de.truth, "Labelled PLY (default: labels in the heat PLY)");
  detect->add_option("--out", de.out, "Output JSON")->required();
  detect->add_option("--threshold", de.threshold, "Heat threshold");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Pooled detection report and FROC curve");
  eval->add_option("--heat", ev.heat, "Heat PLYs")->required();
  eval->add_option("--truth", ev.truth, "Labelled PLYs, one per heat PLY");
  eval->add_option("--out-json", ev.out_json, "Report JSON");
  eval->add_option("--out-csv", ev.out_csv, "FROC samples CSV");

  PhantomArgs ph;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic labelled phantoms");
  phantom->add_option("--out-dir", ph.out_dir, "Output directory")->required();
  phantom->add_option("--kind", ph.kind, "vessel or ball");
  phantom->add_option("--family", ph.family, "A or B");
  phantom->add_option("--count", ph.count, "Number of phantoms");
  phantom->add_option("--start-index", ph.start, "Index of the first phantom");
  phantom->add_option("--blobs", ph.blobs, "Blobs per phantom (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "usage", e.what(), {});
    return 2;
  }

  try {
    const RunConfig cfg = resolve_config(flags);
    if (extract->parsed()) return cmd_extract(ex, cfg, out, err);
    if (parcel->parsed()) return cmd_parcel(pa, cfg, out);
    if (trainc->parsed()) return cmd_train(ta, cfg, out);
    if (predict->parsed()) return cmd_predict(pr, cfg, out);
    if (detect->parsed()) return cmd_detect(de, cfg, out);
    if (eval->parsed()) return cmd_eval(ev, cfg, out);
    if (phantom->parsed()) return cmd_phantom(ph, cfg, out);
    emit_error(err, "usage", "no subcommand given", {});
    return 2;
  } catch (const Error& e) {
    emit_error(err, e.code(), e.what(), e.context());
    return e.kind() == ErrorKind::Validation ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    emit_error(err, "io_error", e.what(), {{"path", e.path1().string()}});
    return 2;
  } catch (const std::exception& e) {
    emit_error(err, "internal", e.what(), {});
    return 1;
  }
}

}  // namespace vascuscan::cli
