#include "vascuscan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vascuscan/error.hpp"

namespace vascuscan {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

fs::path with_suffix(const fs::path& base, const char* suffix) {
  return fs::path(base.string() + suffix);
}

}  // namespace

fs::path checkpoint_base(const fs::path& p) {
  const std::string s = p.string();
  for (const char* suffix : {".manifest.json", ".bin"}) {
    const std::string suf = suffix;
    if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
      return fs::path(s.substr(0, s.size() - suf.size()));
    }
  }
  return p;
}

void save_checkpoint(const ModelParams& params, const fs::path& base_in) {
  const fs::path base = checkpoint_base(base_in);
  if (base.has_parent_path() && !base.parent_path().empty()) {
    fs::create_directories(base.parent_path());
  }
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<float> blob;
  for (const auto& e : params.entries()) {
    tensors.push_back({{"name", e.name},
                       {"shape", e.value.shape()},
                       {"offset", blob.size() * sizeof(float)},
                       {"trainable", e.trainable}});
    for (double v : e.value.values()) blob.push_back(static_cast<float>(v));
  }
  nlohmann::json manifest = {{"format", "vascuscan-checkpoint"},
                             {"format_version", kCheckpointVersion},
                             {"config", to_json(params.config())},
                             {"dtype", "float32"},
                             {"tensors", tensors},
                             {"total_bytes", blob.size() * sizeof(float)}};

  const fs::path bin = with_suffix(base, ".bin");
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw ValidationError("io_error", "cannot write " + bin.string(), {{"path", bin.string()}});
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw ValidationError("io_error", "write failed: " + bin.string(), {{"path", bin.string()}});

  const fs::path man = with_suffix(base, ".manifest.json");
  std::ofstream mout(man);
  if (!mout) throw ValidationError("io_error", "cannot write " + man.string(), {{"path", man.string()}});
  mout << manifest.dump(2) << "\n";
}

ModelParams load_checkpoint(const fs::path& base_in) {
  const fs::path base = checkpoint_base(base_in);
  const fs::path man = with_suffix(base, ".manifest.json");
  const fs::path bin = with_suffix(base, ".bin");
  std::ifstream min(man);
  if (!min) {
    throw ValidationError("file_not_found", "checkpoint manifest not found: " + man.string(),
                          {{"path", man.string()}});
  }
  nlohmann::json j;
  try {
    min >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint_manifest", "cannot parse " + man.string() + ": " + e.what(),
                          {{"path", man.string()}});
  }

  ModelConfig config;
  std::vector<std::tuple<std::string, std::vector<std::size_t>, std::size_t, bool>> layout;
  try {
    if (j.value("format", std::string()) != "vascuscan-checkpoint") {
      throw ValidationError("checkpoint_manifest", "not a vascuscan checkpoint: " + man.string(),
                            {{"path", man.string()}});
    }
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw ValidationError("checkpoint_version",
                            "checkpoint format version " + std::to_string(version) +
                                " is not supported (expected " +
                                std::to_string(kCheckpointVersion) + ")",
                            {{"path", man.string()}, {"found", std::to_string(version)}});
    }
    if (j.at("dtype").get<std::string>() != "float32") {
      throw ValidationError("checkpoint_manifest", "unsupported checkpoint dtype",
                            {{"path", man.string()}});
    }
    config = model_config_from_json(j.at("config"));
    for (const auto& t : j.at("tensors")) {
      layout.emplace_back(t.at("name").get<std::string>(),
                          t.at("shape").get<std::vector<std::size_t>>(),
                          t.at("offset").get<std::size_t>(), t.at("trainable").get<bool>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint_manifest", "malformed manifest " + man.string() + ": " + e.what(),
                          {{"path", man.string()}});
  }

  // The stored layout must be exactly what the config implies.
  const ModelParams expected = init_params(config, 0);
  if (expected.entries().size() != layout.size()) {
    throw ValidationError("checkpoint_layout",
                          "checkpoint holds " + std::to_string(layout.size()) +
                              " tensors but its config needs " +
                              std::to_string(expected.entries().size()),
                          {{"path", man.string()}});
  }

  std::ifstream bin_in(bin, std::ios::binary);
  if (!bin_in) {
    throw ValidationError("file_not_found", "checkpoint blob not found: " + bin.string(),
                          {{"path", bin.string()}});
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin_in)), std::istreambuf_iterator<char>());

  ModelParams params(config);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape, offset, trainable] = layout[i];
    const auto& want = expected.entries()[i];
    if (want.name != name || want.value.shape() != shape || want.trainable != trainable) {
      throw ValidationError("checkpoint_layout",
                            "checkpoint tensor " + std::to_string(i) + " is " + name + " " +
                                shape_string(shape) + ", config expects " + want.name + " " +
                                shape_string(want.value.shape()),
                            {{"path", man.string()}, {"tensor", name}});
    }
    const std::size_t count = want.value.size();
    if (offset + count * sizeof(float) > bytes.size()) {
      throw ValidationError("checkpoint_truncated",
                            "checkpoint blob " + bin.string() + " is truncated at tensor " + name,
                            {{"path", bin.string()}, {"tensor", name}});
    }
    std::vector<float> buf(count);
    std::memcpy(buf.data(), bytes.data() + offset, count * sizeof(float));
    Tensor t(shape);
    for (std::size_t k = 0; k < count; ++k) t[k] = buf[k];
    params.add(name, std::move(t), trainable);
  }
  return params;
}

}  // namespace vascuscan
