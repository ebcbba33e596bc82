#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "oracles.hpp"
#include "vascuscan/checkpoint.hpp"
#include "vascuscan/error.hpp"

using namespace vascuscan;

namespace {

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("save then load restores parameters exactly") {
  auto cfg = ModelConfig::miniature();
  cfg.ortho_weight = 0.01;
  const auto p = init_params(cfg, 7);
  const auto dir = oracle::temp_dir("ckpt_rt");
  save_checkpoint(p, dir / "model");
  CHECK(load_checkpoint(dir / "model") == p);
  CHECK(load_checkpoint(dir / "model.bin") == p);
  CHECK(load_checkpoint(dir / "model.manifest.json") == p);
  CHECK(checkpoint_base(dir / "model.manifest.json") == dir / "model");
}

TEST_CASE("identical parameters give identical files") {
  const auto p = init_params(ModelConfig::miniature(), 8);
  const auto dir = oracle::temp_dir("ckpt_bytes");
  save_checkpoint(p, dir / "a");
  save_checkpoint(load_checkpoint(dir / "a"), dir / "b");
  CHECK(oracle::read_file(dir / "a.bin") == oracle::read_file(dir / "b.bin"));
  CHECK(oracle::read_file(dir / "a.manifest.json") == oracle::read_file(dir / "b.manifest.json"));
  std::size_t floats = 0;
  for (const auto& e : p.entries()) floats += e.value.size();
  CHECK(oracle::read_file(dir / "a.bin").size() == floats * 4);
}

TEST_CASE("corrupted checkpoints fail with specific codes") {
  const auto p = init_params(ModelConfig::miniature(), 9);
  const auto dir = oracle::temp_dir("ckpt_bad");
  save_checkpoint(p, dir / "m");
  const auto manifest = nlohmann::json::parse(oracle::read_file(dir / "m.manifest.json"));
  auto rewrite = [&](const nlohmann::json& j) { std::ofstream(dir / "m.manifest.json") << j.dump(); };

  auto j = manifest;
  j["format_version"] = 99;
  rewrite(j);
  CHECK(code_of([&] { load_checkpoint(dir / "m"); }) == "checkpoint_version");

  j = manifest;
  j["tensors"][0]["shape"] = {1, 1};
  rewrite(j);
  CHECK(code_of([&] { load_checkpoint(dir / "m"); }) == "checkpoint_layout");

  rewrite(manifest);
  const auto blob = oracle::read_file(dir / "m.bin");
  std::ofstream(dir / "m.bin", std::ios::binary).write(blob.data(), 100);
  try {
    load_checkpoint(dir / "m");
    FAIL("expected truncation");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "checkpoint_truncated");
    CHECK(e.context().count("tensor") == 1);
  }

  std::ofstream(dir / "m.manifest.json") << "{not json";
  CHECK(code_of([&] { load_checkpoint(dir / "m"); }) == "checkpoint_manifest");
  CHECK(code_of([&] { load_checkpoint(dir / "missing"); }) == "file_not_found");
}
