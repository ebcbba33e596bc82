#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "vascuscan/train.hpp"
#include "vascuscan/volume.hpp"

namespace vascuscan::cli {

inline constexpr int kSchemaVersion = 1;

/// Settings shared by all subcommands, loaded from a JSON file. Every
/// section is optional; unknown keys anywhere are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  double iso = 0.5;
  SmoothingParams smoothing;
  std::optional<CropBox> crop;

  /// Points per cloud for parcellation, prediction and training.
  std::size_t cloud_size = 3000;

  TrainConfig train;

  std::vector<double> thresholds;  ///< FROC sweep, strictly descending
  double threshold = 0.5;          ///< operating point of `detect`
  double min_overlap_fraction = 0.0;

  nlohmann::json phantom = nlohmann::json::object();  ///< PhantomSpec overrides
  double ball_radius = 16.0;
  int ball_dims = 40;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

/// Runs the command line in-process. Returns the exit code: 0 success,
/// 1 computation failure, 2 invalid input. Errors are written to `err` as a
/// JSON object with code, message and context.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vascuscan::cli
