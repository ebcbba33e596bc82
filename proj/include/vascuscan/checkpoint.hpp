#pragma once

#include <filesystem>

#include "vascuscan/pointnet.hpp"

namespace vascuscan {

inline constexpr int kCheckpointVersion = 1;

/// Writes `<base>.bin` (little-endian float32 tensors back to back) and
/// `<base>.manifest.json` (model config plus name, shape and byte offset of
/// every tensor). `base` is a path without extension.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& base);

/// Reads a checkpoint written by save_checkpoint. `base` may also name the
/// manifest or blob file directly. Fails on a version mismatch, a layout that
/// disagrees with the stored config, or a blob too short for any tensor.
ModelParams load_checkpoint(const std::filesystem::path& base);

/// Strips ".bin" / ".manifest.json" from a checkpoint path.
std::filesystem::path checkpoint_base(const std::filesystem::path& p);

}  // namespace vascuscan
