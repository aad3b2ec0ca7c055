// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// On-disk model format: `<path>` holds the parameters as a flat little-endian
// float64 blob and `<path>.json` holds the manifest (format version, tensor
// names, shapes, byte offsets, seed, config hash, blob checksum and the
// model hyperparameters needed to rebuild the layout).

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "xfer/params.hpp"

namespace xfer::nn {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointInfo {
  std::string kind;         // "classifier" or "masked-lm"
  nlohmann::json model;     // hyperparameters
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string tag;          // free-form, e.g. the target domain of an LM
};

std::filesystem::path manifest_path(const std::filesystem::path& blob);

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const CheckpointInfo& info);

struct LoadedCheckpoint {
  ParamSet params;
  CheckpointInfo info;
};

/// Validates the manifest, the blob size and checksum, and that the stored
/// tensors match `layout` exactly. Throws ValidationError on any mismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const LayoutPtr& layout);
/// Reads only the manifest.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace xfer::nn
