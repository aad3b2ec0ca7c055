// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/checkpoint.hpp"

#include <bit>

#include "xfer/error.hpp"
#include "xfer/hash.hpp"

namespace xfer::nn {
namespace {

nlohmann::json read_manifest(const std::filesystem::path& path) {
  const auto mpath = manifest_path(path);
  if (!std::filesystem::exists(mpath)) throw ValidationError("checkpoint manifest missing: " + mpath.string());
  try {
    return nlohmann::json::parse(read_file(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint manifest " + mpath.string() + " is not valid JSON: " + e.what());
  }
}

CheckpointInfo info_from(const nlohmann::json& m, const std::filesystem::path& path) {
  try {
    if (m.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw ValidationError("checkpoint " + path.string() + ": unsupported format version");
    }
    CheckpointInfo info;
    info.kind = m.at("kind").get<std::string>();
    info.model = m.at("model");
    info.seed = m.at("seed").get<std::uint64_t>();
    info.config_hash = m.at("config_hash").get<std::string>();
    info.tag = m.at("tag").get<std::string>();
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint manifest for " + path.string() + " is invalid: " + e.what());
  }
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& blob) {
  auto p = blob;
  p += ".json";
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const CheckpointInfo& info) {
  if (!params.all_finite()) throw NumericError("refusing to save non-finite parameters to " + path.string());
  std::string blob(params.size() * sizeof(double), '\0');
  const auto values = params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) blob[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.layout().tensors()) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"byte_offset", t.offset * sizeof(double)},
                       {"byte_length", t.size * sizeof(double)}});
  }
  nlohmann::json m = {{"format_version", kCheckpointFormatVersion},
                      {"kind", info.kind},
                      {"model", info.model},
                      {"seed", info.seed},
                      {"config_hash", info.config_hash},
                      {"tag", info.tag},
                      {"dtype", "float64-le"},
                      {"tensors", tensors},
                      {"blob_bytes", blob.size()},
                      {"blob_sha256", sha256_hex(blob)}};
  write_file(path, blob);
  write_file(manifest_path(path), m.dump(2) + "\n");
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) { return info_from(read_manifest(path), path); }

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const LayoutPtr& layout) {
  const auto m = read_manifest(path);
  auto info = info_from(m, path);
  const auto where = "checkpoint " + path.string() + ": ";
  if (!std::filesystem::exists(path)) throw ValidationError(where + "parameter blob missing");
  const std::string blob = read_file(path);
  try {
    if (blob.size() != m.at("blob_bytes").get<std::size_t>()) throw ValidationError(where + "blob size mismatch");
    if (sha256_hex(blob) != m.at("blob_sha256").get<std::string>()) {
      throw ValidationError(where + "blob checksum mismatch (corrupted file)");
    }
    const auto& tensors = m.at("tensors");
    if (tensors.size() != layout->tensors().size()) throw ValidationError(where + "tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& want = layout->tensors()[i];
      const auto& got = tensors[i];
      if (got.at("name").get<std::string>() != want.name ||
          got.at("shape").get<std::vector<std::size_t>>() != want.shape ||
          got.at("byte_offset").get<std::size_t>() != want.offset * sizeof(double) ||
          got.at("byte_length").get<std::size_t>() != want.size * sizeof(double)) {
        throw ValidationError(where + "tensor '" + want.name + "' does not match the expected shape");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + "invalid manifest: " + e.what());
  }
  if (blob.size() != layout->total() * sizeof(double)) throw ValidationError(where + "blob size mismatch");
  std::vector<double> values(layout->total());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
  return {ParamSet(layout, std::move(values)), std::move(info)};
}

}  // namespace xfer::nn
