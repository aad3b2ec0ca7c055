// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run configuration. A single JSON document; unknown keys anywhere are
// errors. Relative paths resolve against the directory of the config file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "xfer/adapt.hpp"
#include "xfer/classifier.hpp"
#include "xfer/data.hpp"
#include "xfer/lm.hpp"
#include "xfer/meta.hpp"

namespace xfer::cli {

struct SynthDomain {
  std::string name;
  std::size_t size = 0;
  double fake_rate = 0.5;
};

/// Generator for multi-domain corpora with controlled vocabulary overlap.
/// Domain j owns base words "t<j>x<k>", k = 0..pool_size-1; words with
/// k < 2*signal_words carry a label polarity (even k: fake, odd k: real).
/// overlap[i][j] is the fraction of domain i's topic pool copied from
/// domain j's base words, starting at k = 0; the rest of the pool is filled
/// with i's own words.
struct SynthConfig {
  bool present = false;
  std::size_t pool_size = 60;
  std::size_t signal_words = 8;  // per polarity
  std::size_t common_words = 40;
  std::size_t doc_min = 12;
  std::size_t doc_max = 24;
  std::size_t signal_per_doc = 3;  // odd, so the majority polarity is defined
  double signal_flip = 0.15;       // chance each signal word takes the other polarity
  double label_noise = 0.05;
  double topic_share = 0.6;        // non-signal words drawn from the pool rather than common words
  std::vector<SynthDomain> domains;
  std::vector<std::vector<double>> overlap;

  void validate() const;
};

struct RunConfig {
  std::filesystem::path base_dir;
  std::string run_name = "run";
  std::filesystem::path output_dir = "runs";
  std::map<std::string, std::filesystem::path> datasets;
  std::string target;
  std::size_t max_len = 170;
  std::size_t min_count = 2;
  data::SplitRatios split;
  std::vector<std::uint64_t> seeds{1};
  nn::ClassifierSpec model;  // vocab_size filled in from the vocabulary
  meta::MetaConfig meta;
  bool exclude_target = false;  // keep the target out of general training
  lm::MlmConfig mlm;
  adapt::AdaptConfig adapt;
  adapt::WeightNorm normalize_weights = adapt::WeightNorm::none;
  SynthConfig synth;

  /// SHA-256 of the canonical form of the parsed document.
  std::string hash;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path dataset_path(const std::string& domain) const;
  void validate() const;
};

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace xfer::cli
