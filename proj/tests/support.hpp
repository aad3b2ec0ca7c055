// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "xfer/classifier.hpp"
#include "xfer/rng.hpp"

namespace xfer::testing {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7});
}

// Fresh scratch directory under the build tree, emptied on construction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(std::filesystem::current_path() / "scratch" / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// A tiny classifier and a matching random batch.
struct TinyProblem {
  nn::Classifier model;
  std::vector<std::vector<data::TokenId>> tokens;
  std::vector<nn::Example> batch;
};

inline TinyProblem tiny_problem(Rng& rng, nn::Encoder encoder = nn::Encoder::mean_pool) {
  TinyProblem p;
  nn::ClassifierSpec spec;
  spec.vocab_size = 6 + rng.below(3);
  spec.embed_dim = 2 + rng.below(2);
  spec.hidden = 3 + rng.below(3);
  spec.encoder = encoder;
  spec.conv_maps = 2;
  spec.conv_windows = {1, 2};
  p.model = {spec, nn::init_classifier(spec, rng.next())};
  for (auto& v : p.model.params.values()) v *= 2.0;  // push activations off the linear regime
  const std::size_t m = 2 + rng.below(3);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<data::TokenId> ids{data::Vocabulary::kCls};
    const std::size_t n = 1 + rng.below(4);
    for (std::size_t k = 0; k < n; ++k) ids.push_back(static_cast<data::TokenId>(rng.below(spec.vocab_size)));
    ids.push_back(data::Vocabulary::kSep);
    p.tokens.push_back(std::move(ids));
  }
  for (std::size_t i = 0; i < m; ++i) {
    p.batch.push_back({p.tokens[i], static_cast<double>(rng.below(2)), 1.0 / static_cast<double>(m)});
  }
  return p;
}

}  // namespace xfer::testing

#include "xfer/meta.hpp"
#include "xfer/synth.hpp"

namespace xfer::testing {

// Per-domain train/val splits of a small synthetic corpus, tokenized with a
// vocabulary built from the train splits.
struct SynthCorpora {
  data::Vocabulary vocab{std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "x"}};
  std::map<std::string, data::DomainSplit> splits;
  meta::Corpora corpora;
  std::map<std::string, std::vector<data::LabeledSequence>> test;
};

inline cli::SynthConfig small_synth(std::vector<std::size_t> sizes = {120, 120, 120}) {
  cli::SynthConfig c;
  c.present = true;
  c.pool_size = 30;
  c.signal_words = 6;
  c.common_words = 20;
  c.doc_min = 8;
  c.doc_max = 14;
  const std::vector<std::string> names{"alpha", "beta", "gamma", "delta"};
  for (std::size_t i = 0; i < sizes.size(); ++i) c.domains.push_back({names[i], sizes[i], 0.5});
  c.overlap.assign(sizes.size(), std::vector<double>(sizes.size(), 0.0));
  for (std::size_t i = 0; i < sizes.size(); ++i) c.overlap[i][i] = 1.0;
  return c;
}

inline SynthCorpora synth_corpora(const cli::SynthConfig& cfg, std::uint64_t seed, std::size_t max_len = 64) {
  SynthCorpora out;
  std::vector<data::NewsItem> all;
  for (auto& [name, items] : cli::generate_synth(cfg, seed)) all.insert(all.end(), items.begin(), items.end());
  out.splits = data::split_corpus(all, {}, seed);
  std::vector<data::NewsItem> train;
  for (const auto& [d, s] : out.splits) train.insert(train.end(), s.train.begin(), s.train.end());
  out.vocab = data::build_vocab(train, 1);
  for (const auto& [d, s] : out.splits) {
    out.corpora[d] = {data::tokenize_all(s.train, out.vocab, max_len), data::tokenize_all(s.val, out.vocab, max_len)};
    out.test[d] = data::tokenize_all(s.test, out.vocab, max_len);
  }
  return out;
}

}  // namespace xfer::testing
