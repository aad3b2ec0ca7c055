// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Corpus ingestion, tokenization, vocabulary, splits and episodic task
// sampling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xfer/rng.hpp"

namespace xfer::data {

using TokenId = std::int32_t;

struct NewsItem {
  std::string id;
  std::string text;
  int label = 0;  // 1 = fake
  std::string domain;
};

struct LabelCounts {
  std::size_t fake = 0;
  std::size_t real = 0;
  std::size_t total() const { return fake + real; }
  bool operator==(const LabelCounts&) const = default;
};

struct RejectedLine {
  std::size_t line = 0;
  std::string reason;
};

struct IngestResult {
  std::vector<NewsItem> items;
  std::map<std::string, LabelCounts> counts;  // per domain
  std::vector<RejectedLine> rejected;
  std::size_t lines = 0;  // non-blank lines seen
};

struct IngestOptions {
  /// Strict mode throws on the first bad record; lenient mode records it in
  /// IngestResult::rejected and moves on.
  bool strict = true;
  /// When non-empty, records from other domains are rejected.
  std::set<std::string> domains;
};

/// Reads a JSONL corpus: one object per line with `text`, `label` (0/1),
/// `domain` and an optional `id`. Missing ids become "<file stem>-<line>".
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options = {});
IngestResult ingest_stream(std::istream& in, std::string_view source_name, const IngestOptions& options = {});

/// Lowercases ASCII and splits on anything that is not an ASCII letter/digit
/// or a non-ASCII byte. "[UNK]" survives as a literal token so detokenized
/// output maps back to the unknown id.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kMask = 4;
  static constexpr std::size_t kReserved = 5;
  static constexpr std::string_view kReservedTokens[kReserved] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                                  "[MASK]"};

  /// Builds from an ordered token list; the reserved tokens must come first.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_reserved(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kReserved); }

  /// Hex SHA-256 of the serialized file contents.
  std::string fingerprint() const;

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary parse(std::string_view contents);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Tokens with corpus frequency >= min_count get ids, ordered by descending
/// frequency then bytewise.
Vocabulary build_vocab(std::span<const NewsItem> items, std::size_t min_count = 2);

struct TokenSequence {
  std::string item_id;
  std::vector<TokenId> ids;  // [CLS] content... [SEP]
  std::size_t content_length() const { return ids.size() - 2; }
  std::span<const TokenId> content() const { return std::span(ids).subspan(1, ids.size() - 2); }
};

TokenSequence tokenize(const NewsItem& item, const Vocabulary& vocab, std::size_t max_len);
/// Content tokens joined by single spaces. Unknown ids come out as "[UNK]".
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

/// Everything downstream needs about one example.
struct LabeledSequence {
  std::string id;
  std::string domain;
  int label = 0;
  TokenSequence tokens;
};

std::vector<LabeledSequence> tokenize_all(std::span<const NewsItem> items, const Vocabulary& vocab,
                                          std::size_t max_len);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;  // test gets the remainder
};

struct DomainSplit {
  std::vector<NewsItem> train;
  std::vector<NewsItem> val;
  std::vector<NewsItem> test;
};

/// Stratified per label, shuffled with the seed.
DomainSplit split_domain(std::span<const NewsItem> items, const SplitRatios& ratios, std::uint64_t seed);

/// Per-domain train/val/test partitions keyed by domain name.
std::map<std::string, DomainSplit> split_corpus(std::span<const NewsItem> items, const SplitRatios& ratios,
                                                std::uint64_t seed);

struct TaskBatch {
  std::string domain;
  std::vector<std::size_t> support;  // indices into that domain's train split
  std::vector<std::size_t> query;
};

struct TaskSamplerConfig {
  std::size_t tasks = 1;
  std::size_t support_size = 8;
  std::size_t query_size = 8;
  std::set<std::string> exclude;
};

/// Draws tasks one domain per task. Domains are visited without replacement
/// in a shuffled order and the order is reshuffled once exhausted, so n tasks
/// cover min(n, #domains) distinct domains.
class TaskSampler {
 public:
  /// `domain_sizes` maps domain name to its train split size.
  TaskSampler(std::map<std::string, std::size_t> domain_sizes, TaskSamplerConfig config, std::uint64_t seed);

  std::vector<TaskBatch> sample();
  const std::vector<std::string>& domains() const { return domains_; }

 private:
  std::map<std::string, std::size_t> sizes_;
  std::vector<std::string> domains_;  // eligible, sorted
  TaskSamplerConfig config_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

std::vector<TaskBatch> sample_tasks(const std::map<std::string, std::size_t>& domain_sizes,
                                    const TaskSamplerConfig& config, std::uint64_t seed);

}  // namespace xfer::data
