// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run directory steps shared by the command line tool and the tests.
//
// Layout of one run directory (runs/<run_name>, or runs/<run_name>/seed-<s>
// for seed sweeps):
//   vocab.txt, general.ckpt, general-pooled.ckpt, general-trace.csv,
//   general-tasks.csv, lm-<domain>.ckpt, weights-<target>.csv,
//   adapted-<target>-<variant>.ckpt, adapt-<target>-<variant>.csv,
//   predictions-<target>-<model>.csv, metrics.csv, manifest.json
//
// manifest.json records, per artifact, its sha256, the config hash and the
// seed it was produced with. Steps refuse inputs whose record is missing or
// disagrees with the current config hash or seed.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "xfer/adapt.hpp"
#include "xfer/config.hpp"
#include "xfer/eval.hpp"
#include "xfer/meta.hpp"

namespace xfer::cli {

/// Command line settings that are not part of the config hash. They are
/// recorded with every artifact instead.
struct Overrides {
  std::optional<std::string> target;
  bool exclude_target = false;
  std::optional<meta::Order> order;
  std::optional<adapt::WeightNorm> normalize;
};

RunConfig apply_overrides(RunConfig cfg, const Overrides& o);

/// Variants of the adapted classifier.
enum class Variant { full, wo_meta, wo_sources, target_only };
std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
Variant variant_of(adapt::Ablation a);

struct DomainStats {
  std::string domain;
  std::size_t items = 0;
  std::size_t fake = 0;
  std::size_t real = 0;
  double mean_words = 0.0;
};

struct IngestStats {
  std::vector<DomainStats> domains;
  std::vector<std::string> rejected;  // "<file>:<line>: <reason>"
};

IngestStats ingest_stats(const RunConfig& cfg, bool strict);
std::string format_ingest_stats(const IngestStats& stats);

struct MetricsRow {
  std::string model;
  std::string target;
  double f1 = 0.0;
  double acc = 0.0;
  double auc = 0.0;
  double spauc = 0.0;
};

std::string metrics_csv(std::vector<MetricsRow> rows);
std::vector<MetricsRow> parse_metrics_csv(std::string_view csv);

/// Mean and sample standard deviation per (target, model) over seeds.
struct SummaryRow {
  std::string target;
  std::string model;
  std::size_t n = 0;
  double f1_mean = 0.0, f1_std = 0.0;
  double acc_mean = 0.0, acc_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
  double spauc_mean = 0.0, spauc_std = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<std::vector<MetricsRow>>& per_seed);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string format_summary(const std::vector<SummaryRow>& rows);

class Run {
 public:
  Run(RunConfig cfg, std::uint64_t seed, std::filesystem::path dir, nlohmann::json flags = nlohmann::json::object());

  const std::filesystem::path& dir() const { return dir_; }
  const RunConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  /// Writes vocab.txt from the train splits of every domain.
  data::Vocabulary build_vocab();
  /// Builds the vocabulary and trains the general classifier; `pooled`
  /// selects classical pooled training instead of episodic training.
  meta::TrainResult train_general(bool pooled);
  /// Masked LM on the train split of `domain` (the target by default).
  void train_lm(const std::string& domain);
  /// Transferability of every non-target train item under the target LM.
  std::vector<lm::TransferabilityRecord> score();
  /// Adapts, then evaluates on the target test split.
  eval::MetricsReport adapt(Variant variant);
  /// Evaluates the classifier checkpoint `<model>.ckpt` on the target test split.
  eval::MetricsReport evaluate(const std::string& model);
  /// Compares the target LM with the LM of `other` over the source items.
  void dvalue(const std::string& other);

  std::vector<MetricsRow> metrics() const;

 private:
  struct Corpus;
  Corpus& corpus();
  data::Vocabulary load_vocab();
  nn::Classifier load_classifier(const std::string& file);
  lm::MaskedLm load_lm(const std::string& domain);
  std::vector<data::LabeledSequence> sources_except(const std::set<std::string>& skip);
  eval::MetricsReport evaluate_model(const nn::Classifier& model, const std::string& name);

  nlohmann::json read_manifest() const;
  void require(const std::string& file, const std::string& producer);
  void record(const std::string& file, const std::string& step);
  void upsert_metrics(const MetricsRow& row);

  RunConfig cfg_;
  std::uint64_t seed_;
  std::filesystem::path dir_;
  nlohmann::json flags_;
  std::shared_ptr<Corpus> corpus_;
};

/// Directory for one seed: runs/<name> for a single seed, runs/<name>/seed-<s>
/// inside a sweep.
std::filesystem::path run_dir(const RunConfig& cfg, std::uint64_t seed, bool sweep);

/// Every step for one seed: general (episodic and pooled), target LM,
/// scoring, all adapted variants and the general model's own metrics.
void run_all(Run& run);

/// Writes summary.csv next to the seed directories and returns its rows.
std::vector<SummaryRow> write_summary(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds);

}  // namespace xfer::cli
