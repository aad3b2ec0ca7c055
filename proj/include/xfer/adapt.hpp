// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Target adaptation: fine-tune the general classifier on target items plus
// source items re-weighted by their transferability,
//   L = mean_{source} w(x) * ce + mean_{target} ce.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xfer/classifier.hpp"
#include "xfer/data.hpp"
#include "xfer/lm.hpp"
#include "xfer/optim.hpp"

namespace xfer::adapt {

struct WeightedLoss {
  double loss = 0.0;
  std::vector<double> source_grad;  // d loss / d prob
  std::vector<double> target_grad;
};

/// Two expectations, each normalized by its own population, then summed.
/// `source_coeff` scales the source term. Either population may be empty.
WeightedLoss weighted_loss(std::span<const double> source_probs, std::span<const int> source_labels,
                           std::span<const double> source_weights, std::span<const double> target_probs,
                           std::span<const int> target_labels, double source_coeff = 1.0);

enum class Ablation { full, wo_meta, wo_sources };
Ablation parse_ablation(std::string_view name);
std::string_view ablation_name(Ablation a);

enum class WeightNorm { none, mean1 };
WeightNorm parse_weight_norm(std::string_view name);
std::string_view weight_norm_name(WeightNorm n);

using WeightTable = std::unordered_map<std::string, double>;

/// id -> weight. `mean1` rescales so the weights average to 1 over all
/// scored sources.
WeightTable weight_table(std::span<const lm::TransferabilityRecord> records, WeightNorm norm);

struct AdaptConfig {
  std::size_t epochs = 50;
  std::size_t patience = 5;
  std::size_t batch_size = 16;  // target items per mini-batch
  double source_ratio = 1.0;    // source items per target item in a mini-batch
  double lr = 1e-3;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double source_coeff = 1.0;
  bool use_sources = true;

  void validate() const;
};

struct AdaptRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // NaN for epoch 0, the starting model
  double val_f1 = 0.0;
  double val_auc = 0.0;
};

struct AdaptResult {
  nn::Classifier model;
  std::vector<AdaptRow> trace;
  std::size_t best_epoch = 0;
};

/// Mini-batch descent on the weighted loss; keeps the epoch with the best
/// target validation macro F1 (AUC breaks ties), the starting model included.
AdaptResult adapt_to_target(const nn::Classifier& general, std::span<const data::LabeledSequence> target_train,
                            std::span<const data::LabeledSequence> target_val,
                            std::span<const data::LabeledSequence> sources, const WeightTable& weights,
                            const AdaptConfig& config, std::uint64_t seed);

/// CSV: epoch,train_loss,val_f1,val_auc
std::string adapt_trace_csv(std::span<const AdaptRow> trace);

}  // namespace xfer::adapt
