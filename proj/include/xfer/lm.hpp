// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Target-domain masked language model and instance transferability scoring.
//
// The model predicts the token at position i from a window of radius r
// around it (the position itself included, so it sees [MASK], a random token
// or the original): h = tanh(b + sum_o W_o E[x_{i+o}]), p = softmax(U h + c).
// Because every prediction only depends on its own window, scoring position i
// with a single [MASK] needs one window evaluation instead of a full pass.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xfer/data.hpp"
#include "xfer/optim.hpp"
#include "xfer/params.hpp"
#include "xfer/rng.hpp"

namespace xfer::lm {

using data::TokenId;
using data::TokenSequence;

struct MaskedLmSpec {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t radius = 3;
  std::string vocab_fingerprint;
  bool operator==(const MaskedLmSpec&) const = default;
};

nn::LayoutPtr lm_layout(const MaskedLmSpec& spec);
nn::ParamSet init_lm(const MaskedLmSpec& spec, std::uint64_t seed);

struct MaskedLm {
  MaskedLmSpec spec;
  nn::ParamSet params;
};

enum class Replacement { mask, random, keep };

struct MaskedPosition {
  std::size_t position = 0;  // index into TokenSequence::ids
  TokenId original = 0;
  Replacement kind = Replacement::mask;
  TokenId input = 0;  // what the model sees at this position
};

using MaskingPlan = std::vector<MaskedPosition>;

struct MaskingConfig {
  double ratio = 0.15;
  double mask_prob = 0.8;    // replaced by [MASK]
  double random_prob = 0.1;  // replaced by a random regular token; the rest stay as is
  void validate() const;
};

/// Masks floor(ratio*n) or ceil(ratio*n) content positions (randomized
/// rounding keeps the expected count at ratio*n), never [CLS]/[SEP].
MaskingPlan plan_masking(const TokenSequence& seq, const MaskingConfig& config, std::size_t vocab_size, Rng& rng);
std::vector<TokenId> apply_plan(const TokenSequence& seq, const MaskingPlan& plan);

/// Log-probabilities over the vocabulary at `position` of `input`.
void log_distribution(const MaskedLm& lm, std::span<const TokenId> input, std::size_t position,
                      std::span<double> out);

/// Mean cross-entropy over all planned positions.
double masked_loss(const MaskedLm& lm, std::span<const TokenSequence> seqs, std::span<const MaskingPlan> plans);
/// Same loss with its gradient written into `grad`.
double masked_loss_grad(const MaskedLm& lm, std::span<const TokenSequence> seqs, std::span<const MaskingPlan> plans,
                        nn::GradientMap& grad);

struct MlmConfig {
  MaskingConfig masking;
  std::size_t embed_dim = 32;
  std::size_t radius = 3;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double lr = 5e-3;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
};

struct MlmTrainResult {
  MaskedLm lm;
  std::vector<double> epoch_loss;
};

/// Trains from scratch with fresh masking plans every epoch.
MlmTrainResult train_mlm(std::span<const TokenSequence> corpus, const data::Vocabulary& vocab, const MlmConfig& config,
                         std::uint64_t seed);

/// log prob(w_i) for every content position, masking exactly that position.
std::vector<double> masked_token_log_probs(const MaskedLm& lm, const TokenSequence& seq);
/// exp(-(1/N) sum log p_i).
double perplexity_from_log_probs(std::span<const double> log_probs);
double pseudo_perplexity(const MaskedLm& lm, const TokenSequence& seq);

struct TransferabilityRecord {
  std::string id;
  std::string domain;
  double pp = 0.0;
  double w = 0.0;  // 1 / pp
};

struct ScoreFailure {
  std::string id;
  std::string reason;
};

struct ScoreReport {
  std::vector<TransferabilityRecord> records;  // input order
  std::vector<ScoreFailure> failures;
};

ScoreReport score_sources(const MaskedLm& lm, std::span<const data::LabeledSequence> sources);

/// CSV: id,domain,pp,w
std::string records_csv(std::span<const TransferabilityRecord> records);
std::vector<TransferabilityRecord> parse_records_csv(std::string_view csv);

struct DValueRow {
  std::string id;
  double pp_t1 = 0.0;
  double pp_t2 = 0.0;
  double dvalue = 0.0;  // pp_t1 - pp_t2
};

/// Throws ValidationError when the two models were trained on different vocabularies.
std::vector<DValueRow> dvalue_report(const MaskedLm& lm_t1, const MaskedLm& lm_t2,
                                     std::span<const data::LabeledSequence> sources);
/// CSV: id,pp_t1,pp_t2,dvalue
std::string dvalue_csv(std::span<const DValueRow> rows);
/// CSV: bin_lo,bin_hi,count over equal-width bins spanning the observed range.
std::string dvalue_histogram_csv(std::span<const DValueRow> rows, std::size_t bins);

}  // namespace xfer::lm
