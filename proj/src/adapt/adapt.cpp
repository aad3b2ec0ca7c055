// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/adapt.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "xfer/error.hpp"
#include "xfer/eval.hpp"
#include "xfer/rng.hpp"

namespace xfer::adapt {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Score {
  double f1 = kNaN;
  double auc = kNaN;
  bool better_than(const Score& o) const {
    if (std::isnan(o.f1)) return true;
    if (f1 != o.f1) return f1 > o.f1;
    return !std::isnan(auc) && (std::isnan(o.auc) || auc > o.auc);
  }
};

Score score_on(const nn::Classifier& model, std::span<const data::LabeledSequence> val) {
  if (val.empty()) return {};
  std::vector<double> probs;
  std::vector<int> labels;
  for (const auto& s : val) {
    probs.push_back(nn::predict_one(model, s.tokens.ids));
    labels.push_back(s.label);
  }
  const auto m = eval::evaluate(probs, labels);
  return {m.f1_macro, m.auc};
}

}  // namespace

WeightedLoss weighted_loss(std::span<const double> source_probs, std::span<const int> source_labels,
                           std::span<const double> source_weights, std::span<const double> target_probs,
                           std::span<const int> target_labels, double source_coeff) {
  if (source_probs.size() != source_labels.size() || source_probs.size() != source_weights.size()) {
    throw ValidationError("weighted_loss: source predictions, labels and weights differ in length");
  }
  if (target_probs.size() != target_labels.size()) {
    throw ValidationError("weighted_loss: target predictions and labels differ in length");
  }
  WeightedLoss out;
  if (!source_probs.empty()) {
    for (double w : source_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weighted_loss: weights must be finite and >= 0");
    }
    const double m = static_cast<double>(source_probs.size());
    double acc = 0.0;
    out.source_grad.resize(source_probs.size());
    for (std::size_t i = 0; i < source_probs.size(); ++i) {
      const auto one = nn::bce_loss(source_probs.subspan(i, 1), source_labels.subspan(i, 1));
      acc += source_weights[i] * one.loss;
      out.source_grad[i] = source_coeff * source_weights[i] * one.grad[0] / m;
    }
    out.loss += source_coeff * acc / m;
  }
  if (!target_probs.empty()) {
    const auto t = nn::bce_loss(target_probs, target_labels);
    out.loss += t.loss;
    out.target_grad = t.grad;
  }
  return out;
}

Ablation parse_ablation(std::string_view name) {
  if (name == "full") return Ablation::full;
  if (name == "wo-meta") return Ablation::wo_meta;
  if (name == "wo-sources") return Ablation::wo_sources;
  throw ValidationError("unknown ablation '" + std::string(name) + "' (expected full, wo-meta or wo-sources)");
}

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::wo_meta:
      return "wo-meta";
    case Ablation::wo_sources:
      return "wo-sources";
    default:
      return "full";
  }
}

WeightNorm parse_weight_norm(std::string_view name) {
  if (name == "none") return WeightNorm::none;
  if (name == "mean1") return WeightNorm::mean1;
  throw ValidationError("unknown weight normalization '" + std::string(name) + "' (expected none or mean1)");
}

std::string_view weight_norm_name(WeightNorm n) { return n == WeightNorm::none ? "none" : "mean1"; }

WeightTable weight_table(std::span<const lm::TransferabilityRecord> records, WeightNorm norm) {
  WeightTable table;
  double scale = 1.0;
  if (norm == WeightNorm::mean1 && !records.empty()) {
    double sum = 0.0;
    for (const auto& r : records) sum += r.w;
    if (sum > 0.0) scale = static_cast<double>(records.size()) / sum;
  }
  for (const auto& r : records) {
    if (!table.emplace(r.id, r.w * scale).second) {
      throw ValidationError("duplicate transferability record for '" + r.id + "'");
    }
  }
  return table;
}

void AdaptConfig::validate() const {
  if (batch_size == 0) throw ValidationError("adapt batch_size must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("adapt lr must be > 0");
  if (!(source_ratio >= 0.0)) throw ValidationError("adapt source_ratio must be >= 0");
  if (!(source_coeff >= 0.0) || !std::isfinite(source_coeff)) throw ValidationError("adapt source_coeff must be >= 0");
}

AdaptResult adapt_to_target(const nn::Classifier& general, std::span<const data::LabeledSequence> target_train,
                            std::span<const data::LabeledSequence> target_val,
                            std::span<const data::LabeledSequence> sources, const WeightTable& weights,
                            const AdaptConfig& config, std::uint64_t seed) {
  config.validate();
  AdaptResult result{general, {}, 0};
  Score best = score_on(general, target_val);
  result.trace.push_back({0, kNaN, best.f1, best.auc});
  if (config.epochs == 0) return result;
  if (target_train.empty()) throw ValidationError("adaptation needs target training items");

  const bool with_sources = config.use_sources && !sources.empty() && config.source_ratio > 0.0;
  const auto per_batch_sources =
      with_sources ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.source_ratio *
                                                                                    static_cast<double>(config.batch_size))))
                   : 0;
  Rng rng(seed);
  auto opt = nn::make_optimizer(config.optimizer, config.lr);
  const nn::ClassifierObjective objective(general.spec);
  nn::Classifier current = general;
  nn::GradientMap grad = nn::GradientMap::zeros_like(current.params);

  std::vector<std::size_t> t_order(target_train.size());
  std::iota(t_order.begin(), t_order.end(), std::size_t{0});
  std::vector<std::size_t> s_order(sources.size());
  std::iota(s_order.begin(), s_order.end(), std::size_t{0});
  std::size_t s_cursor = s_order.size();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(t_order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < t_order.size(); start += config.batch_size) {
      const std::size_t end = std::min(t_order.size(), start + config.batch_size);
      std::vector<nn::Example> batch;
      const double ct = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& t = target_train[t_order[k]];
        batch.push_back({t.tokens.ids, static_cast<double>(t.label), ct});
      }
      const double cs = per_batch_sources ? config.source_coeff / static_cast<double>(per_batch_sources) : 0.0;
      for (std::size_t k = 0; k < per_batch_sources; ++k) {
        if (s_cursor == s_order.size()) {
          rng.shuffle(std::span(s_order));
          s_cursor = 0;
        }
        const auto& s = sources[s_order[s_cursor++]];
        const auto it = weights.find(s.id);
        if (it == weights.end()) throw ValidationError("no transferability weight for source item '" + s.id + "'");
        batch.push_back({s.tokens.ids, static_cast<double>(s.label), cs * it->second});
      }
      loss_sum += objective.loss_grad(current.params, batch, grad);
      opt->step(current.params, grad);
      ++batches;
    }
    const Score sc = score_on(current, target_val);
    result.trace.push_back({epoch, loss_sum / static_cast<double>(batches), sc.f1, sc.auc});
    if (target_val.empty() || sc.better_than(best)) {
      best = sc;
      result.model = current;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

std::string adapt_trace_csv(std::span<const AdaptRow> trace) {
  std::string out = "epoch,train_loss,val_f1,val_auc\n";
  for (const auto& r : trace) {
    out += std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + fmt(r.val_f1) + "," + fmt(r.val_auc) + "\n";
  }
  return out;
}

}  // namespace xfer::adapt
