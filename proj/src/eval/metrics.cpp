// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "xfer/error.hpp"
#include "xfer/eval.hpp"

namespace xfer::eval {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  if (scores.empty()) throw ValidationError("empty evaluation input");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("NaN score");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

void require_both_classes(std::span<const int> labels) {
  auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw ValidationError("ROC metrics need both classes present");
}

// Indices sorted by descending score.
std::vector<std::size_t> rank_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

F1Acc f1_acc(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  F1Acc out;
  auto& c = out.counts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      (pred ? c.tp : c.fn) += 1;
    } else {
      (pred ? c.fp : c.tn) += 1;
    }
  }
  out.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  out.f1_fake = f1(c.tp, c.fp, c.fn);
  out.f1_real = f1(c.tn, c.fn, c.fp);
  out.absent_class = (2 * c.tp + c.fp + c.fn == 0) || (2 * c.tn + c.fn + c.fp == 0);
  out.f1_macro = 0.5 * (out.f1_fake + out.f1_real);
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  require_both_classes(labels);
  const auto [pos, neg] = class_counts(labels);
  const auto order = rank_desc(scores);
  // Walk groups of equal score from the top; every negative seen later loses
  // to the positives of this group, ties split.
  std::uint64_t twice_wins = 0;
  std::uint64_t neg_remaining = neg;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, n = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? p : n) += 1;
      ++j;
    }
    neg_remaining -= n;
    twice_wins += p * (2 * neg_remaining + n);
    i = j;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  require_both_classes(labels);
  const auto [pos, neg] = class_counts(labels);
  const auto order = rank_desc(scores);
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  return pts;
}

double partial_auc(std::span<const double> scores, std::span<const int> labels, double fpr_max) {
  if (!(fpr_max > 0.0 && fpr_max <= 1.0)) throw ValidationError("fpr_max must be in (0, 1]");
  const auto pts = roc_curve(scores, labels);
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const auto& a = pts[k - 1];
    const auto& b = pts[k];
    if (a.fpr >= fpr_max) break;
    if (b.fpr <= fpr_max) {
      area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    } else {
      const double t = (fpr_max - a.fpr) / (b.fpr - a.fpr);
      const double tpr_cut = a.tpr + t * (b.tpr - a.tpr);
      area += (fpr_max - a.fpr) * (a.tpr + tpr_cut) / 2.0;
      break;
    }
  }
  return area;
}

double spauc(std::span<const double> scores, std::span<const int> labels, double fpr_max) {
  const double pauc = partial_auc(scores, labels, fpr_max);
  const double a_max = fpr_max;
  const double a_min = fpr_max * fpr_max / 2.0;
  return 0.5 * (1.0 + (pauc - a_min) / (a_max - a_min));
}

MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels) {
  const auto fa = f1_acc(scores, labels);
  MetricsReport r;
  r.f1_macro = fa.f1_macro;
  r.accuracy = fa.accuracy;
  r.counts = fa.counts;
  const auto [pos, neg] = class_counts(labels);
  if (pos > 0 && neg > 0) {
    r.auc = roc_auc(scores, labels);
    r.spauc = spauc(scores, labels, 0.1);
  } else {
    r.auc = r.spauc = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace xfer::eval
