// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace xfer::eval {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct F1Acc {
  double f1_macro = 0.0;
  double accuracy = 0.0;
  double f1_fake = 0.0;
  double f1_real = 0.0;
  Confusion counts;
  /// Set when one class never occurs in labels nor predictions; its F1 counts as 0.
  bool absent_class = false;
};

/// Scores >= threshold are predicted fake (label 1).
F1Acc f1_acc(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Mann-Whitney AUC with half credit for ties. Computed from integer pair
/// counts, so it is exact for the tie structure.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC vertices from (0,0) to (1,1), one per distinct score.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under the ROC over FPR in [0, fpr_max], interpolating at fpr_max.
double partial_auc(std::span<const double> scores, std::span<const int> labels, double fpr_max);

/// McClish standardization of the partial AUC: 0.5 at chance, 1 for a perfect ranking.
double spauc(std::span<const double> scores, std::span<const int> labels, double fpr_max = 0.1);

struct MetricsReport {
  double f1_macro = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;
  double spauc = 0.0;
  Confusion counts;
};

/// All four metrics; AUC and SPAUC are NaN when only one class is present.
MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels);

}  // namespace xfer::eval
