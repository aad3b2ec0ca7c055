// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "xfer/params.hpp"

namespace xfer::nn {

/// theta' = theta - lr * g as a new ParamSet; the input is left untouched.
ParamSet sgd_step(const ParamSet& params, const GradientMap& grads, double lr);
/// Same update applied in place.
void sgd_step_in_place(ParamSet& params, const GradientMap& grads, double lr);

enum class OptimizerKind { sgd, adam };
OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ParamSet& params, const GradientMap& grads) = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr);
  void step(ParamSet& params, const GradientMap& grads) override { sgd_step_in_place(params, grads, lr_); }

 private:
  double lr_;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamSet& params, const GradientMap& grads) override;

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr);

}  // namespace xfer::nn
