// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/optim.hpp"

#include <cmath>
#include <string>

#include "xfer/error.hpp"
#include "xfer/simd.hpp"

namespace xfer::nn {
namespace {

void check_step(const ParamSet& params, const GradientMap& grads, double lr) {
  if (!params.same_layout(grads)) throw ValidationError("gradient shapes do not match parameter shapes");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be finite and >= 0");
}

}  // namespace

ParamSet sgd_step(const ParamSet& params, const GradientMap& grads, double lr) {
  ParamSet out = params.clone();
  sgd_step_in_place(out, grads, lr);
  return out;
}

void sgd_step_in_place(ParamSet& params, const GradientMap& grads, double lr) {
  check_step(params, grads, lr);
  if (lr == 0.0) return;  // keeps -0.0 entries bitwise intact
  simd::axpy(-lr, grads.values(), params.values());
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ValidationError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

Sgd::Sgd(double lr) : lr_(lr) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be > 0");
}

void Adam::step(ParamSet& params, const GradientMap& grads) {
  check_step(params, grads, lr_);
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.values();
  auto g = grads.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g[i] * g[i];
    p[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind, double lr) {
  if (kind == OptimizerKind::sgd) return std::make_unique<Sgd>(lr);
  return std::make_unique<Adam>(lr);
}

}  // namespace xfer::nn
