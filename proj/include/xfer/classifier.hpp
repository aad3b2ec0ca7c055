// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xfer/data.hpp"
#include "xfer/params.hpp"

namespace xfer::nn {

using data::TokenId;

enum class Encoder { mean_pool, conv_window };

std::string encoder_name(Encoder e);
Encoder parse_encoder(std::string_view name);

struct ClassifierSpec {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden = 384;
  Encoder encoder = Encoder::mean_pool;
  std::size_t conv_maps = 16;
  std::vector<std::size_t> conv_windows{1, 2, 3};

  std::size_t feature_dim() const {
    return encoder == Encoder::mean_pool ? embed_dim : conv_maps * conv_windows.size();
  }
  bool operator==(const ClassifierSpec&) const = default;
};

LayoutPtr classifier_layout(const ClassifierSpec& spec);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor. Embedding rows use
/// the embedding width as fan-in.
ParamSet init_classifier(const ClassifierSpec& spec, std::uint64_t seed);

struct Classifier {
  ClassifierSpec spec;
  ParamSet params;
};

/// One training example. The batch loss is sum_i coeff_i * loss_i, so a plain
/// mean uses coeff = 1/m.
struct Example {
  std::span<const TokenId> tokens;
  double label = 0.0;
  double coeff = 1.0;
};

inline constexpr double kProbClamp = 1e-7;

/// P(fake) per sequence, clamped to [1e-7, 1 - 1e-7].
std::vector<double> forward_classify(const Classifier& model, std::span<const data::TokenSequence> batch);
double predict_one(const Classifier& model, std::span<const TokenId> tokens);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d prob, per item
};

/// Mean binary cross-entropy over the batch. Probabilities are clamped first.
LossAndGrad bce_loss(std::span<const double> probs, std::span<const int> labels);

/// Reverse pass: writes d(sum_i coeff_i * loss_i)/d theta into `grad` and
/// returns the loss. Throws NumericError naming the offending tensor.
double backward(const ClassifierSpec& spec, const ParamSet& params, std::span<const Example> batch,
                GradientMap& grad);
double batch_loss(const ClassifierSpec& spec, const ParamSet& params, std::span<const Example> batch);
/// Exact H*v of the batch loss, via the reverse pass over dual numbers.
GradientMap hessian_vector(const ClassifierSpec& spec, const ParamSet& params, std::span<const Example> batch,
                           const GradientMap& v);

/// The loss surface the meta-learner differentiates. Implemented by the
/// classifier; tests plug in closed-form objectives.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double loss(const ParamSet& params, std::span<const Example> batch) const = 0;
  virtual double loss_grad(const ParamSet& params, std::span<const Example> batch, GradientMap& grad) const = 0;
  virtual GradientMap hessian_vector(const ParamSet& params, std::span<const Example> batch,
                                     const GradientMap& v) const = 0;
};

class ClassifierObjective final : public Objective {
 public:
  explicit ClassifierObjective(ClassifierSpec spec) : spec_(std::move(spec)) {}
  const ClassifierSpec& spec() const { return spec_; }

  double loss(const ParamSet& params, std::span<const Example> batch) const override {
    return batch_loss(spec_, params, batch);
  }
  double loss_grad(const ParamSet& params, std::span<const Example> batch, GradientMap& grad) const override {
    return backward(spec_, params, batch, grad);
  }
  GradientMap hessian_vector(const ParamSet& params, std::span<const Example> batch,
                             const GradientMap& v) const override {
    return nn::hessian_vector(spec_, params, batch, v);
  }

 private:
  ClassifierSpec spec_;
};

}  // namespace xfer::nn
