// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xfer/error.hpp"
#include "xfer/lm.hpp"
#include "xfer/simd.hpp"

namespace xfer::lm {
namespace {

using data::Vocabulary;

struct Offsets {
  std::size_t emb, ctx_w, ctx_b, head_w, head_b;
  explicit Offsets(const nn::ParamLayout& l)
      : emb(l.find("embedding").offset),
        ctx_w(l.find("context.weight").offset),
        ctx_b(l.find("context.bias").offset),
        head_w(l.find("head.weight").offset),
        head_b(l.find("head.bias").offset) {}
};

// Window encoder plus softmax head, evaluated at one position.
class Window {
 public:
  Window(const MaskedLm& lm) : lm_(lm), o_(lm.params.layout()), th_(lm.params.values().data()) {
    const std::size_t d = lm.spec.embed_dim;
    a_.resize(d);
    h_.resize(d);
  }

  // Fills log-probabilities for `position`.
  void forward(std::span<const TokenId> input, std::size_t position, std::span<double> logp) {
    const std::size_t d = lm_.spec.embed_dim;
    const std::size_t v = lm_.spec.vocab_size;
    const auto r = static_cast<std::ptrdiff_t>(lm_.spec.radius);
    std::copy_n(th_ + o_.ctx_b, d, a_.begin());
    for (std::ptrdiff_t off = -r; off <= r; ++off) {
      const auto j = static_cast<std::ptrdiff_t>(position) + off;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(input.size())) continue;
      const double* w = weight(off);
      const double* e = emb(input[static_cast<std::size_t>(j)]);
      for (std::size_t q = 0; q < d; ++q) a_[q] += simd::dot(w + q * d, e, d);
    }
    for (std::size_t q = 0; q < d; ++q) h_[q] = std::tanh(a_[q]);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v; ++k) {
      logp[k] = th_[o_.head_b + k] + simd::dot(th_ + o_.head_w + k * d, h_.data(), d);
      mx = std::max(mx, logp[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < v; ++k) z += std::exp(logp[k] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t k = 0; k < v; ++k) logp[k] -= lse;
  }

  // `dlogits` = coeff * (p - onehot); uses the activations of the last forward.
  void backward(std::span<const TokenId> input, std::size_t position, std::span<const double> dlogits, double* g) {
    const std::size_t d = lm_.spec.embed_dim;
    const std::size_t v = lm_.spec.vocab_size;
    const auto r = static_cast<std::ptrdiff_t>(lm_.spec.radius);
    std::vector<double> dh(d, 0.0);
    for (std::size_t k = 0; k < v; ++k) {
      g[o_.head_b + k] += dlogits[k];
      simd::axpy(dlogits[k], h_.data(), g + o_.head_w + k * d, d);
      simd::axpy(dlogits[k], th_ + o_.head_w + k * d, dh.data(), d);
    }
    for (std::size_t q = 0; q < d; ++q) {
      dh[q] *= 1.0 - h_[q] * h_[q];
      g[o_.ctx_b + q] += dh[q];
    }
    for (std::ptrdiff_t off = -r; off <= r; ++off) {
      const auto j = static_cast<std::ptrdiff_t>(position) + off;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(input.size())) continue;
      const auto x = static_cast<std::size_t>(input[static_cast<std::size_t>(j)]);
      const double* w = weight(off);
      double* gw = g + o_.ctx_w + static_cast<std::size_t>(off + r) * d * d;
      double* ge = g + o_.emb + x * d;
      const double* e = emb(input[static_cast<std::size_t>(j)]);
      for (std::size_t q = 0; q < d; ++q) {
        simd::axpy(dh[q], e, gw + q * d, d);
        simd::axpy(dh[q], w + q * d, ge, d);
      }
    }
  }

 private:
  const double* emb(TokenId t) const { return th_ + o_.emb + static_cast<std::size_t>(t) * lm_.spec.embed_dim; }
  const double* weight(std::ptrdiff_t off) const {
    const std::size_t d = lm_.spec.embed_dim;
    return th_ + o_.ctx_w + static_cast<std::size_t>(off + static_cast<std::ptrdiff_t>(lm_.spec.radius)) * d * d;
  }

  const MaskedLm& lm_;
  Offsets o_;
  const double* th_;
  std::vector<double> a_, h_;
};

void check_ids(std::span<const TokenId> ids, std::size_t vocab) {
  for (TokenId t : ids) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw ValidationError("token id " + std::to_string(t) + " outside the LM vocabulary");
    }
  }
}

double run_masked(const MaskedLm& lm, std::span<const TokenSequence> seqs, std::span<const MaskingPlan> plans,
                  double* g) {
  if (seqs.size() != plans.size()) throw ValidationError("one masking plan per sequence required");
  std::size_t total = 0;
  for (const auto& p : plans) total += p.size();
  if (total == 0) return 0.0;
  const double coeff = 1.0 / static_cast<double>(total);
  Window win(lm);
  std::vector<double> logp(lm.spec.vocab_size), dlogits(lm.spec.vocab_size);
  double loss = 0.0;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    check_ids(seqs[s].ids, lm.spec.vocab_size);
    const auto input = apply_plan(seqs[s], plans[s]);
    for (const auto& mp : plans[s]) {
      win.forward(input, mp.position, logp);
      const auto target = static_cast<std::size_t>(mp.original);
      loss -= coeff * logp[target];
      if (g != nullptr) {
        for (std::size_t k = 0; k < logp.size(); ++k) dlogits[k] = coeff * std::exp(logp[k]);
        dlogits[target] -= coeff;
        win.backward(input, mp.position, dlogits, g);
      }
    }
  }
  return loss;
}

}  // namespace

nn::LayoutPtr lm_layout(const MaskedLmSpec& spec) {
  if (spec.vocab_size <= Vocabulary::kReserved) throw ValidationError("LM vocabulary too small");
  if (spec.embed_dim == 0) throw ValidationError("LM embed_dim must be > 0");
  auto layout = std::make_shared<nn::ParamLayout>();
  layout->add("embedding", {spec.vocab_size, spec.embed_dim});
  layout->add("context.weight", {2 * spec.radius + 1, spec.embed_dim, spec.embed_dim});
  layout->add("context.bias", {spec.embed_dim});
  layout->add("head.weight", {spec.vocab_size, spec.embed_dim});
  layout->add("head.bias", {spec.vocab_size});
  return layout;
}

nn::ParamSet init_lm(const MaskedLmSpec& spec, std::uint64_t seed) {
  nn::ParamSet params(lm_layout(spec));
  Rng rng(seed);
  auto fill = [&](std::string_view name, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : params.tensor(name)) x = rng.uniform(-bound, bound);
  };
  const std::size_t window_in = (2 * spec.radius + 1) * spec.embed_dim;
  fill("embedding", spec.embed_dim);
  fill("context.weight", window_in);
  fill("context.bias", window_in);
  fill("head.weight", spec.embed_dim);
  fill("head.bias", spec.embed_dim);
  return params;
}

void MaskingConfig::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("mask ratio must be in (0, 1)");
  if (mask_prob < 0.0 || random_prob < 0.0 || mask_prob + random_prob > 1.0) {
    throw ValidationError("replacement probabilities must be >= 0 and sum to at most 1");
  }
}

MaskingPlan plan_masking(const TokenSequence& seq, const MaskingConfig& config, std::size_t vocab_size, Rng& rng) {
  const std::size_t n = seq.content_length();
  const double expected = config.ratio * static_cast<double>(n);
  auto count = static_cast<std::size_t>(std::floor(expected));
  if (rng.bernoulli(expected - static_cast<double>(count))) ++count;
  count = std::min(count, n);
  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), std::size_t{1});
  for (std::size_t i = 0; i < count; ++i) std::swap(pos[i], pos[i + rng.below(n - i)]);
  pos.resize(count);
  std::sort(pos.begin(), pos.end());
  const std::size_t regular = vocab_size - Vocabulary::kReserved;
  MaskingPlan plan;
  plan.reserve(count);
  for (std::size_t p : pos) {
    MaskedPosition mp{p, seq.ids[p], Replacement::keep, seq.ids[p]};
    const double u = rng.uniform();
    if (u < config.mask_prob) {
      mp.kind = Replacement::mask;
      mp.input = Vocabulary::kMask;
    } else if (u < config.mask_prob + config.random_prob) {
      mp.kind = Replacement::random;
      mp.input = static_cast<TokenId>(Vocabulary::kReserved + rng.below(regular));
    }
    plan.push_back(mp);
  }
  return plan;
}

std::vector<TokenId> apply_plan(const TokenSequence& seq, const MaskingPlan& plan) {
  std::vector<TokenId> out = seq.ids;
  for (const auto& mp : plan) out.at(mp.position) = mp.input;
  return out;
}

void log_distribution(const MaskedLm& lm, std::span<const TokenId> input, std::size_t position,
                      std::span<double> out) {
  if (out.size() != lm.spec.vocab_size) throw ValidationError("output buffer must have vocabulary size");
  if (position >= input.size()) throw ValidationError("position out of range");
  check_ids(input, lm.spec.vocab_size);
  Window(lm).forward(input, position, out);
}

double masked_loss(const MaskedLm& lm, std::span<const TokenSequence> seqs, std::span<const MaskingPlan> plans) {
  return run_masked(lm, seqs, plans, nullptr);
}

double masked_loss_grad(const MaskedLm& lm, std::span<const TokenSequence> seqs, std::span<const MaskingPlan> plans,
                        nn::GradientMap& grad) {
  if (!grad.same_layout(lm.params)) grad = nn::GradientMap::zeros_like(lm.params);
  grad.fill(0.0);
  const double loss = run_masked(lm, seqs, plans, grad.values().data());
  if (!std::isfinite(loss)) throw NumericError("non-finite masked LM loss");
  grad.check_finite();
  return loss;
}

MlmTrainResult train_mlm(std::span<const TokenSequence> corpus, const data::Vocabulary& vocab,
                         const MlmConfig& config, std::uint64_t seed) {
  config.masking.validate();
  if (corpus.empty()) throw ValidationError("masked LM training needs a non-empty corpus");
  if (std::none_of(corpus.begin(), corpus.end(), [](const auto& s) { return s.ids.size() > 2; })) {
    throw ValidationError("masked LM training needs at least one sequence with content tokens");
  }
  if (config.batch_size == 0) throw ValidationError("MLM batch_size must be >= 1");
  MlmTrainResult result;
  result.lm.spec = {vocab.size(), config.embed_dim, config.radius, vocab.fingerprint()};
  Rng rng(seed);
  result.lm.params = init_lm(result.lm.spec, rng.next());
  auto opt = nn::make_optimizer(config.optimizer, config.lr);
  nn::GradientMap grad = nn::GradientMap::zeros_like(result.lm.params);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t masked_total = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<TokenSequence> seqs;
      std::vector<MaskingPlan> plans;
      std::size_t masked = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& s = corpus[order[k]];
        if (s.ids.size() <= 2) continue;
        plans.push_back(plan_masking(s, config.masking, vocab.size(), rng));
        masked += plans.back().size();
        seqs.push_back(s);
      }
      if (masked == 0) continue;
      const double loss = masked_loss_grad(result.lm, seqs, plans, grad);
      opt->step(result.lm.params, grad);
      loss_sum += loss * static_cast<double>(masked);
      masked_total += masked;
    }
    result.epoch_loss.push_back(masked_total ? loss_sum / static_cast<double>(masked_total) : 0.0);
  }
  return result;
}

std::vector<double> masked_token_log_probs(const MaskedLm& lm, const TokenSequence& seq) {
  if (seq.ids.size() <= 2) throw ValidationError("sequence '" + seq.item_id + "' has no content tokens");
  check_ids(seq.ids, lm.spec.vocab_size);
  Window win(lm);
  std::vector<double> logp(lm.spec.vocab_size);
  std::vector<TokenId> input = seq.ids;
  std::vector<double> out;
  out.reserve(seq.content_length());
  for (std::size_t i = 1; i + 1 < input.size(); ++i) {
    const TokenId original = input[i];
    input[i] = Vocabulary::kMask;
    win.forward(input, i, logp);
    input[i] = original;
    out.push_back(logp[static_cast<std::size_t>(original)]);
  }
  return out;
}

double perplexity_from_log_probs(std::span<const double> log_probs) {
  if (log_probs.empty()) throw ValidationError("perplexity of an empty sequence");
  double sum = 0.0;
  for (double lp : log_probs) {
    if (std::isnan(lp) || lp > 0.0) throw NumericError("invalid token log-probability");
    sum += lp;
  }
  const double pp = std::exp(-sum / static_cast<double>(log_probs.size()));
  if (std::isnan(pp)) throw NumericError("perplexity is NaN");
  return pp;
}

double pseudo_perplexity(const MaskedLm& lm, const TokenSequence& seq) {
  return perplexity_from_log_probs(masked_token_log_probs(lm, seq));
}

}  // namespace xfer::lm
