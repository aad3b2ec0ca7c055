// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "xfer/dual.hpp"
#include "xfer/error.hpp"
#include "xfer/rng.hpp"
#include "xfer/simd.hpp"

namespace xfer::nn {
namespace {

// Generic kernels; the double overloads route to the SIMD table.
template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}
inline double dot(const double* a, const double* b, std::size_t n) { return simd::dot(a, b, n); }

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { simd::axpy(alpha, x, y, n); }

template <class T>
T sigmoid(const T& x) {
  using std::exp;
  if (x >= T(0.0)) return T(1.0) / (T(1.0) + exp(-x));
  const T e = exp(x);
  return e / (T(1.0) + e);
}

struct Offsets {
  std::size_t emb = 0;
  std::vector<std::size_t> conv_w, conv_b;
  std::size_t hid_w = 0, hid_b = 0, out_w = 0, out_b = 0;

  explicit Offsets(const ParamLayout& layout, const ClassifierSpec& spec) {
    emb = layout.find("embedding").offset;
    if (spec.encoder == Encoder::conv_window) {
      for (std::size_t k : spec.conv_windows) {
        conv_w.push_back(layout.find("conv" + std::to_string(k) + ".weight").offset);
        conv_b.push_back(layout.find("conv" + std::to_string(k) + ".bias").offset);
      }
    }
    hid_w = layout.find("hidden.weight").offset;
    hid_b = layout.find("hidden.bias").offset;
    out_w = layout.find("output.weight").offset;
    out_b = layout.find("output.bias").offset;
  }
};

template <class T>
struct Cache {
  std::vector<T> feat;
  std::vector<T> hidden;
  std::vector<std::size_t> argmax;  // conv: best window start per (window, map)
  T prob = 0.0;
};

template <class T>
class Net {
 public:
  Net(const ClassifierSpec& spec, const Offsets& off, const T* theta) : s_(spec), o_(off), th_(theta) {}

  void forward(std::span<const TokenId> tokens, Cache<T>& c) const {
    using std::tanh;
    const std::size_t d = s_.embed_dim;
    const std::size_t f = s_.feature_dim();
    c.feat.assign(f, T(0.0));
    c.hidden.assign(s_.hidden, T(0.0));
    if (s_.encoder == Encoder::mean_pool) {
      const T inv = T(1.0 / static_cast<double>(tokens.size()));
      for (TokenId t : tokens) axpy(inv, emb(t), c.feat.data(), d);
    } else {
      c.argmax.assign(f, 0);
      std::vector<T> win;
      for (std::size_t w = 0; w < s_.conv_windows.size(); ++w) {
        const std::size_t k = s_.conv_windows[w];
        const std::size_t positions = tokens.size() >= k ? tokens.size() - k + 1 : 0;
        for (std::size_t m = 0; m < s_.conv_maps; ++m) {
          const T* wrow = th_ + o_.conv_w[w] + m * k * d;
          T best = T(0.0);
          std::size_t best_p = 0;
          for (std::size_t p = 0; p < positions; ++p) {
            T z = th_[o_.conv_b[w] + m];
            for (std::size_t j = 0; j < k; ++j) z += dot(wrow + j * d, emb(tokens[p + j]), d);
            const T a = tanh(z);
            if (p == 0 || a > best) {
              best = a;
              best_p = p;
            }
          }
          c.feat[w * s_.conv_maps + m] = best;
          c.argmax[w * s_.conv_maps + m] = best_p;
        }
      }
    }
    for (std::size_t r = 0; r < s_.hidden; ++r) {
      c.hidden[r] = tanh(th_[o_.hid_b + r] + dot(th_ + o_.hid_w + r * f, c.feat.data(), f));
    }
    const T logit = th_[o_.out_b] + dot(th_ + o_.out_w, c.hidden.data(), s_.hidden);
    c.prob = sigmoid(logit);
  }

  // Accumulates coeff * d loss / d theta into g.
  void backward(std::span<const TokenId> tokens, const Cache<T>& c, T dlogit, T* g) const {
    const std::size_t d = s_.embed_dim;
    const std::size_t f = s_.feature_dim();
    g[o_.out_b] += dlogit;
    axpy(dlogit, c.hidden.data(), g + o_.out_w, s_.hidden);
    std::vector<T> gfeat(f, T(0.0));
    for (std::size_t r = 0; r < s_.hidden; ++r) {
      const T h = c.hidden[r];
      const T gz = dlogit * th_[o_.out_w + r] * (T(1.0) - h * h);
      g[o_.hid_b + r] += gz;
      axpy(gz, c.feat.data(), g + o_.hid_w + r * f, f);
      axpy(gz, th_ + o_.hid_w + r * f, gfeat.data(), f);
    }
    if (s_.encoder == Encoder::mean_pool) {
      const T inv = T(1.0 / static_cast<double>(tokens.size()));
      for (TokenId t : tokens) axpy(inv, gfeat.data(), g + o_.emb + static_cast<std::size_t>(t) * d, d);
      return;
    }
    for (std::size_t w = 0; w < s_.conv_windows.size(); ++w) {
      const std::size_t k = s_.conv_windows[w];
      if (tokens.size() < k) continue;
      for (std::size_t m = 0; m < s_.conv_maps; ++m) {
        const std::size_t idx = w * s_.conv_maps + m;
        const T a = c.feat[idx];
        const T gz = gfeat[idx] * (T(1.0) - a * a);
        const std::size_t p = c.argmax[idx];
        g[o_.conv_b[w] + m] += gz;
        const T* wrow = th_ + o_.conv_w[w] + m * k * d;
        T* gwrow = g + o_.conv_w[w] + m * k * d;
        for (std::size_t j = 0; j < k; ++j) {
          const auto t = static_cast<std::size_t>(tokens[p + j]);
          axpy(gz, emb(tokens[p + j]), gwrow + j * d, d);
          axpy(gz, wrow + j * d, g + o_.emb + t * d, d);
        }
      }
    }
  }

 private:
  const T* emb(TokenId t) const { return th_ + o_.emb + static_cast<std::size_t>(t) * s_.embed_dim; }

  const ClassifierSpec& s_;
  const Offsets& o_;
  const T* th_;
};

template <class T>
T clamp_prob(const T& p) {
  if (p < T(kProbClamp)) return T(kProbClamp);
  if (p > T(1.0 - kProbClamp)) return T(1.0 - kProbClamp);
  return p;
}

template <class T>
T item_loss(const T& p, double y) {
  using std::log;
  const T pc = clamp_prob(p);
  return T(-y) * log(pc) - T(1.0 - y) * log(T(1.0) - pc);
}

void check_tokens(std::span<const TokenId> tokens, std::size_t vocab) {
  if (tokens.empty()) throw ValidationError("empty token sequence");
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw ValidationError("token id " + std::to_string(t) + " out of range for vocabulary of size " +
                            std::to_string(vocab));
    }
  }
}

// Loss sum_i coeff_i * loss_i and, when g is non-null, its gradient.
template <class T>
T run_batch(const ClassifierSpec& spec, const ParamLayout& layout, const T* theta, std::span<const Example> batch,
            T* g) {
  const Offsets off(layout, spec);
  const Net<T> net(spec, off, theta);
  Cache<T> cache;
  T total = 0.0;
  for (const auto& ex : batch) {
    check_tokens(ex.tokens, spec.vocab_size);
    net.forward(ex.tokens, cache);
    total += T(ex.coeff) * item_loss(cache.prob, ex.label);
    if (g != nullptr) {
      const double pv = value_of(cache.prob);
      // Derivative of the clamped loss: flat outside the clamp range.
      if (pv >= kProbClamp && pv <= 1.0 - kProbClamp) {
        net.backward(ex.tokens, cache, T(ex.coeff) * (cache.prob - T(ex.label)), g);
      }
    }
  }
  return total;
}

}  // namespace

std::string encoder_name(Encoder e) { return e == Encoder::mean_pool ? "mean-pool" : "conv-window"; }

Encoder parse_encoder(std::string_view name) {
  if (name == "mean-pool") return Encoder::mean_pool;
  if (name == "conv-window") return Encoder::conv_window;
  throw ValidationError("unknown encoder '" + std::string(name) + "' (expected mean-pool or conv-window)");
}

LayoutPtr classifier_layout(const ClassifierSpec& spec) {
  if (spec.vocab_size == 0 || spec.embed_dim == 0 || spec.hidden == 0) {
    throw ValidationError("classifier dimensions must be positive");
  }
  auto layout = std::make_shared<ParamLayout>();
  layout->add("embedding", {spec.vocab_size, spec.embed_dim});
  if (spec.encoder == Encoder::conv_window) {
    if (spec.conv_windows.empty() || spec.conv_maps == 0) throw ValidationError("conv encoder needs windows and maps");
    for (std::size_t k : spec.conv_windows) {
      if (k == 0) throw ValidationError("conv window must be >= 1");
      layout->add("conv" + std::to_string(k) + ".weight", {spec.conv_maps, k * spec.embed_dim});
      layout->add("conv" + std::to_string(k) + ".bias", {spec.conv_maps});
    }
  }
  layout->add("hidden.weight", {spec.hidden, spec.feature_dim()});
  layout->add("hidden.bias", {spec.hidden});
  layout->add("output.weight", {spec.hidden});
  layout->add("output.bias", {1});
  return layout;
}

ParamSet init_classifier(const ClassifierSpec& spec, std::uint64_t seed) {
  ParamSet params(classifier_layout(spec));
  Rng rng(seed);
  auto fill = [&](std::string_view name, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : params.tensor(name)) x = rng.uniform(-bound, bound);
  };
  fill("embedding", spec.embed_dim);
  if (spec.encoder == Encoder::conv_window) {
    for (std::size_t k : spec.conv_windows) {
      fill("conv" + std::to_string(k) + ".weight", k * spec.embed_dim);
      fill("conv" + std::to_string(k) + ".bias", k * spec.embed_dim);
    }
  }
  fill("hidden.weight", spec.feature_dim());
  fill("hidden.bias", spec.feature_dim());
  fill("output.weight", spec.hidden);
  fill("output.bias", spec.hidden);
  return params;
}

double predict_one(const Classifier& model, std::span<const TokenId> tokens) {
  check_tokens(tokens, model.spec.vocab_size);
  const Offsets off(model.params.layout(), model.spec);
  const Net<double> net(model.spec, off, model.params.values().data());
  Cache<double> cache;
  net.forward(tokens, cache);
  return clamp_prob(cache.prob);
}

std::vector<double> forward_classify(const Classifier& model, std::span<const data::TokenSequence> batch) {
  const Offsets off(model.params.layout(), model.spec);
  const Net<double> net(model.spec, off, model.params.values().data());
  Cache<double> cache;
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& seq : batch) {
    check_tokens(seq.ids, model.spec.vocab_size);
    net.forward(seq.ids, cache);
    out.push_back(clamp_prob(cache.prob));
  }
  return out;
}

LossAndGrad bce_loss(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) {
    throw ValidationError("bce_loss: " + std::to_string(probs.size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
  }
  if (probs.empty()) throw ValidationError("bce_loss: empty batch");
  LossAndGrad out;
  out.grad.resize(probs.size());
  const double m = static_cast<double>(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("bce_loss: label must be 0 or 1");
    const double y = labels[i];
    const double p = clamp_prob(probs[i]);
    out.loss += item_loss(p, y) / m;
    const bool inside = probs[i] >= kProbClamp && probs[i] <= 1.0 - kProbClamp;
    out.grad[i] = inside ? (-y / p + (1.0 - y) / (1.0 - p)) / m : 0.0;
  }
  return out;
}

double backward(const ClassifierSpec& spec, const ParamSet& params, std::span<const Example> batch,
                GradientMap& grad) {
  for (const auto& t : params.layout().tensors()) {
    const auto v = params.tensor(t.name);
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      throw NumericError("non-finite parameter in tensor '" + t.name + "'");
    }
  }
  if (!grad.same_layout(params)) grad = GradientMap::zeros_like(params);
  grad.fill(0.0);
  const double loss = run_batch<double>(spec, params.layout(), params.values().data(), batch,
                                        grad.values().data());
  grad.check_finite();  // names the first tensor a NaN/Inf reached
  if (!std::isfinite(loss)) throw NumericError("non-finite loss in classifier forward pass");
  return loss;
}

double batch_loss(const ClassifierSpec& spec, const ParamSet& params, std::span<const Example> batch) {
  return run_batch<double>(spec, params.layout(), params.values().data(), batch, nullptr);
}

GradientMap hessian_vector(const ClassifierSpec& spec, const ParamSet& params, std::span<const Example> batch,
                           const GradientMap& v) {
  if (!v.same_layout(params)) throw ValidationError("hessian_vector: direction layout differs from parameters");
  const auto theta = params.values();
  const auto dir = v.values();
  std::vector<Dual> th(theta.size());
  for (std::size_t i = 0; i < th.size(); ++i) th[i] = Dual(theta[i], dir[i]);
  std::vector<Dual> g(theta.size());
  run_batch<Dual>(spec, params.layout(), th.data(), batch, g.data());
  GradientMap out = GradientMap::zeros_like(params);
  auto o = out.values();
  for (std::size_t i = 0; i < g.size(); ++i) o[i] = g[i].d;
  out.check_finite();
  return out;
}

}  // namespace xfer::nn
