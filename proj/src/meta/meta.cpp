// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/meta.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "xfer/error.hpp"
#include "xfer/eval.hpp"

namespace xfer::meta {
namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Validation {
  double loss = std::numeric_limits<double>::quiet_NaN();
  double f1 = std::numeric_limits<double>::quiet_NaN();
  double auc = std::numeric_limits<double>::quiet_NaN();
};

Validation validate_on(const Corpora& corpora, const nn::Classifier& model, const std::set<std::string>& exclude) {
  Validation v;
  double loss_sum = 0.0;
  std::size_t domains = 0;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& [name, d] : corpora) {
    if (exclude.contains(name) || d.val.empty()) continue;
    std::vector<double> probs;
    std::vector<int> ys;
    for (const auto& s : d.val) {
      probs.push_back(nn::predict_one(model, s.tokens.ids));
      ys.push_back(s.label);
    }
    loss_sum += nn::bce_loss(probs, ys).loss;
    ++domains;
    scores.insert(scores.end(), probs.begin(), probs.end());
    labels.insert(labels.end(), ys.begin(), ys.end());
  }
  if (domains == 0) return v;
  v.loss = loss_sum / static_cast<double>(domains);
  const auto m = eval::evaluate(scores, labels);
  v.f1 = m.f1_macro;
  v.auc = m.auc;
  return v;
}

std::map<std::string, std::size_t> train_sizes(const Corpora& corpora) {
  std::map<std::string, std::size_t> sizes;
  for (const auto& [name, d] : corpora) sizes[name] = d.train.size();
  return sizes;
}

std::size_t eligible_domains(const Corpora& corpora, const std::set<std::string>& exclude) {
  std::size_t n = 0;
  for (const auto& [name, d] : corpora) n += exclude.contains(name) ? 0 : 1;
  return n;
}

using StepFn = StepStats (*)(const nn::Objective&, nn::ParamSet&, std::span<const TaskData>, const MetaConfig&,
                             nn::Optimizer&);

StepStats pooled_step(const nn::Objective& objective, nn::ParamSet& theta, std::span<const TaskData> tasks,
                      const MetaConfig&, nn::Optimizer& opt) {
  std::vector<nn::Example> batch;
  for (const auto& t : tasks) {
    const double coeff = 1.0 / static_cast<double>(t.support.size() + t.query.size());
    for (const auto* set : {&t.support, &t.query}) {
      for (auto ex : *set) {
        ex.coeff = coeff;
        batch.push_back(ex);
      }
    }
  }
  nn::GradientMap grad = nn::GradientMap::zeros_like(theta);
  const double loss = objective.loss_grad(theta, batch, grad);
  if (!std::isfinite(loss)) throw NumericError("non-finite pooled loss; iteration aborted");
  opt.step(theta, grad);
  const double mean = loss / static_cast<double>(tasks.size());
  return {mean, mean};
}

TrainResult run_loop(const Corpora& corpora, const nn::Classifier& init, const MetaConfig& config,
                     std::uint64_t seed, StepFn step) {
  config.validate();
  for (const auto& name : config.exclude) {
    if (!corpora.contains(name)) throw ValidationError("unknown domain '" + name + "' in exclusion list");
  }
  TrainResult result{init, {}, 0};
  if (config.max_iterations == 0) return result;

  data::TaskSamplerConfig sc;
  sc.tasks = config.tasks == 0 ? eligible_domains(corpora, config.exclude) : config.tasks;
  sc.support_size = config.support_size;
  sc.query_size = config.query_size;
  sc.exclude = config.exclude;
  data::TaskSampler sampler(train_sizes(corpora), sc, seed);

  const nn::ClassifierObjective objective(init.spec);
  auto outer = nn::make_optimizer(config.outer_optimizer, config.beta);
  nn::Classifier current = init;
  Validation best = validate_on(corpora, current, config.exclude);
  std::size_t since_best = 0;

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    const auto batches = sampler.sample();
    const auto tasks = materialize(corpora, batches);
    const auto stats = step(objective, current.params, tasks, config, *outer);
    const auto val = validate_on(corpora, current, config.exclude);
    TraceRow row{it, stats.mean_support_loss, stats.mean_query_loss, val.loss, val.f1, val.auc, {}};
    for (const auto& b : batches) row.task_domains.push_back(b.domain);
    result.trace.push_back(std::move(row));

    const bool have_val = !std::isnan(val.loss);
    if (!have_val || std::isnan(best.loss) || val.loss < best.loss) {
      best = val;
      result.model = current;
      result.best_iteration = it;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace

Order parse_order(std::string_view name) {
  if (name == "first") return Order::first;
  if (name == "second") return Order::second;
  throw ValidationError("unknown order '" + std::string(name) + "' (expected first or second)");
}

std::string_view order_name(Order order) { return order == Order::first ? "first" : "second"; }

void MetaConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("meta alpha must be finite and >= 0");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("meta beta must be finite and > 0");
  if (inner_steps < 1) throw ValidationError("inner_steps must be >= 1");
  if (support_size < 1 || query_size < 1) throw ValidationError("support and query sizes must be >= 1");
}

std::string trace_csv(const MetaTrace& trace) {
  std::string out = "iteration,mean_support_loss,mean_query_loss,val_f1,val_auc\n";
  for (const auto& r : trace) {
    out += std::to_string(r.iteration) + "," + fmt(r.mean_support_loss) + "," + fmt(r.mean_query_loss) + "," +
           fmt(r.val_f1) + "," + fmt(r.val_auc) + "\n";
  }
  return out;
}

std::string task_log_csv(const MetaTrace& trace) {
  std::string out = "iteration,task,domain\n";
  for (const auto& r : trace) {
    for (std::size_t t = 0; t < r.task_domains.size(); ++t) {
      out += std::to_string(r.iteration) + "," + std::to_string(t) + "," + r.task_domains[t] + "\n";
    }
  }
  return out;
}

nn::ParamSet inner_adapt(const nn::Objective& objective, const nn::ParamSet& theta,
                         std::span<const nn::Example> support, double alpha, std::size_t steps,
                         std::vector<nn::ParamSet>* path) {
  if (support.empty()) throw ValidationError("inner_adapt: empty support set");
  nn::ParamSet current = theta.clone();
  nn::GradientMap grad = nn::GradientMap::zeros_like(theta);
  for (std::size_t s = 0; s < steps; ++s) {
    if (path != nullptr) path->push_back(current);
    objective.loss_grad(current, support, grad);
    nn::sgd_step_in_place(current, grad, alpha);
  }
  return current;
}

StepStats meta_gradient(const nn::Objective& objective, const nn::ParamSet& theta, std::span<const TaskData> tasks,
                        double alpha, std::size_t inner_steps, Order order, nn::GradientMap& out) {
  if (tasks.empty()) throw ValidationError("meta step needs at least one task");
  out = nn::GradientMap::zeros_like(theta);
  StepStats stats;
  nn::GradientMap gq = nn::GradientMap::zeros_like(theta);
  // Tasks are reduced in input order so the sum does not depend on scheduling.
  for (const auto& task : tasks) {
    if (task.support.empty() || task.query.empty()) {
      throw ValidationError("task for domain '" + task.domain + "' has an empty support or query set");
    }
    stats.mean_support_loss += objective.loss(theta, task.support);
    std::vector<nn::ParamSet> path;
    const auto adapted = inner_adapt(objective, theta, task.support, alpha, inner_steps,
                                     order == Order::second ? &path : nullptr);
    const double lq = objective.loss_grad(adapted, task.query, gq);
    if (!std::isfinite(lq)) {
      throw NumericError("non-finite query loss for domain '" + task.domain + "'; iteration aborted");
    }
    stats.mean_query_loss += lq;
    if (order == Order::second && alpha != 0.0) {
      // v <- (I - alpha H_s(theta_j)) v, from the last inner step back to the first.
      for (auto it = path.rbegin(); it != path.rend(); ++it) {
        const auto hv = objective.hessian_vector(*it, task.support, gq);
        gq.add(hv, -alpha);
      }
    }
    out.add(gq);
  }
  const auto n = static_cast<double>(tasks.size());
  stats.mean_support_loss /= n;
  stats.mean_query_loss /= n;
  out.check_finite();
  return stats;
}

StepStats meta_step(const nn::Objective& objective, nn::ParamSet& theta, std::span<const TaskData> tasks,
                    const MetaConfig& config, nn::Optimizer& outer) {
  nn::GradientMap grad;
  const auto stats = meta_gradient(objective, theta, tasks, config.alpha, config.inner_steps, config.order, grad);
  outer.step(theta, grad);
  return stats;
}

std::vector<TaskData> materialize(const Corpora& corpora, std::span<const data::TaskBatch> batches) {
  std::vector<TaskData> out;
  out.reserve(batches.size());
  for (const auto& b : batches) {
    const auto& train = corpora.at(b.domain).train;
    TaskData t;
    t.domain = b.domain;
    const double cs = 1.0 / static_cast<double>(b.support.size());
    const double cq = 1.0 / static_cast<double>(b.query.size());
    for (std::size_t i : b.support) t.support.push_back({train.at(i).tokens.ids, double(train[i].label), cs});
    for (std::size_t i : b.query) t.query.push_back({train.at(i).tokens.ids, double(train[i].label), cq});
    out.push_back(std::move(t));
  }
  return out;
}

TrainResult train_general(const Corpora& corpora, const nn::Classifier& init, const MetaConfig& config,
                          std::uint64_t seed) {
  return run_loop(corpora, init, config, seed, &meta_step);
}

TrainResult train_pooled(const Corpora& corpora, const nn::Classifier& init, const MetaConfig& config,
                         std::uint64_t seed) {
  return run_loop(corpora, init, config, seed, &pooled_step);
}

}  // namespace xfer::meta
