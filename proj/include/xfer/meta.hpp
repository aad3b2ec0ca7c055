// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Episodic general-model training: per-domain inner SGD on a support set,
// outer update from the summed query-set gradients of the adapted copies.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xfer/classifier.hpp"
#include "xfer/data.hpp"
#include "xfer/optim.hpp"

namespace xfer::meta {

enum class Order { first, second };
Order parse_order(std::string_view name);
std::string_view order_name(Order order);

struct MetaConfig {
  double alpha = 1e-2;  // inner learning rate
  double beta = 1e-3;   // outer learning rate
  std::size_t tasks = 0;  // per iteration; 0 means one per eligible domain
  std::size_t support_size = 8;
  std::size_t query_size = 8;
  std::size_t inner_steps = 1;
  Order order = Order::first;
  std::size_t max_iterations = 200;
  std::size_t patience = 10;  // iterations without a validation-loss improvement; 0 disables
  nn::OptimizerKind outer_optimizer = nn::OptimizerKind::adam;
  std::set<std::string> exclude;  // domains kept out of task sampling and validation

  void validate() const;
};

struct TraceRow {
  std::size_t iteration = 0;
  double mean_support_loss = 0.0;
  double mean_query_loss = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
  double val_auc = 0.0;
  std::vector<std::string> task_domains;
};

using MetaTrace = std::vector<TraceRow>;

/// CSV: iteration,mean_support_loss,mean_query_loss,val_f1,val_auc
std::string trace_csv(const MetaTrace& trace);
/// CSV: iteration,task,domain
std::string task_log_csv(const MetaTrace& trace);

/// theta_d = theta - alpha * grad L_s(theta), repeated `steps` times.
/// `path`, when given, receives the iterate before each step.
nn::ParamSet inner_adapt(const nn::Objective& objective, const nn::ParamSet& theta,
                         std::span<const nn::Example> support, double alpha, std::size_t steps,
                         std::vector<nn::ParamSet>* path = nullptr);

struct TaskData {
  std::string domain;
  std::vector<nn::Example> support;
  std::vector<nn::Example> query;
};

struct StepStats {
  double mean_support_loss = 0.0;
  double mean_query_loss = 0.0;
};

/// Sum over tasks of d L_q(theta_d) / d theta. First order treats theta_d as
/// a constant; second order backpropagates through the inner updates with
/// exact Hessian-vector products.
StepStats meta_gradient(const nn::Objective& objective, const nn::ParamSet& theta, std::span<const TaskData> tasks,
                        double alpha, std::size_t inner_steps, Order order, nn::GradientMap& out);

/// One outer update of `theta` through `outer` (configured with rate beta).
StepStats meta_step(const nn::Objective& objective, nn::ParamSet& theta, std::span<const TaskData> tasks,
                    const MetaConfig& config, nn::Optimizer& outer);

/// Per-domain train and validation data.
struct DomainData {
  std::vector<data::LabeledSequence> train;
  std::vector<data::LabeledSequence> val;
};
using Corpora = std::map<std::string, DomainData>;

struct TrainResult {
  nn::Classifier model;
  MetaTrace trace;
  std::size_t best_iteration = 0;  // 0 = the initialization
};

/// Episodic training from `init`; keeps the iterate with the lowest mean
/// validation loss across domains.
TrainResult train_general(const Corpora& corpora, const nn::Classifier& init, const MetaConfig& config,
                          std::uint64_t seed);

/// Classical pooled mini-batch training with the same sampler, budget and
/// early stopping: each iteration steps on the union of the sampled support
/// and query sets, without inner adaptation.
TrainResult train_pooled(const Corpora& corpora, const nn::Classifier& init, const MetaConfig& config,
                         std::uint64_t seed);

/// Builds tasks from sampled index batches; coefficients give per-set means.
std::vector<TaskData> materialize(const Corpora& corpora, std::span<const data::TaskBatch> batches);

}  // namespace xfer::meta
