// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <numeric>

#include "xfer/data.hpp"
#include "xfer/error.hpp"

namespace xfer::data {

TaskSampler::TaskSampler(std::map<std::string, std::size_t> domain_sizes, TaskSamplerConfig config,
                         std::uint64_t seed)
    : sizes_(std::move(domain_sizes)), config_(std::move(config)), rng_(seed) {
  if (config_.tasks < 1) throw ValidationError("tasks per batch must be >= 1");
  if (config_.support_size < 1 || config_.query_size < 1) {
    throw ValidationError("support and query sizes must be >= 1");
  }
  const std::size_t need = config_.support_size + config_.query_size;
  for (const auto& [name, size] : sizes_) {
    if (config_.exclude.contains(name)) continue;
    if (size < need) {
      throw ValidationError("domain '" + name + "' has " + std::to_string(size) + " train items; a task needs " +
                            std::to_string(need) + " (support " + std::to_string(config_.support_size) +
                            " + query " + std::to_string(config_.query_size) + ")");
    }
    domains_.push_back(name);
  }
  if (domains_.empty()) throw ValidationError("no domains left to sample tasks from");
}

std::vector<TaskBatch> TaskSampler::sample() {
  std::vector<TaskBatch> out;
  out.reserve(config_.tasks);
  for (std::size_t t = 0; t < config_.tasks; ++t) {
    if (cursor_ == order_.size()) {
      order_.resize(domains_.size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      rng_.shuffle(std::span(order_));
      cursor_ = 0;
    }
    const auto& name = domains_[order_[cursor_++]];
    const std::size_t n = sizes_.at(name);
    const std::size_t need = config_.support_size + config_.query_size;
    // Partial Fisher-Yates: the first `need` slots are a uniform draw without
    // replacement.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < need; ++i) std::swap(idx[i], idx[i + rng_.below(n - i)]);
    TaskBatch task;
    task.domain = name;
    task.support.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(config_.support_size));
    task.query.assign(idx.begin() + static_cast<std::ptrdiff_t>(config_.support_size),
                      idx.begin() + static_cast<std::ptrdiff_t>(need));
    out.push_back(std::move(task));
  }
  return out;
}

std::vector<TaskBatch> sample_tasks(const std::map<std::string, std::size_t>& domain_sizes,
                                    const TaskSamplerConfig& config, std::uint64_t seed) {
  return TaskSampler(domain_sizes, config, seed).sample();
}

}  // namespace xfer::data
