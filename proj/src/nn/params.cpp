// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include "xfer/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "xfer/error.hpp"
#include "xfer/simd.hpp"

namespace xfer::nn {

void ParamLayout::add(std::string name, std::vector<std::size_t> shape) {
  for (const auto& t : tensors_) {
    if (t.name == name) throw ValidationError("duplicate tensor name '" + name + "'");
  }
  const std::size_t size = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  tensors_.push_back({std::move(name), std::move(shape), total_, size});
  total_ += size;
}

const TensorInfo& ParamLayout::find(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ValidationError("unknown tensor '" + std::string(name) + "'");
}

NamedValues::NamedValues(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_->total()) {
    throw ValidationError("value count " + std::to_string(values_.size()) + " does not match layout size " +
                          std::to_string(layout_->total()));
  }
}

std::span<double> NamedValues::tensor(std::string_view name) {
  const auto& t = layout_->find(name);
  return std::span(values_).subspan(t.offset, t.size);
}

std::span<const double> NamedValues::tensor(std::string_view name) const {
  const auto& t = layout_->find(name);
  return std::span(values_).subspan(t.offset, t.size);
}

bool NamedValues::same_layout(const NamedValues& other) const {
  return layout_ == other.layout_ || (layout_ && other.layout_ && *layout_ == *other.layout_);
}

bool NamedValues::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

void NamedValues::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void GradientMap::check_finite() const {
  for (const auto& t : layout_->tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) {
      if (!std::isfinite(values_[t.offset + i])) {
        throw NumericError("non-finite gradient in tensor '" + t.name + "'");
      }
    }
  }
}

void GradientMap::scale(double s) {
  for (double& x : values_) x *= s;
}

void GradientMap::add(const GradientMap& other, double alpha) {
  if (!same_layout(other)) throw ValidationError("gradient layouts differ");
  simd::axpy(alpha, other.values(), values());
}

}  // namespace xfer::nn
