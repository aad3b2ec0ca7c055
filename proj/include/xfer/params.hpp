// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xfer::nn {

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;  // in elements
  std::size_t size = 0;
  bool operator==(const TensorInfo&) const = default;
};

/// Ordered, named tensor shapes over one flat buffer.
class ParamLayout {
 public:
  void add(std::string name, std::vector<std::size_t> shape);
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::size_t total() const { return total_; }
  /// Throws ValidationError for unknown names.
  const TensorInfo& find(std::string_view name) const;
  bool operator==(const ParamLayout& other) const { return tensors_ == other.tensors_; }

 private:
  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const ParamLayout>;

/// Flat double storage addressed through a layout. Copies are deep.
class NamedValues {
 public:
  NamedValues() = default;
  explicit NamedValues(LayoutPtr layout) : layout_(std::move(layout)), values_(layout_->total(), 0.0) {}
  NamedValues(LayoutPtr layout, std::vector<double> values);

  const ParamLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> tensor(std::string_view name);
  std::span<const double> tensor(std::string_view name) const;
  bool same_layout(const NamedValues& other) const;
  bool all_finite() const;
  void fill(double v);

 protected:
  LayoutPtr layout_;
  std::vector<double> values_;
};

/// Model parameters.
class ParamSet : public NamedValues {
 public:
  using NamedValues::NamedValues;
  ParamSet clone() const { return *this; }
};

/// Gradients keyed like the ParamSet they were taken against.
class GradientMap : public NamedValues {
 public:
  using NamedValues::NamedValues;
  static GradientMap zeros_like(const NamedValues& p) { return GradientMap(p.layout_ptr()); }
  /// Throws NumericError naming the first tensor that holds a NaN/Inf.
  void check_finite() const;
  void scale(double s);
  /// this += alpha * other
  void add(const GradientMap& other, double alpha = 1.0);
};

}  // namespace xfer::nn
