// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace headsteer::model {

/// Per-(layer, head) output scale applied before the output projection.
/// Unlisted heads keep scale 1.0.
class HeadScalePlan {
 public:
  HeadScalePlan() = default;
  HeadScalePlan(std::size_t n_layers, std::size_t n_heads);

  /// Scale must be finite and > 0; indices must be in range.
  void set(std::size_t layer, std::size_t head, double scale);
  double scale(std::size_t layer, std::size_t head) const;
  std::span<const double> layer_scales(std::size_t layer) const;

  std::size_t n_layers() const noexcept { return n_layers_; }
  std::size_t n_heads() const noexcept { return n_heads_; }
  bool is_identity() const noexcept;

  friend bool operator==(const HeadScalePlan&, const HeadScalePlan&) = default;

 private:
  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::vector<double> scales_;
};

}  // namespace headsteer::model
