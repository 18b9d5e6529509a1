// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/head_plan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "headsteer/error.hpp"

namespace headsteer::model {

HeadScalePlan::HeadScalePlan(std::size_t n_layers, std::size_t n_heads)
    : n_layers_(n_layers), n_heads_(n_heads), scales_(n_layers * n_heads, 1.0) {}

void HeadScalePlan::set(std::size_t layer, std::size_t head, double scale) {
  if (layer >= n_layers_ || head >= n_heads_) {
    throw InvalidArgument("HeadScalePlan: (" + std::to_string(layer) + ", " +
                          std::to_string(head) + ") out of range");
  }
  if (!std::isfinite(scale) || !(scale > 0.0)) {
    throw InvalidArgument("HeadScalePlan: scale must be finite and positive");
  }
  scales_[layer * n_heads_ + head] = scale;
}

double HeadScalePlan::scale(std::size_t layer, std::size_t head) const {
  if (layer >= n_layers_ || head >= n_heads_) throw InvalidArgument("HeadScalePlan: out of range");
  return scales_[layer * n_heads_ + head];
}

std::span<const double> HeadScalePlan::layer_scales(std::size_t layer) const {
  if (layer >= n_layers_) throw InvalidArgument("HeadScalePlan: layer out of range");
  return {scales_.data() + layer * n_heads_, n_heads_};
}

bool HeadScalePlan::is_identity() const noexcept {
  return std::all_of(scales_.begin(), scales_.end(), [](double s) { return s == 1.0; });
}

}  // namespace headsteer::model
