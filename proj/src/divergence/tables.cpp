// SPDX-License-Identifier: Apache-2.0
#include "headsteer/divergence/tables.hpp"

#include <cmath>
#include <string>

#include "headsteer/error.hpp"

namespace headsteer::divergence {

HeadTable::HeadTable(std::size_t n_layers, std::size_t n_heads)
    : n_layers_(n_layers), n_heads_(n_heads), values_(n_layers * n_heads, 0.0) {}

HeadTable::HeadTable(std::size_t n_layers, std::size_t n_heads, std::vector<double> values)
    : n_layers_(n_layers), n_heads_(n_heads), values_(std::move(values)) {
  if (values_.size() != n_layers * n_heads) {
    throw InvalidArgument("HeadTable: expected " + std::to_string(n_layers * n_heads) +
                          " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("HeadTable: entries must be finite and >= 0");
  }
}

}  // namespace headsteer::divergence
