// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace headsteer::divergence {

/// Dense layer x head grid of nonnegative finite values.
class HeadTable {
 public:
  HeadTable() = default;
  HeadTable(std::size_t n_layers, std::size_t n_heads);
  /// Throws InvalidArgument on size mismatch, negative or non-finite entries.
  HeadTable(std::size_t n_layers, std::size_t n_heads, std::vector<double> values);

  std::size_t n_layers() const noexcept { return n_layers_; }
  std::size_t n_heads() const noexcept { return n_heads_; }
  double operator()(std::size_t l, std::size_t h) const { return values_[l * n_heads_ + h]; }
  double& operator()(std::size_t l, std::size_t h) { return values_[l * n_heads_ + h]; }
  std::span<const double> row(std::size_t l) const { return {values_.data() + l * n_heads_, n_heads_}; }
  std::span<double> row(std::size_t l) { return {values_.data() + l * n_heads_, n_heads_}; }
  std::span<const double> values() const& noexcept { return values_; }
  std::span<const double> values() const&& = delete;  // would dangle

  friend bool operator==(const HeadTable&, const HeadTable&) = default;

 private:
  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::vector<double> values_;
};

/// Per-(layer, head) divergence between the with-image and text-only streams at one step.
struct VhdTable {
  std::size_t step = 0;
  HeadTable scores;
};

/// Squared norm of each head's text-only output.
struct TaTable {
  HeadTable values;
};

/// One T-VHD value per analyzed token.
struct TvhdSeries {
  std::size_t k = 0;
  std::vector<double> values;
};

}  // namespace headsteer::divergence
