// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "headsteer/model/config.hpp"

namespace headsteer::model {

/// Unscaled per-head attention outputs (pre output projection) at one query
/// position, for every layer and head.
class ForwardCapture {
 public:
  ForwardCapture() = default;
  ForwardCapture(Stream stream, std::size_t n_layers, std::size_t n_heads, std::size_t d_head);
  /// Adopts a flat layer-major, head-major buffer; throws on size mismatch.
  ForwardCapture(Stream stream, std::size_t n_layers, std::size_t n_heads, std::size_t d_head,
                 std::vector<double> data);

  Stream stream() const noexcept { return stream_; }
  std::size_t n_layers() const noexcept { return n_layers_; }
  std::size_t n_heads() const noexcept { return n_heads_; }
  std::size_t d_head() const noexcept { return d_head_; }

  std::span<const double> head(std::size_t layer, std::size_t h) const {
    return {data_.data() + (layer * n_heads_ + h) * d_head_, d_head_};
  }
  std::span<double> head(std::size_t layer, std::size_t h) {
    return {data_.data() + (layer * n_heads_ + h) * d_head_, d_head_};
  }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const ForwardCapture& other) const noexcept {
    return n_layers_ == other.n_layers_ && n_heads_ == other.n_heads_ && d_head_ == other.d_head_;
  }

  friend bool operator==(const ForwardCapture&, const ForwardCapture&) = default;

 private:
  Stream stream_ = Stream::with_image;
  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::size_t d_head_ = 0;
  std::vector<double> data_;
};

/// Largest absolute componentwise difference; shapes must match.
double max_abs_difference(const ForwardCapture& a, const ForwardCapture& b);

}  // namespace headsteer::model
