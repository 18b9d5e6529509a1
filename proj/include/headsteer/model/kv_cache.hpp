// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "headsteer/model/config.hpp"

namespace headsteer::model {

/// Keys and values per (layer, head) for every committed position, plus which
/// positions hold image tokens. Rows beyond length() are scratch space owned by
/// an in-flight forward pass and become visible only on commit().
class KVCache {
 public:
  KVCache() = default;
  explicit KVCache(const ModelConfig& cfg);

  std::size_t length() const noexcept { return length_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t d_head() const noexcept { return d_head_; }

  std::span<double> key_row(std::size_t layer, std::size_t head, std::size_t pos);
  std::span<double> value_row(std::size_t layer, std::size_t head, std::size_t pos);
  std::span<const double> keys(std::size_t layer, std::size_t head, std::size_t n_positions) const;
  std::span<const double> values(std::size_t layer, std::size_t head,
                                 std::size_t n_positions) const;

  bool is_image(std::size_t pos) const { return image_flags_[pos] != 0; }
  void set_image_flag(std::size_t pos, bool image) { image_flags_[pos] = image ? 1 : 0; }

  /// Makes rows [0, n_positions) addressable; grows storage geometrically.
  /// Throws CapacityError beyond capacity().
  void reserve(std::size_t n_positions);

  /// Extends the committed length; never shrinks.
  void commit(std::size_t new_length);
  void clear() noexcept { length_ = 0; }

 private:
  std::size_t offset(std::size_t layer, std::size_t head) const noexcept {
    return (layer * n_heads_ + head) * allocated_ * d_head_;
  }

  std::size_t n_heads_ = 0;
  std::size_t d_head_ = 0;
  std::size_t capacity_ = 0;
  std::size_t length_ = 0;
  std::size_t n_blocks_ = 0;   ///< n_layers * n_heads
  std::size_t allocated_ = 0;  ///< addressable positions per block
  std::vector<double> keys_;
  std::vector<double> values_;
  std::vector<std::uint8_t> image_flags_;
};

}  // namespace headsteer::model
