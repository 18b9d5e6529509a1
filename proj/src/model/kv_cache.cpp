// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/kv_cache.hpp"

#include <algorithm>
#include <string>

#include "headsteer/error.hpp"

namespace headsteer::model {

KVCache::KVCache(const ModelConfig& cfg)
    : n_heads_(cfg.n_heads),
      d_head_(cfg.d_head),
      capacity_(cfg.max_positions),
      n_blocks_(cfg.n_layers * cfg.n_heads),
      image_flags_(cfg.max_positions, 0) {}

void KVCache::reserve(std::size_t n_positions) {
  if (n_positions <= allocated_) return;
  if (n_positions > capacity_) {
    throw CapacityError("KVCache: " + std::to_string(n_positions) + " positions exceed capacity " +
                        std::to_string(capacity_));
  }
  std::size_t grown = std::max<std::size_t>(allocated_ * 2, 32);
  grown = std::min(std::max(grown, n_positions), capacity_);
  auto relayout = [&](std::vector<double>& buf) {
    std::vector<double> next(n_blocks_ * grown * d_head_, 0.0);
    for (std::size_t b = 0; b < n_blocks_; ++b) {
      std::copy_n(buf.begin() + static_cast<std::ptrdiff_t>(b * allocated_ * d_head_),
                  allocated_ * d_head_,
                  next.begin() + static_cast<std::ptrdiff_t>(b * grown * d_head_));
    }
    buf = std::move(next);
  };
  relayout(keys_);
  relayout(values_);
  allocated_ = grown;
}

std::span<double> KVCache::key_row(std::size_t layer, std::size_t head, std::size_t pos) {
  return {keys_.data() + offset(layer, head) + pos * d_head_, d_head_};
}

std::span<double> KVCache::value_row(std::size_t layer, std::size_t head, std::size_t pos) {
  return {values_.data() + offset(layer, head) + pos * d_head_, d_head_};
}

std::span<const double> KVCache::keys(std::size_t layer, std::size_t head,
                                      std::size_t n_positions) const {
  return {keys_.data() + offset(layer, head), n_positions * d_head_};
}

std::span<const double> KVCache::values(std::size_t layer, std::size_t head,
                                        std::size_t n_positions) const {
  return {values_.data() + offset(layer, head), n_positions * d_head_};
}

void KVCache::commit(std::size_t new_length) {
  if (new_length < length_) throw InvalidArgument("KVCache: length cannot decrease");
  if (new_length > capacity_) {
    throw CapacityError("KVCache: length " + std::to_string(new_length) + " exceeds capacity " +
                        std::to_string(capacity_));
  }
  length_ = new_length;
}

}  // namespace headsteer::model
