// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "headsteer/model/config.hpp"
#include "headsteer/numerics/tensor.hpp"

namespace headsteer::model {

using numerics::Matrix;

struct LayerWeights {
  std::vector<Matrix> wq;  ///< n_heads x (d_model x d_head)
  std::vector<Matrix> wk;
  std::vector<Matrix> wv;
  Matrix wo;               ///< d_model x d_model; rows [h*d_head, (h+1)*d_head) belong to head h
  double attn_gain = 1.0;  ///< scalar gain of the normalization feeding attention
  double ffn_gain = 1.0;   ///< scalar gain of the normalization feeding the FFN
  Matrix w1;               ///< d_model x d_ff
  Matrix w2;               ///< d_ff x d_model
  /// Nonzero entries hide every image position from that head.
  std::vector<std::uint8_t> image_masked;

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct Weights {
  ModelConfig config;
  Matrix token_embedding;  ///< vocab_size x d_model
  Matrix image_embedding;  ///< image_vocab_size x d_model
  Matrix position;         ///< max_positions x d_model
  std::vector<LayerWeights> layers;
  double final_gain = 1.0;
  Matrix unembedding;  ///< d_model x vocab_size

  /// All-zero weights of the right shapes, unit gains.
  static Weights zeros(const ModelConfig& cfg);

  /// Shape and finiteness checks; throws InvalidArgument.
  void validate() const;

  friend bool operator==(const Weights&, const Weights&) = default;
};

/// "HSWT" file: magic, u32 version, u32 JSON header length, JSON shape header,
/// then little-endian f64 in this order: token embedding, image embedding,
/// positions, per layer (wq[0..H), wk[0..H), wv[0..H), wo, w1, w2, attn_gain,
/// ffn_gain), final_gain, unembedding. Head masks live in the JSON header.
inline constexpr std::uint32_t kWeightsFormatVersion = 1;

void save_weights(const Weights& w, const std::filesystem::path& path);
Weights load_weights(const std::filesystem::path& path);

}  // namespace headsteer::model
