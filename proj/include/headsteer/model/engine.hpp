// SPDX-License-Identifier: Apache-2.0
#pragma once

// Decoder-only multimodal transformer.
//
// Per layer (pre-norm residual):
//   X  = g_attn * R / ||R||                         (row-wise)
//   A_h = softmax(X Wq_h (X Wk_h)^T / sqrt(d_head) + causal) X Wv_h
//   R' = R + [s_1 A_1, ..., s_H A_H] Wo             (s_h from a HeadScalePlan)
//   Z  = g_ffn * R' / ||R'||
//   R'' = R' + relu(Z W1) W2
// Logits at the last position: (g_final * R / ||R||) Wu.
//
// Captures record the unscaled A_h at the last position of each forward call.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "headsteer/model/capture.hpp"
#include "headsteer/model/config.hpp"
#include "headsteer/model/head_plan.hpp"
#include "headsteer/model/kv_cache.hpp"
#include "headsteer/model/weights.hpp"
#include "headsteer/numerics/tensor.hpp"

namespace headsteer::model {

using numerics::Vec;

/// Causal single-head attention over a full sequence. Positions flagged in
/// `hidden` (if non-empty, one flag per row) are never attended.
Matrix head_forward(const Matrix& x_seq, const Matrix& wq, const Matrix& wk, const Matrix& wv,
                    std::span<const std::uint8_t> hidden = {});

struct MhaResult {
  Matrix output;                  ///< seq x d_model
  std::vector<Vec> last_position;  ///< unscaled head outputs at the final row, one per head
};

/// Multi-head attention of one layer on an already-normalized sequence, with
/// per-head scales from `plan`. `image_positions` (optional) marks rows that
/// heads with image_masked set must not attend.
MhaResult mha_forward(const Matrix& x_seq, const LayerWeights& lw, const HeadScalePlan& plan,
                      std::size_t layer, std::span<const std::uint8_t> image_positions = {});

struct StepResult {
  Vec logits;
  ForwardCapture capture;
  /// Final-row attention probabilities per (layer * n_heads + head), over all
  /// positions so far. Only filled when the session records attention.
  std::vector<std::vector<double>> attention;
};

class Session;

/// One forward call split into per-layer phases so a caller can inspect head
/// outputs of layer l before deciding how layer l is scaled.
class LayerwisePass {
 public:
  LayerwisePass(const LayerwisePass&) = delete;
  LayerwisePass& operator=(const LayerwisePass&) = delete;
  LayerwisePass(LayerwisePass&&) noexcept = default;

  std::size_t next_layer() const noexcept { return layer_; }
  bool done() const noexcept;

  /// Computes unscaled head outputs for the next layer and appends its keys/values.
  void attend();
  /// Unscaled output of head h at the last new position (valid after attend()).
  std::span<const double> head_output(std::size_t h) const;
  /// Applies per-head scales, output projection, residual and FFN; advances a layer.
  void complete(std::span<const double> scales);
  /// Logits at the last position; commits the new positions to the cache.
  StepResult finish();

 private:
  friend class Session;
  LayerwisePass(Session& session, std::span<const InputToken> tokens);

  Session* session_;
  std::size_t start_;
  std::size_t n_new_;
  std::size_t layer_ = 0;
  bool attended_ = false;
  Matrix residual_;
  std::vector<Matrix> head_out_;
  ForwardCapture capture_;
  std::vector<std::vector<double>> attention_;
};

/// Single-writer generation state: borrowed weights plus an owned KV cache.
class Session {
 public:
  Session(const Weights& weights, Stream stream);

  /// Appends `tokens`, returns logits and captures at the last of them.
  StepResult step(std::span<const InputToken> tokens, const HeadScalePlan& plan);
  LayerwisePass begin(std::span<const InputToken> tokens);

  void reset() noexcept { cache_.clear(); }
  std::size_t length() const noexcept { return cache_.length(); }
  Stream stream() const noexcept { return stream_; }
  const Weights& weights() const noexcept { return *weights_; }
  const KVCache& cache() const noexcept { return cache_; }

  void set_record_attention(bool on) noexcept { record_attention_ = on; }
  /// Number of positions pushed through the full stack so far (work counter).
  std::size_t positions_processed() const noexcept { return positions_processed_; }

 private:
  friend class LayerwisePass;
  const Weights* weights_;
  Stream stream_;
  KVCache cache_;
  bool record_attention_ = false;
  std::size_t positions_processed_ = 0;
};

/// Index of the largest value; ties go to the lowest index.
TokenId argmax(std::span<const double> logits);

struct GenerateOptions {
  std::size_t max_new = 32;
  bool use_cache = true;
  std::optional<TokenId> eos;  ///< stop after emitting this token when set
  bool record_captures = false;
};

struct GenerationResult {
  std::vector<TokenId> tokens;
  /// Capture at the position predicting each emitted token (record_captures only).
  std::vector<ForwardCapture> captures;
};

/// Greedy decoding. The text-only stream omits the image span entirely.
GenerationResult generate(const Weights& weights, const Prompt& prompt, Stream stream,
                          const HeadScalePlan& plan, const GenerateOptions& options);

/// Greedy continuation of a session whose last forward produced `first`.
/// Shared by the baseline and reinforced decoders.
GenerationResult continue_greedy(Session& session, const Prompt& prompt, StepResult first,
                                 const HeadScalePlan& plan, const GenerateOptions& options);

}  // namespace headsteer::model
