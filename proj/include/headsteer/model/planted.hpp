// SPDX-License-Identifier: Apache-2.0
#pragma once

// Hand-built weights with known head roles.
//
// The residual stream is split into named feature slots (see PlantedLayout).
// Designated heads read and write only named slots through exact weights;
// background heads and FFN units carry seeded random weights and write only
// into the scratch slots, which the unembedding ignores.
//
// Roles:
//   collector    layer 0   attends mentioned object words; the layer-0 FFN
//                          saturates the result into a per-object "seen" flag
//   caption      layer 1   attends image positions of unseen objects (copies
//                          their identity into "evidence"); once every object
//                          is seen it falls back to padding positions, whose
//                          value is a weak "stop" signal
//   verifier     layer 1   attends the image position of the seen object if it
//                          is present ("found"), padding otherwise ("notfound")
//   memory       layer 2   attends <bos> and writes prior_bias-weighted
//                          evidence for the prior objects
//   late caption last      a second caption head
//
// With prior_bias = 0 a caption lists exactly the scene objects and stops.
// With prior_bias > 0 the memory prior plus object co-occurrence competes with
// the stop signal once the scene is exhausted; that is where hallucinations
// come from, and why amplifying the caption heads suppresses them.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "headsteer/model/config.hpp"
#include "headsteer/model/vocab.hpp"
#include "headsteer/model/weights.hpp"

namespace headsteer::model {

struct HeadRef {
  std::size_t layer = 0;
  std::size_t head = 0;
  friend bool operator==(const HeadRef&, const HeadRef&) = default;
};

struct PlantedRoles {
  HeadRef collector;
  HeadRef caption;
  HeadRef verifier;
  HeadRef memory;
  HeadRef late_caption;

  /// Heads whose output depends on image positions by construction.
  std::vector<HeadRef> vision_heads() const { return {caption, verifier, late_caption}; }
};

/// Residual-stream slot offsets for a vocabulary with n_objects objects.
struct PlantedLayout {
  explicit PlantedLayout(std::size_t n_objects);

  std::size_t n_objects;
  std::size_t bias = 0;
  std::size_t tok_obj, img_obj;
  std::size_t is_image, is_blank, is_bos, is_dot, is_question;
  std::size_t seen_raw, seen, evid;
  std::size_t stop, found, notfound;
  std::size_t position;
  std::size_t scratch;  ///< first scratch slot; scratch runs to d_model
  static constexpr std::size_t kPositionDims = 8;
  static constexpr std::size_t kMinScratch = 8;
};

/// Construction constants. Logit-valued fields are pre-softmax logits before
/// the 1/sqrt(d_head) factor is folded in.
struct PlantedParams {
  double bias = 3.0;         ///< constant slot carried by every token
  double gain = 3.5;         ///< all normalization gains; close to typical residual norms
  double collect_logit = 30.0;
  double saturation = 20.0;  ///< seen = min(1, saturation * seen_raw)
  double caption_logit = 30.0;
  double seen_suppress = 40.0;
  double blank_logit = 18.0;
  double stop_value = 0.25;
  double verify_match_logit = 30.0;
  double verify_blank_logit = 20.0;
  double verify_bos_logit = 10.0;
  double notfound_value = 1.0;
  double memory_logit = 30.0;
  std::vector<double> prior_strength = {1.0, 0.8, 0.6};  ///< per prior object

  double evid_weight = 10.0;
  double seen_penalty = 50.0;
  double cooccur_weight = 7.5;  ///< times prior_bias, per mentioned trigger
  double eos_bias = 0.5;
  double stop_weight = 4.0;
  double dot_weight = 200.0;
  double suppress = 100.0;  ///< pushes tokens that are wrong for the current mode
  double found_weight = 4.0;
  double notfound_weight = 2.0;
  double no_bias = 0.5;
  double yes_prior_weight = 24.0;  ///< times prior_bias, per seen prior object

  double noise_weight = 0.02;  ///< background projection entries
  double noise_out = 0.05;     ///< background writes into scratch
  double embed_noise = 0.05;   ///< scratch component of embeddings
  double position_scale = 0.1;
};

struct PlantedModel {
  Weights weights;
  PlantedRoles roles;
  PlantedLayout layout;
  double prior_bias;
};

/// Throws InvalidArgument if the config cannot host the construction for
/// this vocabulary (too few layers/heads, d_head or d_model too small, token
/// tables of the wrong size, fewer than 6 image tokens).
PlantedModel build_planted_model(const ModelConfig& cfg, std::uint64_t seed, double prior_bias,
                                 const PlantedParams& params = {},
                                 const VocabSpec& vocab = default_vocab());

/// Frozen fixture strength: baseline captions on the default scene set
/// hallucinate at the rate the evaluation fixture requires.
inline constexpr double kDefaultPriorBias = 0.15;

}  // namespace headsteer::model
