// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "headsteer/model/config.hpp"
#include "headsteer/model/vocab.hpp"

namespace headsteer::evalsuite {

using model::TokenId;
using model::VocabSpec;

struct Scene {
  std::size_t scene_id = 0;
  std::vector<TokenId> true_objects;  ///< ascending token ids, nonempty
  std::vector<TokenId> image_tokens;  ///< object image ids in the same order, then padding

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// How make_scenes draws. Objects are drawn one at a time without replacement
/// with probability proportional to their weight among those not yet drawn.
struct SceneDistribution {
  std::size_t min_objects = 2;
  std::size_t max_objects = 5;   ///< count is uniform on [min, max]
  double prior_weight = 0.3;     ///< weight of prior objects
  double other_weight = 1.0;     ///< weight of every other object

  double weight(const VocabSpec& vocab, TokenId object) const {
    return vocab.is_prior(object) ? prior_weight : other_weight;
  }
};

/// Image encoding: object image ids in ascending object order, padded with the
/// blank image token to n_image_tokens. Throws if the scene does not fit.
std::vector<TokenId> encode_image(const VocabSpec& vocab, const std::vector<TokenId>& objects,
                                  std::size_t n_image_tokens);

/// Deterministic in (n, seed). Throws InvalidArgument for n == 0, a vocabulary
/// with fewer than 8 objects, or more objects per scene than image slots allow.
std::vector<Scene> make_scenes(std::size_t n, std::uint64_t seed, const VocabSpec& vocab,
                               std::size_t n_image_tokens = 6,
                               const SceneDistribution& dist = {});

/// Caption prompt: <bos> | image | describe.
model::Prompt caption_prompt(const VocabSpec& vocab, const Scene& scene);
/// Yes/no probe: <bos> | image | is there <object> ?
model::Prompt probe_prompt(const VocabSpec& vocab, const Scene& scene, TokenId object);

nlohmann::json scenes_to_json(const std::vector<Scene>& scenes, const VocabSpec& vocab);

}  // namespace headsteer::evalsuite
