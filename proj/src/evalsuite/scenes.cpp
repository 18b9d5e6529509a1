// SPDX-License-Identifier: Apache-2.0
#include "headsteer/evalsuite/scenes.hpp"

#include <algorithm>
#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/random.hpp"

namespace headsteer::evalsuite {

std::vector<TokenId> encode_image(const VocabSpec& vocab, const std::vector<TokenId>& objects,
                                  std::size_t n_image_tokens) {
  if (objects.size() > n_image_tokens) {
    throw InvalidArgument("encode_image: " + std::to_string(objects.size()) +
                          " objects do not fit in " + std::to_string(n_image_tokens) + " slots");
  }
  std::vector<TokenId> ids;
  for (TokenId o : objects) ids.push_back(vocab.image_token(o));
  std::sort(ids.begin(), ids.end());
  ids.resize(n_image_tokens, vocab.blank_image_token());
  return ids;
}

std::vector<Scene> make_scenes(std::size_t n, std::uint64_t seed, const VocabSpec& vocab,
                               std::size_t n_image_tokens, const SceneDistribution& dist) {
  vocab.validate();
  if (n == 0) throw InvalidArgument("make_scenes: n must be >= 1");
  if (dist.min_objects == 0 || dist.min_objects > dist.max_objects) {
    throw InvalidArgument("make_scenes: invalid object count range");
  }
  if (dist.max_objects > vocab.n_objects() || dist.max_objects > n_image_tokens) {
    throw InvalidArgument("make_scenes: max_objects exceeds vocabulary or image slots");
  }
  if (!(dist.prior_weight > 0.0) || !(dist.other_weight > 0.0)) {
    throw InvalidArgument("make_scenes: weights must be positive");
  }
  numerics::Rng rng(seed);
  std::vector<Scene> scenes;
  scenes.reserve(n);
  const std::size_t span = dist.max_objects - dist.min_objects + 1;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t count = dist.min_objects + rng.below(span);
    std::vector<TokenId> pool = vocab.objects;
    std::vector<TokenId> chosen;
    for (std::size_t c = 0; c < count; ++c) {
      double total = 0.0;
      for (TokenId o : pool) total += dist.weight(vocab, o);
      double u = rng.uniform() * total;
      std::size_t pick = pool.size() - 1;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        u -= dist.weight(vocab, pool[i]);
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
      chosen.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::sort(chosen.begin(), chosen.end());
    Scene scene;
    scene.scene_id = s;
    scene.image_tokens = encode_image(vocab, chosen, n_image_tokens);
    scene.true_objects = std::move(chosen);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

model::Prompt caption_prompt(const VocabSpec& vocab, const Scene& scene) {
  return model::Prompt{{vocab.bos}, scene.image_tokens, {vocab.describe}};
}

model::Prompt probe_prompt(const VocabSpec& vocab, const Scene& scene, TokenId object) {
  if (!vocab.is_object(object)) throw InvalidArgument("probe_prompt: not an object word");
  return model::Prompt{{vocab.bos}, scene.image_tokens, {vocab.is, vocab.there, object, vocab.qmark}};
}

nlohmann::json scenes_to_json(const std::vector<Scene>& scenes, const VocabSpec& vocab) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : scenes) {
    nlohmann::json names = nlohmann::json::array();
    for (TokenId o : s.true_objects) names.push_back(std::string(vocab.name(o)));
    arr.push_back({{"scene_id", s.scene_id},
                   {"objects", names},
                   {"object_ids", s.true_objects},
                   {"image_tokens", s.image_tokens}});
  }
  return arr;
}

}  // namespace headsteer::evalsuite
