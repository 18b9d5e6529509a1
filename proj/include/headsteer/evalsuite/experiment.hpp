// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "headsteer/evalsuite/metrics.hpp"
#include "headsteer/evalsuite/scenes.hpp"
#include "headsteer/model/planted.hpp"
#include "headsteer/model/weights.hpp"
#include "headsteer/reinforce/vhr.hpp"

namespace headsteer::evalsuite {

/// Baseline when `vhr` is empty.
struct DecoderSpec {
  std::optional<reinforce::VhrConfig> vhr;
  std::size_t max_new = 32;
  std::size_t k = 8;        ///< T-VHD top-k
  bool track_tvhd = true;
  bool use_cache = true;
};

struct TokenTvhd {
  std::size_t scene_id = 0;
  std::size_t step = 0;
  TokenId token = 0;
  TokenLabel label = TokenLabel::non_object;
  double tvhd = 0.0;
};

/// A delimiter-separated span of generated tokens (delimiter and end token excluded).
struct SentenceTvhd {
  std::size_t scene_id = 0;
  bool hallucinated = false;
  double mean_tvhd = 0.0;
  std::size_t n_tokens = 0;
};

struct Separation {
  double mean_hallucinated = 0.0;
  double mean_grounded = 0.0;
  double median_hallucinated = 0.0;
  double median_grounded = 0.0;
  std::size_t n_hallucinated = 0;
  std::size_t n_grounded = 0;
};

/// Empty when either group is empty.
std::optional<Separation> token_separation(const std::vector<TokenTvhd>& tokens);
std::optional<Separation> sentence_separation(const std::vector<SentenceTvhd>& sentences);

/// Splits a caption into sentences on the delimiter and scores each with the
/// mean T-VHD of its tokens; `tvhd` is aligned with `tokens`.
std::vector<SentenceTvhd> split_sentences(const Scene& scene, const std::vector<TokenId>& tokens,
                                          const std::vector<double>& tvhd, const VocabSpec& vocab);

struct ChairExperiment {
  ChairResult chair;
  std::vector<CaptionRecord> records;
  std::vector<std::vector<TokenId>> captions;
  std::vector<TokenTvhd> tokens;       ///< object tokens only (when tracked)
  std::vector<SentenceTvhd> sentences;
  std::optional<Separation> token_sep;
  std::optional<Separation> sentence_sep;
};

ChairExperiment run_chair_experiment(const model::Weights& weights,
                                     const std::vector<Scene>& scenes, const VocabSpec& vocab,
                                     const DecoderSpec& decoder);

/// Answers "is there <object>?" for a scene.
using PopeAnswerer = std::function<bool(const Scene&, TokenId)>;

/// First generated token compared with the yes token; anything else is "no".
PopeAnswerer model_answerer(const model::Weights& weights, const VocabSpec& vocab,
                            std::optional<reinforce::VhrConfig> vhr);

struct PopeSplitResult {
  PopeSplit split = PopeSplit::random;
  std::vector<PopeItem> items;
  PopeResult result;
};

struct PopeExperiment {
  std::vector<PopeSplitResult> splits;
  PopeResult average;
};

PopeExperiment run_pope_experiment(const PopeAnswerer& answer, const std::vector<Scene>& scenes,
                                   const VocabSpec& vocab, std::uint64_t seed,
                                   std::size_t per_side = 3);

/// Frozen evaluation fixture.
struct Fixture {
  model::ModelConfig config;
  std::uint64_t model_seed = 0;
  double prior_bias = 0.0;
  std::uint64_t scene_seed = 0;
  std::size_t n_scenes = 0;
};

Fixture default_fixture();

struct MetricsReport {
  std::string label;
  std::optional<ChairResult> chair;
  std::optional<Separation> token_sep;
  std::optional<Separation> sentence_sep;
  std::optional<PopeExperiment> pope;
};

nlohmann::json to_json(const MetricsReport& r);
/// Plain-text rows; one block per report, CHAIR then POPE.
std::string to_table(const std::vector<MetricsReport>& reports);

}  // namespace headsteer::evalsuite
