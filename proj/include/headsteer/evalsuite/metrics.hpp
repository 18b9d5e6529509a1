// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "headsteer/evalsuite/scenes.hpp"

namespace headsteer::evalsuite {

/// Object words in `tokens`, duplicates collapsed.
std::set<TokenId> extract_mentions(std::span<const TokenId> tokens, const VocabSpec& vocab);

enum class TokenLabel { non_object, grounded, hallucinated };
std::string_view to_string(TokenLabel l) noexcept;

struct CaptionRecord {
  std::size_t scene_id = 0;
  std::set<TokenId> mentioned;
  std::set<TokenId> truth;
  std::vector<TokenLabel> labels;  ///< one per generated token

  std::set<TokenId> hallucinated() const;
  std::set<TokenId> grounded() const;
};

CaptionRecord make_caption_record(const Scene& scene, std::span<const TokenId> tokens,
                                  const VocabSpec& vocab);

struct ChairResult {
  double chair_s = 0.0;
  double chair_i = 0.0;
  std::size_t captions = 0;
  std::size_t hallucinated_captions = 0;
  std::size_t mentions = 0;
  std::size_t hallucinated_mentions = 0;
};

/// Per-caption set semantics, summed over captions. Throws InvalidArgument on
/// no records and UndefinedMetric when no caption mentions any object.
ChairResult chair_metrics(std::span<const CaptionRecord> records);

enum class PopeSplit { random, popular, adversarial };
std::string_view to_string(PopeSplit s) noexcept;
inline constexpr PopeSplit kPopeSplits[] = {PopeSplit::random, PopeSplit::popular,
                                             PopeSplit::adversarial};

struct PopeItem {
  std::size_t scene_id = 0;
  TokenId queried = 0;
  bool present = false;  ///< label
  bool answer_yes = false;
  PopeSplit split = PopeSplit::random;

  friend bool operator==(const PopeItem&, const PopeItem&) = default;
};

struct PopeResult {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Positive class is "present". Throws InvalidArgument on no items and
/// UndefinedMetric when precision, recall or f1 has an empty denominator.
PopeResult pope_metrics(std::span<const PopeItem> items);

/// Unweighted mean of per-split metrics (counts are summed).
PopeResult average_pope(std::span<const PopeResult> per_split);

/// Balanced questions: for each scene up to `per_side` present objects and as
/// many absent objects, chosen per split:
///   random       uniformly among absent objects
///   popular      most frequent objects across `scenes` first
///   adversarial  objects that co-occur most often with the scene's objects first
/// Answers are left false.
std::vector<PopeItem> build_pope_items(std::span<const Scene> scenes, const VocabSpec& vocab,
                                       PopeSplit split, std::uint64_t seed,
                                       std::size_t per_side = 3);

}  // namespace headsteer::evalsuite
