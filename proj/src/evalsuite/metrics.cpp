// SPDX-License-Identifier: Apache-2.0
#include "headsteer/evalsuite/metrics.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/random.hpp"

namespace headsteer::evalsuite {

std::set<TokenId> extract_mentions(std::span<const TokenId> tokens, const VocabSpec& vocab) {
  std::set<TokenId> out;
  for (TokenId t : tokens) {
    if (vocab.is_object(t)) out.insert(t);
  }
  return out;
}

std::string_view to_string(TokenLabel l) noexcept {
  switch (l) {
    case TokenLabel::grounded: return "grounded";
    case TokenLabel::hallucinated: return "hallucinated";
    default: return "non_object";
  }
}

std::set<TokenId> CaptionRecord::hallucinated() const {
  std::set<TokenId> out;
  std::set_difference(mentioned.begin(), mentioned.end(), truth.begin(), truth.end(),
                      std::inserter(out, out.end()));
  return out;
}

std::set<TokenId> CaptionRecord::grounded() const {
  std::set<TokenId> out;
  std::set_intersection(mentioned.begin(), mentioned.end(), truth.begin(), truth.end(),
                        std::inserter(out, out.end()));
  return out;
}

CaptionRecord make_caption_record(const Scene& scene, std::span<const TokenId> tokens,
                                  const VocabSpec& vocab) {
  CaptionRecord r;
  r.scene_id = scene.scene_id;
  r.truth = {scene.true_objects.begin(), scene.true_objects.end()};
  r.mentioned = extract_mentions(tokens, vocab);
  for (TokenId t : tokens) {
    if (!vocab.is_object(t)) r.labels.push_back(TokenLabel::non_object);
    else if (r.truth.contains(t)) r.labels.push_back(TokenLabel::grounded);
    else r.labels.push_back(TokenLabel::hallucinated);
  }
  return r;
}

ChairResult chair_metrics(std::span<const CaptionRecord> records) {
  if (records.empty()) throw InvalidArgument("chair_metrics: no records");
  ChairResult c;
  c.captions = records.size();
  for (const auto& r : records) {
    const std::size_t bad = r.hallucinated().size();
    c.mentions += r.mentioned.size();
    c.hallucinated_mentions += bad;
    if (bad > 0) ++c.hallucinated_captions;
  }
  if (c.mentions == 0) throw UndefinedMetric("chair_metrics: CHAIR_i undefined with zero object mentions");
  c.chair_s = static_cast<double>(c.hallucinated_captions) / static_cast<double>(c.captions);
  c.chair_i = static_cast<double>(c.hallucinated_mentions) / static_cast<double>(c.mentions);
  return c;
}

std::string_view to_string(PopeSplit s) noexcept {
  switch (s) {
    case PopeSplit::popular: return "popular";
    case PopeSplit::adversarial: return "adversarial";
    default: return "random";
  }
}

PopeResult pope_metrics(std::span<const PopeItem> items) {
  if (items.empty()) throw InvalidArgument("pope_metrics: no items");
  PopeResult r;
  for (const auto& it : items) {
    if (it.present && it.answer_yes) ++r.tp;
    else if (!it.present && it.answer_yes) ++r.fp;
    else if (!it.present && !it.answer_yes) ++r.tn;
    else ++r.fn;
  }
  if (r.tp + r.fp == 0) throw UndefinedMetric("pope_metrics: precision undefined (no positive predictions)");
  if (r.tp + r.fn == 0) throw UndefinedMetric("pope_metrics: recall undefined (no present items)");
  const double tp = static_cast<double>(r.tp);
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(items.size());
  r.precision = tp / static_cast<double>(r.tp + r.fp);
  r.recall = tp / static_cast<double>(r.tp + r.fn);
  if (r.tp == 0) throw UndefinedMetric("pope_metrics: f1 undefined (precision and recall are 0)");
  r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

PopeResult average_pope(std::span<const PopeResult> per_split) {
  if (per_split.empty()) throw InvalidArgument("average_pope: no splits");
  PopeResult avg;
  const double n = static_cast<double>(per_split.size());
  for (const auto& r : per_split) {
    avg.accuracy += r.accuracy / n;
    avg.precision += r.precision / n;
    avg.recall += r.recall / n;
    avg.f1 += r.f1 / n;
    avg.tp += r.tp;
    avg.fp += r.fp;
    avg.tn += r.tn;
    avg.fn += r.fn;
  }
  return avg;
}

std::vector<PopeItem> build_pope_items(std::span<const Scene> scenes, const VocabSpec& vocab,
                                       PopeSplit split, std::uint64_t seed, std::size_t per_side) {
  if (scenes.empty()) throw InvalidArgument("build_pope_items: no scenes");
  numerics::Rng rng(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(split) + 1)));

  std::map<TokenId, std::size_t> frequency;
  std::map<std::pair<TokenId, TokenId>, std::size_t> together;
  for (const auto& s : scenes) {
    for (TokenId a : s.true_objects) {
      ++frequency[a];
      for (TokenId b : s.true_objects) {
        if (a != b) ++together[{a, b}];
      }
    }
  }

  std::vector<PopeItem> items;
  for (const auto& s : scenes) {
    const std::set<TokenId> truth(s.true_objects.begin(), s.true_objects.end());
    std::vector<TokenId> absent;
    for (TokenId o : vocab.objects) {
      if (!truth.contains(o)) absent.push_back(o);
    }
    const std::size_t n = std::min({per_side, s.true_objects.size(), absent.size()});

    std::vector<TokenId> present = s.true_objects;
    for (std::size_t i = present.size(); i > 1; --i) std::swap(present[i - 1], present[rng.below(i)]);
    present.resize(n);

    auto ranked_by = [&](auto score) {
      std::stable_sort(absent.begin(), absent.end(),
                       [&](TokenId a, TokenId b) { return score(a) > score(b); });
    };
    switch (split) {
      case PopeSplit::random:
        for (std::size_t i = absent.size(); i > 1; --i) std::swap(absent[i - 1], absent[rng.below(i)]);
        break;
      case PopeSplit::popular:
        ranked_by([&](TokenId o) { return frequency[o]; });
        break;
      case PopeSplit::adversarial:
        ranked_by([&](TokenId o) {
          std::size_t score = 0;
          for (TokenId t : s.true_objects) {
            const auto it = together.find({o, t});
            if (it != together.end()) score += it->second;
          }
          for (const auto& [prior, trigger] : vocab.cooccurrence) {
            if (prior == o && truth.contains(trigger)) score += scenes.size();
          }
          return score;
        });
        break;
    }
    absent.resize(n);
    for (TokenId o : present) items.push_back({s.scene_id, o, true, false, split});
    for (TokenId o : absent) items.push_back({s.scene_id, o, false, false, split});
  }
  return items;
}

}  // namespace headsteer::evalsuite
