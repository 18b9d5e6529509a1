// SPDX-License-Identifier: Apache-2.0
#include "headsteer/evalsuite/experiment.hpp"

#include <algorithm>
#include <cstdio>

#include "headsteer/divergence/vhd.hpp"
#include "headsteer/error.hpp"
#include "headsteer/numerics/stats.hpp"

namespace headsteer::evalsuite {
namespace {

std::optional<Separation> separation(const std::vector<double>& halluc,
                                     const std::vector<double>& grounded) {
  if (halluc.empty() || grounded.empty()) return std::nullopt;
  const auto h = numerics::summary_stats(halluc);
  const auto g = numerics::summary_stats(grounded);
  return Separation{h.mean, g.mean, h.median, g.median, halluc.size(), grounded.size()};
}

}  // namespace

std::optional<Separation> token_separation(const std::vector<TokenTvhd>& tokens) {
  std::vector<double> h, g;
  for (const auto& t : tokens) {
    if (t.label == TokenLabel::hallucinated) h.push_back(t.tvhd);
    else if (t.label == TokenLabel::grounded) g.push_back(t.tvhd);
  }
  return separation(h, g);
}

std::optional<Separation> sentence_separation(const std::vector<SentenceTvhd>& sentences) {
  std::vector<double> h, g;
  for (const auto& s : sentences) (s.hallucinated ? h : g).push_back(s.mean_tvhd);
  return separation(h, g);
}

std::vector<SentenceTvhd> split_sentences(const Scene& scene, const std::vector<TokenId>& tokens,
                                          const std::vector<double>& tvhd, const VocabSpec& vocab) {
  if (tokens.size() != tvhd.size()) throw InvalidArgument("split_sentences: series length mismatch");
  const std::set<TokenId> truth(scene.true_objects.begin(), scene.true_objects.end());
  std::vector<SentenceTvhd> out;
  SentenceTvhd cur{scene.scene_id, false, 0.0, 0};
  double sum = 0.0;
  auto flush = [&] {
    if (cur.n_tokens > 0) {
      cur.mean_tvhd = sum / static_cast<double>(cur.n_tokens);
      out.push_back(cur);
    }
    cur = SentenceTvhd{scene.scene_id, false, 0.0, 0};
    sum = 0.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId t = tokens[i];
    if (t == vocab.dot || t == vocab.eos) {
      flush();
      continue;
    }
    ++cur.n_tokens;
    sum += tvhd[i];
    if (vocab.is_object(t) && !truth.contains(t)) cur.hallucinated = true;
  }
  flush();
  return out;
}

ChairExperiment run_chair_experiment(const model::Weights& weights,
                                     const std::vector<Scene>& scenes, const VocabSpec& vocab,
                                     const DecoderSpec& decoder) {
  if (scenes.empty()) throw InvalidArgument("run_chair_experiment: no scenes");
  const auto& mc = weights.config;
  model::GenerateOptions opts;
  opts.max_new = decoder.max_new;
  opts.use_cache = decoder.use_cache;
  opts.eos = vocab.eos;
  const model::HeadScalePlan identity(mc.n_layers, mc.n_heads);

  ChairExperiment ex;
  for (const Scene& scene : scenes) {
    const model::Prompt prompt = caption_prompt(vocab, scene);
    std::vector<TokenId> tokens;
    std::vector<double> series;
    if (decoder.vhr) {
      reinforce::VhrConfig cfg = *decoder.vhr;
      cfg.tvhd_k = decoder.k;
      auto g = reinforce::generate_with_vhr(weights, prompt, cfg, opts, decoder.track_tvhd);
      tokens = std::move(g.tokens);
      if (g.tvhd) series = std::move(g.tvhd->values);
    } else if (decoder.track_tvhd) {
      auto g = divergence::tvhd_for_generation(weights, prompt, decoder.k, opts, identity);
      tokens = std::move(g.tokens);
      series = std::move(g.series.values);
    } else {
      tokens = model::generate(weights, prompt, model::Stream::with_image, identity, opts).tokens;
    }
    CaptionRecord rec = make_caption_record(scene, tokens, vocab);
    if (decoder.track_tvhd) {
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (rec.labels[i] == TokenLabel::non_object) continue;
        ex.tokens.push_back({scene.scene_id, i, tokens[i], rec.labels[i], series[i]});
      }
      auto sentences = split_sentences(scene, tokens, series, vocab);
      ex.sentences.insert(ex.sentences.end(), sentences.begin(), sentences.end());
    }
    ex.records.push_back(std::move(rec));
    ex.captions.push_back(std::move(tokens));
  }
  ex.chair = chair_metrics(ex.records);
  if (decoder.track_tvhd) {
    ex.token_sep = token_separation(ex.tokens);
    ex.sentence_sep = sentence_separation(ex.sentences);
  }
  return ex;
}

PopeAnswerer model_answerer(const model::Weights& weights, const VocabSpec& vocab,
                            std::optional<reinforce::VhrConfig> vhr) {
  return [&weights, &vocab, vhr](const Scene& scene, TokenId object) {
    const model::Prompt prompt = probe_prompt(vocab, scene, object);
    model::GenerateOptions opts;
    opts.max_new = 1;
    TokenId first;
    if (vhr) {
      first = reinforce::generate_with_vhr(weights, prompt, *vhr, opts).tokens.at(0);
    } else {
      const model::HeadScalePlan identity(weights.config.n_layers, weights.config.n_heads);
      first = model::generate(weights, prompt, model::Stream::with_image, identity, opts).tokens.at(0);
    }
    return first == vocab.yes;
  };
}

PopeExperiment run_pope_experiment(const PopeAnswerer& answer, const std::vector<Scene>& scenes,
                                   const VocabSpec& vocab, std::uint64_t seed,
                                   std::size_t per_side) {
  if (scenes.empty()) throw InvalidArgument("run_pope_experiment: no scenes");
  std::vector<const Scene*> by_id;
  for (const auto& s : scenes) {
    if (s.scene_id >= by_id.size()) by_id.resize(s.scene_id + 1, nullptr);
    by_id[s.scene_id] = &s;
  }
  PopeExperiment ex;
  std::vector<PopeResult> results;
  for (PopeSplit split : kPopeSplits) {
    PopeSplitResult r;
    r.split = split;
    r.items = build_pope_items(scenes, vocab, split, seed, per_side);
    for (auto& it : r.items) it.answer_yes = answer(*by_id[it.scene_id], it.queried);
    r.result = pope_metrics(r.items);
    results.push_back(r.result);
    ex.splits.push_back(std::move(r));
  }
  ex.average = average_pope(results);
  return ex;
}

Fixture default_fixture() {
  Fixture f;
  f.config = model::default_toy_config();
  f.model_seed = 7;
  f.prior_bias = model::kDefaultPriorBias;
  f.scene_seed = 2024;
  f.n_scenes = 300;
  return f;
}

namespace {

nlohmann::json sep_json(const std::optional<Separation>& s) {
  if (!s) return nullptr;
  return {{"mean_hallucinated", s->mean_hallucinated},
          {"mean_grounded", s->mean_grounded},
          {"median_hallucinated", s->median_hallucinated},
          {"median_grounded", s->median_grounded},
          {"n_hallucinated", s->n_hallucinated},
          {"n_grounded", s->n_grounded}};
}

nlohmann::json pope_json(const PopeResult& r) {
  return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
          {"f1", r.f1},             {"tp", r.tp},               {"fp", r.fp},
          {"tn", r.tn},             {"fn", r.fn}};
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j = {{"label", r.label}};
  if (r.chair) {
    j["chair"] = {{"chair_s", r.chair->chair_s},
                  {"chair_i", r.chair->chair_i},
                  {"captions", r.chair->captions},
                  {"hallucinated_captions", r.chair->hallucinated_captions},
                  {"mentions", r.chair->mentions},
                  {"hallucinated_mentions", r.chair->hallucinated_mentions}};
    j["tvhd_token"] = sep_json(r.token_sep);
    j["tvhd_sentence"] = sep_json(r.sentence_sep);
  }
  if (r.pope) {
    nlohmann::json splits = nlohmann::json::object();
    for (const auto& s : r.pope->splits) splits[std::string(to_string(s.split))] = pope_json(s.result);
    j["pope"] = {{"splits", splits}, {"average", pope_json(r.pope->average)}};
  }
  return j;
}

std::string to_table(const std::vector<MetricsReport>& reports) {
  std::string out;
  char line[256];
  bool chair_header = false;
  for (const auto& r : reports) {
    if (!r.chair) continue;
    if (!chair_header) {
      std::snprintf(line, sizeof line, "%-20s %9s %9s %9s %9s\n", "method", "CHAIR_S", "CHAIR_I",
                    "captions", "mentions");
      out += line;
      chair_header = true;
    }
    std::snprintf(line, sizeof line, "%-20s %9.2f %9.2f %9zu %9zu\n", r.label.c_str(),
                  100.0 * r.chair->chair_s, 100.0 * r.chair->chair_i, r.chair->captions,
                  r.chair->mentions);
    out += line;
  }
  bool pope_header = false;
  for (const auto& r : reports) {
    if (!r.pope) continue;
    if (!pope_header) {
      if (!out.empty()) out += '\n';
      std::snprintf(line, sizeof line, "%-20s %-12s %9s %9s %9s %9s\n", "method", "split",
                    "accuracy", "precision", "recall", "f1");
      out += line;
      pope_header = true;
    }
    auto row = [&](std::string_view split, const PopeResult& p) {
      std::snprintf(line, sizeof line, "%-20s %-12.*s %9.2f %9.2f %9.2f %9.2f\n", r.label.c_str(),
                    static_cast<int>(split.size()), split.data(), 100.0 * p.accuracy,
                    100.0 * p.precision, 100.0 * p.recall, 100.0 * p.f1);
      out += line;
    };
    for (const auto& s : r.pope->splits) row(to_string(s.split), s.result);
    row("average", r.pope->average);
  }
  return out;
}

}  // namespace headsteer::evalsuite
