// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/planted.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/random.hpp"

namespace headsteer::model {
namespace {

using numerics::Rng;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument("build_planted_model: " + what);
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

void fill_noise(Matrix& m, double sigma, Rng& rng) {
  for (double& v : m.values()) v = sigma * rng.normal();
}

}  // namespace

PlantedLayout::PlantedLayout(std::size_t n) : n_objects(n) {
  std::size_t at = 1;
  tok_obj = at; at += n;
  img_obj = at; at += n;
  is_image = at++;
  is_blank = at++;
  is_bos = at++;
  is_dot = at++;
  is_question = at++;
  seen_raw = at; at += n;
  seen = at; at += n;
  evid = at; at += n;
  stop = at++;
  found = at++;
  notfound = at++;
  position = at; at += kPositionDims;
  scratch = at;
}

PlantedModel build_planted_model(const ModelConfig& cfg, std::uint64_t seed, double prior_bias,
                                 const PlantedParams& p, const VocabSpec& vocab) {
  cfg.validate();
  vocab.validate();
  const std::size_t n_obj = vocab.n_objects();
  const PlantedLayout lay(n_obj);
  require(std::isfinite(prior_bias) && prior_bias >= 0.0, "prior_bias must be finite and >= 0");
  require(cfg.n_layers >= 3, "needs at least 3 layers");
  require(cfg.n_heads >= 4, "needs at least 4 heads per layer");
  require(cfg.d_head >= n_obj + 2, "d_head must be at least n_objects + 2");
  require(cfg.d_model >= lay.scratch + PlantedLayout::kMinScratch,
          "d_model must be at least " + std::to_string(lay.scratch + PlantedLayout::kMinScratch));
  require(cfg.d_ff >= 2 * n_obj, "d_ff must be at least 2 * n_objects");
  require(cfg.vocab_size == vocab.size(), "vocab_size must equal the vocabulary size");
  require(cfg.image_vocab_size == n_obj + 1, "image_vocab_size must be n_objects + 1");
  require(cfg.n_image_tokens >= 6, "needs at least 6 image tokens");
  require(p.prior_strength.size() == vocab.prior_objects.size(),
          "one prior strength per prior object");

  Rng rng(seed);
  Weights w = Weights::zeros(cfg);
  const std::size_t D = cfg.d_model;
  const std::size_t dh = cfg.d_head;
  const double rd = std::sqrt(static_cast<double>(dh));
  const double B = p.bias;
  const std::size_t n_scratch = D - lay.scratch;

  // Embeddings. Every row carries the bias slot plus a little scratch noise.
  auto scratch_noise = [&](std::span<double> row) {
    for (std::size_t c = lay.scratch; c < D; ++c) row[c] = p.embed_noise * rng.normal();
  };
  for (TokenId t = 0; t < cfg.vocab_size; ++t) {
    auto row = w.token_embedding.row(t);
    row[lay.bias] = B;
    if (vocab.is_object(t)) row[lay.tok_obj + vocab.object_index(t)] = 1.0;
    if (t == vocab.bos) row[lay.is_bos] = 1.0;
    if (t == vocab.dot) row[lay.is_dot] = 1.0;
    if (t == vocab.qmark) row[lay.is_question] = 1.0;
    scratch_noise(row);
  }
  for (TokenId t = 0; t < cfg.image_vocab_size; ++t) {
    auto row = w.image_embedding.row(t);
    row[lay.bias] = B;
    row[lay.is_image] = 1.0;
    if (t < n_obj) row[lay.img_obj + t] = 1.0;
    else row[lay.is_blank] = 1.0;
    scratch_noise(row);
  }
  for (std::size_t pos = 0; pos < cfg.max_positions; ++pos) {
    auto row = w.position.row(pos);
    for (std::size_t f = 0; f < PlantedLayout::kPositionDims / 2; ++f) {
      const double angle = static_cast<double>(pos) / std::pow(16.0, static_cast<double>(f));
      row[lay.position + 2 * f] = p.position_scale * std::sin(angle);
      row[lay.position + 2 * f + 1] = p.position_scale * std::cos(angle);
    }
  }

  // Head roles.
  std::vector<std::vector<std::size_t>> order(cfg.n_layers);
  for (auto& o : order) o = permutation(cfg.n_heads, rng);
  const std::size_t last = cfg.n_layers - 1;
  PlantedRoles roles;
  roles.collector = {0, order[0][0]};
  roles.caption = {1, order[1][0]};
  roles.verifier = {1, order[1][1]};
  roles.memory = {2, order[2][0]};
  roles.late_caption = {last, order[last][last == 2 ? 1 : 0]};
  std::vector<std::vector<std::uint8_t>> designated(cfg.n_layers,
                                                    std::vector<std::uint8_t>(cfg.n_heads, 0));
  for (const HeadRef& r : {roles.collector, roles.caption, roles.verifier, roles.memory,
                           roles.late_caption}) {
    designated[r.layer][r.head] = 1;
  }

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    LayerWeights& lw = w.layers[l];
    lw.attn_gain = p.gain;
    lw.ffn_gain = p.gain;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      if (designated[l][h]) continue;
      fill_noise(lw.wq[h], p.noise_weight, rng);
      fill_noise(lw.wk[h], p.noise_weight, rng);
      fill_noise(lw.wv[h], p.noise_weight, rng);
      for (std::size_t c = 0; c < dh; ++c) {
        for (std::size_t s = 0; s < n_scratch; ++s) {
          lw.wo(h * dh + c, lay.scratch + s) = p.noise_out * rng.normal();
        }
      }
    }
    const std::size_t first_free = l == 0 ? 2 * n_obj : 0;
    for (std::size_t u = first_free; u < cfg.d_ff; ++u) {
      for (std::size_t r = 0; r < D; ++r) lw.w1(r, u) = p.noise_weight * rng.normal();
      for (std::size_t s = 0; s < n_scratch; ++s) {
        lw.w2(u, lay.scratch + s) = p.noise_out * rng.normal();
      }
    }
  }

  // Collector and seen saturation.
  {
    LayerWeights& lw = w.layers[0];
    const std::size_t h = roles.collector.head;
    lw.wq[h](lay.bias, 0) = p.collect_logit * rd / B;
    for (std::size_t o = 0; o < n_obj; ++o) {
      lw.wk[h](lay.tok_obj + o, 0) = 1.0;
      lw.wv[h](lay.tok_obj + o, o) = 1.0;
      lw.wo(h * dh + o, lay.seen_raw + o) = 1.0;
      lw.w1(lay.seen_raw + o, 2 * o) = p.saturation;
      lw.w1(lay.seen_raw + o, 2 * o + 1) = p.saturation;
      lw.w1(lay.bias, 2 * o + 1) = -1.0 / B;
      lw.w2(2 * o, lay.seen + o) = 1.0;
      lw.w2(2 * o + 1, lay.seen + o) = -1.0;
    }
  }

  auto plant_caption = [&](const HeadRef& r) {
    LayerWeights& lw = w.layers[r.layer];
    const std::size_t h = r.head;
    for (std::size_t o = 0; o < n_obj; ++o) {
      lw.wq[h](lay.bias, o) = p.caption_logit * rd / B;
      lw.wq[h](lay.seen + o, o) = -p.seen_suppress * rd;
      lw.wk[h](lay.img_obj + o, o) = 1.0;
      lw.wv[h](lay.img_obj + o, o) = 1.0;
      lw.wo(h * dh + o, lay.evid + o) = 1.0;
    }
    lw.wq[h](lay.bias, n_obj) = p.blank_logit * rd / B;
    lw.wk[h](lay.is_blank, n_obj) = 1.0;
    lw.wv[h](lay.is_blank, n_obj) = p.stop_value;
    lw.wo(h * dh + n_obj, lay.stop) = 1.0;
  };
  plant_caption(roles.caption);
  plant_caption(roles.late_caption);

  {
    LayerWeights& lw = w.layers[1];
    const std::size_t h = roles.verifier.head;
    for (std::size_t o = 0; o < n_obj; ++o) {
      lw.wq[h](lay.seen + o, o) = p.verify_match_logit * rd;
      lw.wk[h](lay.img_obj + o, o) = 1.0;
      lw.wv[h](lay.img_obj + o, 0) = 1.0;
    }
    lw.wq[h](lay.bias, n_obj) = p.verify_blank_logit * rd / B;
    lw.wk[h](lay.is_blank, n_obj) = 1.0;
    lw.wq[h](lay.bias, n_obj + 1) = p.verify_bos_logit * rd / B;
    lw.wk[h](lay.is_bos, n_obj + 1) = 1.0;
    lw.wv[h](lay.is_blank, 1) = p.notfound_value;
    lw.wo(h * dh + 0, lay.found) = 1.0;
    lw.wo(h * dh + 1, lay.notfound) = 1.0;
  }

  {
    LayerWeights& lw = w.layers[2];
    const std::size_t h = roles.memory.head;
    lw.wq[h](lay.bias, 0) = p.memory_logit * rd / B;
    lw.wk[h](lay.is_bos, 0) = 1.0;
    lw.wv[h](lay.is_bos, 0) = 1.0;
    for (std::size_t j = 0; j < vocab.prior_objects.size(); ++j) {
      const std::size_t o = vocab.object_index(vocab.prior_objects[j]);
      lw.wo(h * dh, lay.evid + o) = prior_bias * p.prior_strength[j];
    }
  }

  // Unembedding, written against unnormalized slots; only ratios matter to argmax.
  w.final_gain = p.gain;
  Matrix& u = w.unembedding;
  for (TokenId t = 0; t < cfg.vocab_size; ++t) {
    if (vocab.is_object(t)) {
      const std::size_t o = vocab.object_index(t);
      u(lay.evid + o, t) = p.evid_weight;
      u(lay.seen + o, t) = -p.seen_penalty;
      u(lay.is_question, t) = -p.suppress;
    } else if (t == vocab.eos) {
      u(lay.bias, t) = p.eos_bias / B;
      u(lay.stop, t) = p.stop_weight;
      u(lay.is_question, t) = -p.suppress;
    } else if (t == vocab.dot) {
      for (std::size_t o = 0; o < n_obj; ++o) u(lay.tok_obj + o, t) = p.dot_weight;
      u(lay.is_question, t) = -p.suppress;
    } else if (t == vocab.yes) {
      u(lay.bias, t) = -p.suppress / B;
      u(lay.is_question, t) = p.suppress;
      u(lay.found, t) = p.found_weight;
      for (TokenId j : vocab.prior_objects) {
        u(lay.seen + vocab.object_index(j), t) = p.yes_prior_weight * prior_bias;
      }
    } else if (t == vocab.no) {
      u(lay.bias, t) = (p.no_bias - p.suppress) / B;
      u(lay.is_question, t) = p.suppress;
      u(lay.notfound, t) = p.notfound_weight;
    } else {
      u(lay.bias, t) = -p.suppress / B;
    }
  }
  for (const auto& [prior, trigger] : vocab.cooccurrence) {
    u(lay.seen + vocab.object_index(trigger), prior) += p.cooccur_weight * prior_bias;
  }

  w.validate();
  return PlantedModel{std::move(w), roles, lay, prior_bias};
}

}  // namespace headsteer::model
