// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "headsteer/error.hpp"
#include "headsteer/evalsuite/metrics.hpp"
#include "headsteer/evalsuite/scenes.hpp"
#include "headsteer/model/engine.hpp"
#include "headsteer/model/kv_cache.hpp"
#include "headsteer/model/planted.hpp"
#include "headsteer/model/weights.hpp"
#include "headsteer/numerics/ops.hpp"
#include "test_support.hpp"

namespace hs = headsteer;
using namespace hs::model;
using hs::numerics::Matrix;
using hs::testing::random_matrix;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_head = 4;
  c.d_model = 8;
  c.d_ff = 6;
  c.vocab_size = 8;
  c.image_vocab_size = 3;
  c.n_image_tokens = 2;
  c.max_positions = 16;
  return c;
}

Weights random_weights(const ModelConfig& c, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  Weights w = Weights::zeros(c);
  auto fill = [&](Matrix& m) { m = random_matrix(rng, m.rows(), m.cols(), scale); };
  fill(w.token_embedding);
  fill(w.image_embedding);
  fill(w.position);
  fill(w.unembedding);
  for (auto& l : w.layers) {
    for (auto& m : l.wq) fill(m);
    for (auto& m : l.wk) fill(m);
    for (auto& m : l.wv) fill(m);
    fill(l.wo);
    fill(l.w1);
    fill(l.w2);
    l.attn_gain = 1.3;
    l.ffn_gain = 0.7;
  }
  w.final_gain = 2.0;
  return w;
}

Prompt small_prompt() { return Prompt{{1}, {0, 2}, {3, 4, 5}}; }

// Attention computed position by position with no shared code.
Matrix attention_oracle(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv) {
  const std::size_t n = x.rows(), d = wq.cols();
  auto project = [&](const Matrix& w, std::size_t row) {
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < x.cols(); ++i) out[j] += x(row, i) * w(i, j);
    }
    return out;
  };
  Matrix out = Matrix::zeros(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    const auto q = project(wq, t);
    std::vector<double> logits;
    for (std::size_t s = 0; s <= t; ++s) {
      const auto k = project(wk, s);
      double dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += q[j] * k[j];
      logits.push_back(dot / std::sqrt(static_cast<double>(d)));
    }
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double z = 0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (std::size_t s = 0; s <= t; ++s) {
      const auto v = project(wv, s);
      for (std::size_t j = 0; j < d; ++j) out(t, j) += logits[s] / z * v[j];
    }
  }
  return out;
}

std::set<TokenId> image_heads_positions(const Prompt& p) {
  std::set<TokenId> s;
  for (std::size_t i = 0; i < p.image.size(); ++i) s.insert(static_cast<TokenId>(p.prefix.size() + i));
  return s;
}

}  // namespace

TEST(Config, Validation) {
  EXPECT_NO_THROW(default_toy_config().validate());
  ModelConfig c = small_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), hs::InvalidArgument);
  c = small_config();
  c.d_model = 9;
  EXPECT_THROW(c.validate(), hs::InvalidArgument);
  c = small_config();
  c.max_positions = c.n_image_tokens;
  EXPECT_THROW(c.validate(), hs::InvalidArgument);
}

TEST(HeadForward, SingleTokenIsValueProjection) {
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(rng, 1, 6);
  const Matrix wq = random_matrix(rng, 6, 3), wk = random_matrix(rng, 6, 3), wv = random_matrix(rng, 6, 3);
  const Matrix out = head_forward(x, wq, wk, wv);
  const Matrix xv = hs::numerics::matmul(x, wv);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out(0, j), xv(0, j), 1e-15);
}

TEST(HeadForward, ZeroLogitsAverageValues) {
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(rng, 2, 4);
  const Matrix z = Matrix::zeros(4, 2), wv = random_matrix(rng, 4, 2);
  const Matrix out = head_forward(x, z, z, wv);
  const Matrix v = hs::numerics::matmul(x, wv);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out(1, j), 0.5 * (v(0, j) + v(1, j)), 1e-15);
}

TEST(HeadForward, MatchesPerPositionOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = random_matrix(rng, 3, 5, 2.0);
    const Matrix wq = random_matrix(rng, 5, 4), wk = random_matrix(rng, 5, 4), wv = random_matrix(rng, 5, 4);
    const Matrix a = head_forward(x, wq, wk, wv), b = attention_oracle(x, wq, wk, wv);
    for (std::size_t i = 0; i < a.values().size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-10);
  }
}

TEST(HeadForward, ShapeMismatchRejected) {
  EXPECT_THROW(head_forward(Matrix::zeros(2, 4), Matrix::zeros(3, 2), Matrix::zeros(4, 2), Matrix::zeros(4, 2)),
               hs::InvalidArgument);
}

TEST(Mha, IdentityPlanIsConcatTimesWo) {
  const auto c = small_config();
  const Weights w = random_weights(c, 4);
  std::mt19937_64 rng(5);
  const Matrix x = random_matrix(rng, 3, c.d_model);
  const auto& lw = w.layers[0];
  const auto r = mha_forward(x, lw, HeadScalePlan(c.n_layers, c.n_heads), 0);
  Matrix concat = Matrix::zeros(3, c.d_model);
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const Matrix a = attention_oracle(x, lw.wq[h], lw.wk[h], lw.wv[h]);
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t j = 0; j < c.d_head; ++j) concat(t, h * c.d_head + j) = a(t, j);
    }
  }
  const Matrix want = hs::numerics::matmul(concat, lw.wo);
  for (std::size_t i = 0; i < want.values().size(); ++i) {
    EXPECT_NEAR(r.output.values()[i], want.values()[i], 1e-10);
  }
}

// Output is linear in per-head contributions: the head-sum partition identity.
TEST(Mha, ScalingOneHeadAddsItsScaledContribution) {
  const auto c = small_config();
  const Weights w = random_weights(c, 6);
  std::mt19937_64 rng(7);
  for (double alpha : {2.0, 0.5, 3.7}) {
    const Matrix x = random_matrix(rng, 4, c.d_model);
    const auto& lw = w.layers[1];
    HeadScalePlan plan(c.n_layers, c.n_heads);
    const auto base = mha_forward(x, lw, plan, 1);
    plan.set(1, 1, alpha);
    const auto scaled = mha_forward(x, lw, plan, 1);
    const Matrix a = attention_oracle(x, lw.wq[1], lw.wk[1], lw.wv[1]);
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t j = 0; j < c.d_model; ++j) {
        double contrib = 0;
        for (std::size_t p = 0; p < c.d_head; ++p) contrib += a(t, p) * lw.wo(c.d_head + p, j);
        EXPECT_NEAR(scaled.output(t, j), base.output(t, j) + (alpha - 1.0) * contrib, 1e-10);
      }
    }
    // Captured head outputs are unscaled.
    for (std::size_t h = 0; h < c.n_heads; ++h) EXPECT_EQ(scaled.last_position[h], base.last_position[h]);
  }
}

TEST(Session, OneCallEqualsTokenByToken) {
  const auto c = small_config();
  const Weights w = random_weights(c, 8);
  const auto seq = small_prompt().sequence(Stream::with_image);
  const HeadScalePlan plan(c.n_layers, c.n_heads);
  Session a(w, Stream::with_image), b(w, Stream::with_image);
  const auto ra = a.step(seq, plan);
  StepResult rb;
  for (const auto& t : seq) rb = b.step(std::span(&t, 1), plan);
  for (std::size_t i = 0; i < ra.logits.size(); ++i) EXPECT_NEAR(ra.logits[i], rb.logits[i], 1e-9);
  EXPECT_LE(max_abs_difference(ra.capture, rb.capture), 1e-9);
  EXPECT_EQ(a.length(), seq.size());
}

TEST(Session, DeterministicLogits) {
  const auto c = small_config();
  const Weights w = random_weights(c, 9);
  const auto seq = small_prompt().sequence(Stream::with_image);
  const HeadScalePlan plan(c.n_layers, c.n_heads);
  Session a(w, Stream::with_image), b(w, Stream::with_image);
  EXPECT_EQ(a.step(seq, plan).logits, b.step(seq, plan).logits);
}

TEST(Session, AblatedPathMatchesMhaOracle) {
  ModelConfig c = small_config();
  c.n_layers = 1;
  Weights w = random_weights(c, 10);
  w.layers[0].w1 = Matrix::zeros(c.d_model, c.d_ff);
  w.layers[0].w2 = Matrix::zeros(c.d_ff, c.d_model);
  w.unembedding = Matrix::identity(c.d_model);
  w.validate();
  const Prompt p = small_prompt();
  const auto seq = p.sequence(Stream::with_image);
  const HeadScalePlan plan(1, c.n_heads);

  Matrix resid = Matrix::zeros(seq.size(), c.d_model);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& emb = seq[t].kind == TokenKind::image ? w.image_embedding : w.token_embedding;
    for (std::size_t j = 0; j < c.d_model; ++j) resid(t, j) = emb(seq[t].id, j) + w.position(t, j);
  }
  Matrix x = resid;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    hs::numerics::rms_normalize_into(resid.row(t), w.layers[0].attn_gain, x.row(t));
  }
  const auto mha = mha_forward(x, w.layers[0], plan, 0);
  std::vector<double> last(c.d_model);
  for (std::size_t j = 0; j < c.d_model; ++j) last[j] = resid(seq.size() - 1, j) + mha.output(seq.size() - 1, j);
  const auto want = hs::numerics::rms_normalize(hs::numerics::Vec(last), w.final_gain);

  Session s(w, Stream::with_image);
  const auto got = s.step(seq, plan).logits;
  for (std::size_t j = 0; j < c.d_model; ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
}

TEST(Session, CapacityExceeded) {
  auto c = small_config();
  const Weights w = random_weights(c, 11);
  Session s(w, Stream::with_image);
  const HeadScalePlan plan(c.n_layers, c.n_heads);
  std::vector<InputToken> many(c.max_positions + 1, InputToken{TokenKind::text, 1});
  EXPECT_THROW(s.step(many, plan), hs::CapacityError);
  std::vector<InputToken> fill(c.max_positions, InputToken{TokenKind::text, 1});
  s.step(fill, plan);
  const InputToken one{TokenKind::text, 2};
  EXPECT_THROW(s.step(std::span(&one, 1), plan), hs::CapacityError);
}

TEST(Session, TextOnlyStreamOmitsImagePositions) {
  const auto c = small_config();
  const Weights w = random_weights(c, 12);
  const Prompt p = small_prompt();
  Session s(w, Stream::text_only);
  s.step(p.sequence(Stream::text_only), HeadScalePlan(c.n_layers, c.n_heads));
  EXPECT_EQ(s.length(), p.prefix.size() + p.text.size());
  EXPECT_EQ(p.length(Stream::text_only), p.prefix.size() + p.text.size());
  for (const auto& t : p.sequence(Stream::text_only)) EXPECT_EQ(t.kind, TokenKind::text);
}

TEST(Session, ScalingLeavesEarlierLayersBitIdentical) {
  ModelConfig c = small_config();
  c.n_layers = 3;
  const Weights w = random_weights(c, 13);
  const auto seq = small_prompt().sequence(Stream::with_image);
  for (std::size_t layer = 0; layer < c.n_layers; ++layer) {
    HeadScalePlan plan(c.n_layers, c.n_heads);
    plan.set(layer, 1, 2.5);
    Session a(w, Stream::with_image), b(w, Stream::with_image);
    const auto base = a.step(seq, HeadScalePlan(c.n_layers, c.n_heads));
    const auto scaled = b.step(seq, plan);
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      for (std::size_t h = 0; h < c.n_heads; ++h) {
        const auto x = base.capture.head(l, h), y = scaled.capture.head(l, h);
        const bool same = std::equal(x.begin(), x.end(), y.begin());
        // Captures are pre-scaling, so layer `layer` itself is unaffected too.
        if (l <= layer) EXPECT_TRUE(same) << "layer " << l;
        else EXPECT_FALSE(same) << "layer " << l;
      }
    }
  }
}

TEST(Generate, ZeroMaxNewIsEmpty) {
  const auto c = small_config();
  const Weights w = random_weights(c, 14);
  GenerateOptions o;
  o.max_new = 0;
  EXPECT_TRUE(generate(w, small_prompt(), Stream::with_image, HeadScalePlan(c.n_layers, c.n_heads), o).tokens.empty());
}

TEST(Generate, CacheOnOffIdentical) {
  const auto c = small_config();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Weights w = random_weights(c, 100 + seed, 1.0);
    HeadScalePlan plan(c.n_layers, c.n_heads);
    plan.set(1, 0, 1.5);
    GenerateOptions o;
    o.max_new = 10;
    o.record_captures = true;
    for (Stream s : {Stream::with_image, Stream::text_only}) {
      const auto a = generate(w, small_prompt(), s, plan, o);
      o.use_cache = false;
      const auto b = generate(w, small_prompt(), s, plan, o);
      o.use_cache = true;
      ASSERT_EQ(a.tokens, b.tokens);
      for (std::size_t i = 0; i < a.captures.size(); ++i) {
        EXPECT_LE(max_abs_difference(a.captures[i], b.captures[i]), 1e-9);
      }
    }
  }
}

TEST(Generate, StopsAtEos) {
  const auto c = small_config();
  const Weights w = random_weights(c, 15);
  const HeadScalePlan plan(c.n_layers, c.n_heads);
  GenerateOptions o;
  o.max_new = 8;
  const auto free_run = generate(w, small_prompt(), Stream::with_image, plan, o);
  ASSERT_FALSE(free_run.tokens.empty());
  o.eos = free_run.tokens.front();
  const auto stopped = generate(w, small_prompt(), Stream::with_image, plan, o);
  EXPECT_EQ(stopped.tokens, std::vector<TokenId>{free_run.tokens.front()});
}

TEST(Argmax, TiesGoToLowestIndex) {
  const std::vector<double> v{1.0, 3.0, 3.0, 2.0};
  EXPECT_EQ(argmax(v), 1u);
}

TEST(KvCache, LengthNeverDecreasesAndCapacityEnforced) {
  const auto c = small_config();
  KVCache kv(c);
  kv.reserve(4);
  kv.commit(4);
  EXPECT_EQ(kv.length(), 4u);
  EXPECT_THROW(kv.commit(3), hs::InvalidArgument);
  EXPECT_THROW(kv.reserve(c.max_positions + 1), hs::CapacityError);
  EXPECT_THROW(kv.commit(c.max_positions + 1), hs::CapacityError);
}

TEST(KvCache, GrowthPreservesRows) {
  ModelConfig c = small_config();
  c.max_positions = 200;
  KVCache kv(c);
  kv.reserve(3);
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      for (std::size_t h = 0; h < c.n_heads; ++h) {
        auto k = kv.key_row(l, h, p);
        for (std::size_t j = 0; j < k.size(); ++j) k[j] = 1000.0 * l + 100.0 * h + 10.0 * p + j;
      }
    }
  }
  kv.commit(3);
  kv.reserve(150);
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      for (std::size_t h = 0; h < c.n_heads; ++h) {
        const auto k = kv.keys(l, h, 3);
        for (std::size_t j = 0; j < c.d_head; ++j) {
          EXPECT_EQ(k[p * c.d_head + j], 1000.0 * l + 100.0 * h + 10.0 * p + j);
        }
      }
    }
  }
}

TEST(Weights, RoundTripIsBitExact) {
  const auto c = small_config();
  Weights w = random_weights(c, 16);
  w.layers[1].image_masked = {1, 0};
  const auto dir = hs::testing::temp_dir("weights_rt");
  save_weights(w, dir / "w.hswt");
  EXPECT_EQ(load_weights(dir / "w.hswt"), w);

  const auto pm = build_planted_model(default_toy_config(), 3, 0.2);
  save_weights(pm.weights, dir / "p.hswt");
  EXPECT_EQ(load_weights(dir / "p.hswt"), pm.weights);
}

TEST(Weights, MalformedFilesRejected) {
  const auto c = small_config();
  const auto dir = hs::testing::temp_dir("weights_bad");
  save_weights(random_weights(c, 17), dir / "w.hswt");
  std::ifstream in(dir / "w.hswt", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto write = [&](const std::vector<char>& b) {
    std::ofstream out(dir / "x.hswt", std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  auto bad = bytes;
  bad[0] = 'X';
  write(bad);
  try {
    load_weights(dir / "x.hswt");
    FAIL() << "bad magic accepted";
  } catch (const hs::ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  write(std::vector<char>(bytes.begin(), bytes.end() - 5));
  EXPECT_THROW(load_weights(dir / "x.hswt"), hs::ParseError);
  bad = bytes;
  bad.push_back(0);
  write(bad);
  EXPECT_THROW(load_weights(dir / "x.hswt"), hs::ParseError);
  bad = bytes;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(bad.data() + bad.size() - 8, &nan, 8);
  write(bad);
  try {
    load_weights(dir / "x.hswt");
    FAIL() << "NaN accepted";
  } catch (const hs::ParseError& e) {
    EXPECT_EQ(e.offset(), bytes.size() - 8);
  }
  EXPECT_THROW(load_weights(dir / "missing.hswt"), hs::IoError);
}

// ---- planted model ----

TEST(Planted, RejectsConfigsTooSmall) {
  auto c = default_toy_config();
  c.n_layers = 2;
  EXPECT_THROW(build_planted_model(c, 1, 0.1), hs::InvalidArgument);
  c = default_toy_config();
  c.n_heads = 2;
  c.d_head = 64;
  EXPECT_THROW(build_planted_model(c, 1, 0.1), hs::InvalidArgument);
  c = default_toy_config();
  c.vocab_size = 40;
  EXPECT_THROW(build_planted_model(c, 1, 0.1), hs::InvalidArgument);
  EXPECT_THROW(build_planted_model(default_toy_config(), 1, -0.5), hs::InvalidArgument);
}

TEST(Planted, DeterministicInSeed) {
  const auto a = build_planted_model(default_toy_config(), 5, 0.15);
  const auto b = build_planted_model(default_toy_config(), 5, 0.15);
  const auto d = build_planted_model(default_toy_config(), 6, 0.15);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_FALSE(a.weights == d.weights);
}

// With no prior the caption is exactly the scene, for many weight seeds and scenes.
TEST(Planted, NoPriorMeansNoHallucination) {
  const auto cfg = default_toy_config();
  const auto& vocab = default_vocab();
  GenerateOptions o;
  o.eos = vocab.eos;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto pm = build_planted_model(cfg, seed, 0.0);
    const HeadScalePlan identity(cfg.n_layers, cfg.n_heads);
    for (const auto& scene : hs::evalsuite::make_scenes(8, 1000 + seed, vocab, cfg.n_image_tokens)) {
      const auto toks = generate(pm.weights, hs::evalsuite::caption_prompt(vocab, scene),
                                 Stream::with_image, identity, o).tokens;
      const auto mentioned = hs::evalsuite::extract_mentions(toks, vocab);
      EXPECT_EQ(mentioned, std::set<TokenId>(scene.true_objects.begin(), scene.true_objects.end()))
          << "seed " << seed << " scene " << scene.scene_id;
      ASSERT_FALSE(toks.empty());
      EXPECT_EQ(toks.back(), vocab.eos);
    }
  }
}

TEST(Planted, FrozenPriorHallucinatesInAtLeast30PercentOfScenes) {
  const auto cfg = default_toy_config();
  const auto& vocab = default_vocab();
  const auto pm = build_planted_model(cfg, 7, kDefaultPriorBias);
  const auto scenes = hs::evalsuite::make_scenes(200, 2024, vocab, cfg.n_image_tokens);
  GenerateOptions o;
  o.eos = vocab.eos;
  std::size_t with_prior = 0;
  for (const auto& scene : scenes) {
    const auto toks = generate(pm.weights, hs::evalsuite::caption_prompt(vocab, scene),
                               Stream::with_image, HeadScalePlan(cfg.n_layers, cfg.n_heads), o).tokens;
    const std::set<TokenId> truth(scene.true_objects.begin(), scene.true_objects.end());
    for (TokenId m : hs::evalsuite::extract_mentions(toks, vocab)) {
      if (!truth.contains(m) && vocab.is_prior(m)) {
        ++with_prior;
        break;
      }
    }
  }
  EXPECT_GE(static_cast<double>(with_prior) / scenes.size(), 0.30);
}

// Attention audit: vision heads look at the image, the memory head at <bos>, at every decode step.
TEST(Planted, AttentionMassAudit) {
  const auto cfg = default_toy_config();
  const auto& vocab = default_vocab();
  for (std::uint64_t seed : {7u, 11u, 19u}) {
    const auto pm = build_planted_model(cfg, seed, kDefaultPriorBias);
    const HeadScalePlan identity(cfg.n_layers, cfg.n_heads);
    for (const auto& scene : hs::evalsuite::make_scenes(15, seed, vocab, cfg.n_image_tokens)) {
      const Prompt p = hs::evalsuite::caption_prompt(vocab, scene);
      const auto image_pos = image_heads_positions(p);
      Session s(pm.weights, Stream::with_image);
      s.set_record_attention(true);
      auto r = s.step(p.sequence(Stream::with_image), identity);
      for (int step = 0; step < 16; ++step) {
        for (const HeadRef& h : pm.roles.vision_heads()) {
          const auto& a = r.attention.at(h.layer * cfg.n_heads + h.head);
          double mass = 0;
          for (TokenId pos : image_pos) mass += a[pos];
          EXPECT_GE(mass, 0.9) << "head (" << h.layer << "," << h.head << ") step " << step;
        }
        const auto& m = r.attention.at(pm.roles.memory.layer * cfg.n_heads + pm.roles.memory.head);
        EXPECT_GE(m[0], 0.9) << "memory head step " << step;
        const TokenId next = argmax(r.logits.values());
        if (next == vocab.eos) break;
        const InputToken t{TokenKind::text, next};
        r = s.step(std::span(&t, 1), identity);
      }
    }
  }
}

TEST(Planted, RolesAreDistinctAndInExpectedLayers) {
  const auto cfg = default_toy_config();
  const auto pm = build_planted_model(cfg, 7, kDefaultPriorBias);
  EXPECT_EQ(pm.roles.collector.layer, 0u);
  EXPECT_EQ(pm.roles.caption.layer, 1u);
  EXPECT_EQ(pm.roles.verifier.layer, 1u);
  EXPECT_NE(pm.roles.caption.head, pm.roles.verifier.head);
  EXPECT_EQ(pm.roles.memory.layer, 2u);
  EXPECT_EQ(pm.roles.late_caption.layer, cfg.n_layers - 1);
}
