// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "headsteer/divergence/vhd.hpp"
#include "headsteer/error.hpp"
#include "headsteer/evalsuite/scenes.hpp"
#include "headsteer/model/engine.hpp"
#include "headsteer/model/planted.hpp"
#include "headsteer/reinforce/vhr.hpp"
#include "headsteer/trace/analyze.hpp"
#include "headsteer/trace/trace.hpp"
#include "test_support.hpp"

namespace hs = headsteer;
using namespace hs::trace;
using hs::divergence::PairedCapture;
using hs::model::ForwardCapture;
using hs::model::Stream;

namespace {

TraceHeader header(std::size_t L, std::size_t H, std::size_t d, std::size_t steps) {
  TraceHeader h;
  h.n_layers = L;
  h.n_heads = H;
  h.d_head = d;
  h.n_steps = steps;
  return h;
}

std::vector<float> random_payload(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<float> d(0.0f, 3.0f);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& b, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(b, u);
}

// A trace laid out byte by byte, the way an independent writer would.
std::vector<std::uint8_t> hand_built(const std::string& json, std::span<const float> values) {
  std::vector<std::uint8_t> b{'V', 'H', 'D', 'T'};
  put_u32(b, 1);
  put_u32(b, static_cast<std::uint32_t>(json.size()));
  b.insert(b.end(), json.begin(), json.end());
  for (float f : values) put_f32(b, f);
  return b;
}

const char* kTinyJson =
    R"({"format_version":1,"n_layers":1,"n_heads":1,"d_head":2,"n_steps":1,"paired":true,"metadata":{"model":"tiny"}})";

std::string parse_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_trace(bytes);
  } catch (const hs::ParseError& e) {
    return e.what();
  }
  return "";
}

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(TraceFormat, RandomizedRoundTripIsBitIdentical) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  for (int t = 0; t < 50; ++t) {
    auto h = header(dim(rng), dim(rng), dim(rng), dim(rng));
    h.metadata = {{"seed", std::to_string(t)}, {"note", "caf\xc3\xa9 \"quoted\""}};
    const TraceFile f(h, random_payload(rng, h.n_steps * h.floats_per_step()));
    const auto bytes = encode_trace(f);
    const TraceFile g = decode_trace(bytes);
    EXPECT_EQ(g.header(), f.header());
    EXPECT_TRUE(same_bits(g.payload(), f.payload()));
    EXPECT_EQ(encode_trace(g), bytes);
  }
}

TEST(TraceFormat, FileRoundTrip) {
  std::mt19937_64 rng(2);
  const auto dir = hs::testing::temp_dir("trace_file");
  const auto h = header(2, 4, 3, 3);
  const TraceFile f(h, random_payload(rng, 3 * h.floats_per_step()));
  write_trace(dir / "a.vhdt", f);
  EXPECT_EQ(read_trace(dir / "a.vhdt"), f);
  EXPECT_THROW(read_trace(dir / "missing.vhdt"), hs::IoError);
  EXPECT_THROW(write_trace(dir / "no_such_dir" / "x.vhdt", f), hs::IoError);
}

TEST(TraceFormat, MinimalFileSize) {
  const auto h = header(1, 1, 2, 1);
  const auto bytes = encode_trace(TraceFile(h, {1, 2, 3, 4}));
  std::uint32_t json_len;
  std::memcpy(&json_len, bytes.data() + 8, 4);
  EXPECT_EQ(bytes.size(), 12u + json_len + 4 * sizeof(float));
  EXPECT_EQ(std::memcmp(bytes.data(), "VHDT", 4), 0);
}

TEST(TraceFormat, PayloadOrderIsStepLayerStreamHeadComponent) {
  const auto h = header(2, 2, 2, 2);
  std::vector<float> v(2 * h.floats_per_step());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  const TraceFile f(h, v);
  // step 1, layer 1, text_only, head 0 -> ((1*2 + 1)*2 + 1)*2 + 0 = 14 heads in.
  const auto s = f.head(1, 1, 1, 0);
  EXPECT_EQ(s[0], 28.0f);
  EXPECT_EQ(s[1], 29.0f);
  EXPECT_THROW(f.head(2, 0, 0, 0), hs::InvalidArgument);
  EXPECT_THROW(f.head(0, 0, 2, 0), hs::InvalidArgument);
}

TEST(TraceFormat, HandBuiltBufferParses) {
  const float values[] = {0.5f, -1.25f, 3.0f, 4.0f};
  const auto f = decode_trace(hand_built(kTinyJson, values));
  EXPECT_EQ(f.header().n_layers, 1u);
  EXPECT_EQ(f.header().d_head, 2u);
  EXPECT_EQ(f.header().metadata.at("model"), "tiny");
  const auto pairs = f.to_pairs();
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].with_image.head(0, 0)[1], -1.25);
  EXPECT_EQ(pairs[0].text_only.head(0, 0)[0], 3.0);
  // (0.5, -1.25) vs (3, 4): sqrt(2.5^2 + 5.25^2).
  const auto report = analyze_trace(f, 1);
  EXPECT_NEAR(report.steps[0].vhd.scores(0, 0), std::sqrt(6.25 + 27.5625), 1e-12);
  EXPECT_NEAR(report.steps[0].ta.values(0, 0), 25.0, 1e-12);
}

TEST(TraceFormat, RejectsStepCountMismatch) {
  const auto h = header(1, 1, 2, 2);
  EXPECT_THROW(TraceFile(h, {1, 2, 3, 4}), hs::InvalidArgument);
  const PairedCapture p{ForwardCapture(Stream::with_image, 1, 1, 2, {1, 2}),
                        ForwardCapture(Stream::text_only, 1, 1, 2, {3, 4}), 0};
  EXPECT_THROW(TraceFile::from_pairs(h, std::span(&p, 1)), hs::InvalidArgument);
  const auto dir = hs::testing::temp_dir("trace_count");
  EXPECT_THROW(write_trace(dir / "x.vhdt", h, std::span(&p, 1)), hs::InvalidArgument);
}

TEST(TraceFormat, RejectsBadHeaders) {
  EXPECT_THROW(header(0, 1, 1, 1).validate(), hs::InvalidArgument);
  auto h = header(1, 1, 1, 1);
  h.paired = false;
  EXPECT_THROW(h.validate(), hs::InvalidArgument);
  h = header(1, 1, 1, 1);
  h.format_version = 2;
  EXPECT_THROW(h.validate(), hs::InvalidArgument);
}

TEST(TraceFormat, DecodeErrorsNameOffsets) {
  const float values[] = {0.5f, -1.25f, 3.0f, 4.0f};
  const auto good = hand_built(kTinyJson, values);
  const std::size_t payload_at = 12 + std::strlen(kTinyJson);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_NE(parse_error(bad_magic).find("bad magic at offset 0"), std::string::npos);

  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_NE(parse_error(bad_version).find("unsupported version 9 at offset 4"), std::string::npos);

  EXPECT_NE(parse_error(std::span(good).first(2)).find("truncated"), std::string::npos);
  EXPECT_NE(parse_error(std::span(good).first(10)).find("truncated"), std::string::npos);
  EXPECT_NE(parse_error(std::span(good).first(20)).find("truncated"), std::string::npos);

  const auto short_payload = parse_error(std::span(good).first(good.size() - 1));
  EXPECT_NE(short_payload.find("payload size mismatch at offset " + std::to_string(payload_at)),
            std::string::npos);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_NE(parse_error(trailing).find("expected 16 bytes, got 17"), std::string::npos);

  const float with_nan[] = {0.5f, std::numeric_limits<float>::quiet_NaN(), 3.0f, 4.0f};
  const auto nan_msg = parse_error(hand_built(kTinyJson, with_nan));
  EXPECT_NE(nan_msg.find("non-finite value at offset " + std::to_string(payload_at + 4)), std::string::npos);
  EXPECT_NE(nan_msg.find("stream with_image, head 0, component 1"), std::string::npos);

  EXPECT_NE(parse_error(hand_built("{not json", values)).find("offset 12"), std::string::npos);
  EXPECT_FALSE(parse_error(hand_built(R"({"format_version":1})", values)).empty());
  const std::string v2 =
      R"({"format_version":2,"n_layers":1,"n_heads":1,"d_head":2,"n_steps":1,"paired":true,"metadata":{}})";
  EXPECT_FALSE(parse_error(hand_built(v2, values)).empty());
}

TEST(TraceFormat, PayloadSizeOverflowIsRejected) {
  const std::string huge =
      R"({"format_version":1,"n_layers":4294967296,"n_heads":4294967296,"d_head":4294967296,"n_steps":1,"paired":true,"metadata":{}})";
  EXPECT_NE(parse_error(hand_built(huge, {})).find("payload size"), std::string::npos);
}

TEST(TraceFormat, FromPairsRejectsUnrepresentableValues) {
  const auto h = header(1, 1, 1, 1);
  const PairedCapture p{ForwardCapture(Stream::with_image, 1, 1, 1, {1e300}),
                        ForwardCapture(Stream::text_only, 1, 1, 1, {0.0}), 0};
  EXPECT_THROW(TraceFile::from_pairs(h, std::span(&p, 1)), hs::InvalidArgument);
}

TEST(TraceWriter, StreamsStepsAndChecksCount) {
  std::mt19937_64 rng(3);
  const auto dir = hs::testing::temp_dir("trace_writer");
  const auto h = header(2, 2, 3, 3);
  std::vector<PairedCapture> pairs;
  for (std::size_t s = 0; s < 3; ++s) {
    pairs.push_back({ForwardCapture(Stream::with_image, 2, 2, 3, hs::testing::random_values(rng, 12)),
                     ForwardCapture(Stream::text_only, 2, 2, 3, hs::testing::random_values(rng, 12)), s});
  }
  {
    TraceWriter w(dir / "w.vhdt", h);
    for (const auto& p : pairs) w.append(p);
    EXPECT_EQ(w.steps_written(), 3u);
    w.close();
  }
  EXPECT_EQ(read_trace(dir / "w.vhdt"), TraceFile::from_pairs(h, pairs));
  write_trace(dir / "b.vhdt", h, pairs);
  EXPECT_EQ(read_trace(dir / "b.vhdt"), read_trace(dir / "w.vhdt"));

  TraceWriter short_writer(dir / "s.vhdt", h);
  short_writer.append(pairs[0]);
  EXPECT_THROW(short_writer.close(), hs::InvalidArgument);
  TraceWriter over(dir / "o.vhdt", header(2, 2, 3, 1));
  over.append(pairs[0]);
  EXPECT_THROW(over.append(pairs[1]), hs::InvalidArgument);
  const PairedCapture wrong{ForwardCapture(Stream::with_image, 1, 2, 3, std::vector<double>(6, 0.0)),
                            ForwardCapture(Stream::text_only, 1, 2, 3, std::vector<double>(6, 0.0)), 0};
  TraceWriter shape(dir / "x.vhdt", h);
  EXPECT_THROW(shape.append(wrong), hs::InvalidArgument);
}

TEST(TraceAnalysis, IdenticalStreamsGiveZeroVhd) {
  std::mt19937_64 rng(4);
  const auto h = header(3, 4, 5, 2);
  std::vector<float> v = random_payload(rng, 2 * h.floats_per_step());
  const std::size_t block = 4 * 5;
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t l = 0; l < 3; ++l) {
      const std::size_t at = (s * 3 + l) * 2 * block;
      std::copy(v.begin() + at, v.begin() + at + block, v.begin() + at + block);
    }
  }
  const auto r = analyze_trace(TraceFile(h, v), 3);
  for (const auto& st : r.steps) {
    for (double x : st.vhd.scores.values()) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(st.tvhd, 0.0);
  }
  EXPECT_THROW(analyze_trace(TraceFile(h, v), 0), hs::InvalidArgument);
  EXPECT_THROW(analyze_trace(TraceFile(h, v), 5), hs::InvalidArgument);
}

TEST(TraceAnalysis, ReportFieldsAgreeWithDivergenceOps) {
  std::mt19937_64 rng(5);
  const auto h = header(2, 6, 4, 3);
  const TraceFile f(h, random_payload(rng, 3 * h.floats_per_step()));
  const auto r = analyze_trace(f, 2);
  const auto pairs = f.to_pairs();
  ASSERT_EQ(r.steps.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    const auto vhd = hs::divergence::vhd_scores(pairs[s]);
    const auto ta = hs::divergence::text_activation(pairs[s].text_only);
    EXPECT_EQ(r.steps[s].step, s);
    EXPECT_EQ(r.steps[s].tvhd, hs::divergence::t_vhd(vhd, 2));
    for (std::size_t l = 0; l < 2; ++l) {
      const auto z = hs::divergence::zero_outliers(vhd.scores.row(l), ta.values.row(l));
      EXPECT_TRUE(std::equal(z.begin(), z.end(), r.steps[s].zeroed.row(l).begin()));
      EXPECT_EQ(r.steps[s].selected.at(l), hs::reinforce::select_heads(z));
    }
  }
  const auto j = to_json(r);
  EXPECT_EQ(j["k"], 2);
  EXPECT_EQ(j["tvhd"].size(), 3u);
  EXPECT_EQ(j["steps"][1]["selected"]["1"].size(), 3u);
  EXPECT_EQ(j["steps"][2]["tvhd"].get<double>(), r.steps[2].tvhd);
}

// Engine captures written to disk and analyzed offline agree with the
// in-process divergence computed from the f64 captures.
TEST(TraceAnalysis, EngineTraceMatchesInProcessWithinTolerance) {
  const auto cfg = hs::model::default_toy_config();
  const auto pm = hs::model::build_planted_model(cfg, 7, hs::model::kDefaultPriorBias);
  const auto& vocab = hs::model::default_vocab();
  const auto dir = hs::testing::temp_dir("trace_engine");
  const hs::model::HeadScalePlan identity(cfg.n_layers, cfg.n_heads);
  hs::model::GenerateOptions o;
  o.eos = vocab.eos;
  std::size_t i = 0;
  for (const auto& scene : hs::evalsuite::make_scenes(10, 6, vocab, cfg.n_image_tokens)) {
    const auto g = hs::divergence::tvhd_for_generation(pm.weights, hs::evalsuite::caption_prompt(vocab, scene),
                                                       8, o, identity);
    const auto path = dir / ("t" + std::to_string(i++) + ".vhdt");
    write_trace(path, header(cfg.n_layers, cfg.n_heads, cfg.d_head, g.pairs.size()), g.pairs);
    const auto offline = analyze_trace(read_trace(path), 8);
    const auto online = hs::trace::analyze_pairs(g.pairs, 8);
    ASSERT_EQ(offline.steps.size(), g.series.values.size());
    for (std::size_t s = 0; s < offline.steps.size(); ++s) {
      EXPECT_TRUE(hs::testing::close(offline.steps[s].tvhd, g.series.values[s], 1e-6));
      EXPECT_EQ(online.steps[s].tvhd, g.series.values[s]);
      const auto a = offline.steps[s].vhd.scores.values(), b = online.steps[s].vhd.scores.values();
      for (std::size_t e = 0; e < a.size(); ++e) EXPECT_TRUE(hs::testing::close(a[e], b[e], 1e-6));
      const auto ta = offline.steps[s].ta.values.values(), tb = online.steps[s].ta.values.values();
      for (std::size_t e = 0; e < ta.size(); ++e) EXPECT_TRUE(hs::testing::close(ta[e], tb[e], 1e-6));
    }
  }
}

TEST(Heatmaps, OnePngPerStep) {
  std::mt19937_64 rng(7);
  const auto h = header(3, 4, 2, 3);
  const auto r = analyze_trace(TraceFile(h, random_payload(rng, 3 * h.floats_per_step())), 2);
  const auto dir = hs::testing::temp_dir("heatmaps");
  const auto files = write_heatmaps(r, dir, "map");
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0].filename(), "map_0000.png");
  for (const auto& p : files) {
    std::ifstream in(p, std::ios::binary);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    const unsigned char png[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    EXPECT_EQ(std::memcmp(sig, png, 8), 0);
    // IHDR width and height: 4 heads and 3 layers at 12 px per cell.
    unsigned char ihdr[16];
    in.read(reinterpret_cast<char*>(ihdr), 16);
    const auto be = [&](int at) {
      return (std::uint32_t{ihdr[at]} << 24) | (std::uint32_t{ihdr[at + 1]} << 16) |
             (std::uint32_t{ihdr[at + 2]} << 8) | ihdr[at + 3];
    };
    EXPECT_EQ(be(8), 48u);
    EXPECT_EQ(be(12), 36u);
  }
  EXPECT_EQ(write_heatmaps(r, dir / "made" / "deeper").size(), 3u);
  std::ofstream(dir / "plain_file") << "x";
  EXPECT_THROW(write_heatmaps(r, dir / "plain_file"), hs::IoError);
}
