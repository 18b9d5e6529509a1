// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "headsteer/error.hpp"

namespace headsteer::model {
namespace {

static_assert(std::endian::native == std::endian::little, "HSWT I/O assumes a little-endian host");

constexpr char kMagic[4] = {'H', 'S', 'W', 'T'};

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidArgument("Weights: " + what + " has shape " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
}

void expect_finite_gain(double g, const std::string& what) {
  if (!std::isfinite(g)) throw InvalidArgument("Weights: " + what + " is not finite");
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void matrix(const Matrix& m) {
    const auto v = m.values();
    bytes(v.data(), v.size() * sizeof(double));
  }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}
  void bytes(void* p, std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw ParseError(std::string("HSWT: truncated while reading ") + what + " at offset " +
                           std::to_string(pos_),
                       pos_);
    }
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    bytes(&v, sizeof v, what);
    return v;
  }
  double f64(const char* what) {
    double v = 0;
    bytes(&v, sizeof v, what);
    if (!std::isfinite(v)) {
      throw ParseError("HSWT: non-finite value at offset " + std::to_string(pos_ - 8), pos_ - 8);
    }
    return v;
  }
  Matrix matrix(std::size_t rows, std::size_t cols, const char* what) {
    std::vector<double> v(rows * cols);
    const std::size_t at = pos_;
    bytes(v.data(), v.size() * sizeof(double), what);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) {
        throw ParseError("HSWT: non-finite value at offset " + std::to_string(at + 8 * i),
                         at + 8 * i);
      }
    }
    return Matrix(rows, cols, std::move(v));
  }
  std::size_t offset() const noexcept { return pos_; }
  std::size_t size() const noexcept { return data_.size(); }
  const char* at(std::size_t p) const noexcept { return data_.data() + p; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},         {"n_heads", c.n_heads},
          {"d_model", c.d_model},           {"d_head", c.d_head},
          {"d_ff", c.d_ff},                 {"vocab_size", c.vocab_size},
          {"image_vocab_size", c.image_vocab_size}, {"n_image_tokens", c.n_image_tokens},
          {"max_positions", c.max_positions}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.d_head = j.at("d_head").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.image_vocab_size = j.at("image_vocab_size").get<std::size_t>();
  c.n_image_tokens = j.at("n_image_tokens").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  return c;
}

}  // namespace

Weights Weights::zeros(const ModelConfig& cfg) {
  cfg.validate();
  Weights w;
  w.config = cfg;
  w.token_embedding = Matrix::zeros(cfg.vocab_size, cfg.d_model);
  w.image_embedding = Matrix::zeros(cfg.image_vocab_size, cfg.d_model);
  w.position = Matrix::zeros(cfg.max_positions, cfg.d_model);
  w.layers.resize(cfg.n_layers);
  for (auto& lw : w.layers) {
    lw.wq.assign(cfg.n_heads, Matrix::zeros(cfg.d_model, cfg.d_head));
    lw.wk = lw.wq;
    lw.wv = lw.wq;
    lw.wo = Matrix::zeros(cfg.d_model, cfg.d_model);
    lw.w1 = Matrix::zeros(cfg.d_model, cfg.d_ff);
    lw.w2 = Matrix::zeros(cfg.d_ff, cfg.d_model);
    lw.image_masked.assign(cfg.n_heads, 0);
  }
  w.unembedding = Matrix::zeros(cfg.d_model, cfg.vocab_size);
  return w;
}

void Weights::validate() const {
  config.validate();
  const auto& c = config;
  expect_shape(token_embedding, c.vocab_size, c.d_model, "token_embedding");
  expect_shape(image_embedding, c.image_vocab_size, c.d_model, "image_embedding");
  expect_shape(position, c.max_positions, c.d_model, "position");
  expect_shape(unembedding, c.d_model, c.vocab_size, "unembedding");
  expect_finite_gain(final_gain, "final_gain");
  if (layers.size() != c.n_layers) throw InvalidArgument("Weights: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lw = layers[l];
    const std::string tag = "layer " + std::to_string(l) + " ";
    if (lw.wq.size() != c.n_heads || lw.wk.size() != c.n_heads || lw.wv.size() != c.n_heads) {
      throw InvalidArgument("Weights: " + tag + "head count mismatch");
    }
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      expect_shape(lw.wq[h], c.d_model, c.d_head, tag + "wq");
      expect_shape(lw.wk[h], c.d_model, c.d_head, tag + "wk");
      expect_shape(lw.wv[h], c.d_model, c.d_head, tag + "wv");
    }
    expect_shape(lw.wo, c.d_model, c.d_model, tag + "wo");
    expect_shape(lw.w1, c.d_model, c.d_ff, tag + "w1");
    expect_shape(lw.w2, c.d_ff, c.d_model, tag + "w2");
    expect_finite_gain(lw.attn_gain, tag + "attn_gain");
    expect_finite_gain(lw.ffn_gain, tag + "ffn_gain");
    if (!lw.image_masked.empty() && lw.image_masked.size() != c.n_heads) {
      throw InvalidArgument("Weights: " + tag + "image mask length mismatch");
    }
  }
}

void save_weights(const Weights& w, const std::filesystem::path& path) {
  w.validate();
  nlohmann::json header = {{"format_version", kWeightsFormatVersion},
                           {"config", config_to_json(w.config)}};
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& lw : w.layers) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t h = 0; h < w.config.n_heads; ++h) {
      row.push_back(!lw.image_masked.empty() && lw.image_masked[h] != 0);
    }
    masks.push_back(row);
  }
  header["image_masked"] = masks;
  const std::string text = header.dump();

  Writer out(path);
  out.bytes(kMagic, 4);
  out.u32(kWeightsFormatVersion);
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.bytes(text.data(), text.size());
  out.matrix(w.token_embedding);
  out.matrix(w.image_embedding);
  out.matrix(w.position);
  for (const auto& lw : w.layers) {
    for (const auto& m : lw.wq) out.matrix(m);
    for (const auto& m : lw.wk) out.matrix(m);
    for (const auto& m : lw.wv) out.matrix(m);
    out.matrix(lw.wo);
    out.matrix(lw.w1);
    out.matrix(lw.w2);
    out.f64(lw.attn_gain);
    out.f64(lw.ffn_gain);
  }
  out.f64(w.final_gain);
  out.matrix(w.unembedding);
  out.finish(path);
}

Weights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("HSWT: bad magic at offset 0", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kWeightsFormatVersion) {
    throw ParseError("HSWT: unsupported version " + std::to_string(version) + " at offset 4", 4);
  }
  const std::uint32_t header_len = r.u32("header length");
  if (r.size() - r.offset() < header_len) {
    throw ParseError("HSWT: header length " + std::to_string(header_len) +
                         " exceeds file size at offset 8",
                     8);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.at(r.offset()), r.at(r.offset() + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("HSWT: malformed header at offset 12: ") + e.what(), 12);
  }
  r.skip(header_len);

  Weights w;
  try {
    w.config = config_from_json(header.at("config"));
    w.config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("HSWT: incomplete header at offset 12: ") + e.what(), 12);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("HSWT: invalid config at offset 12: ") + e.what(), 12);
  }
  const auto& c = w.config;
  w.token_embedding = r.matrix(c.vocab_size, c.d_model, "token embedding");
  w.image_embedding = r.matrix(c.image_vocab_size, c.d_model, "image embedding");
  w.position = r.matrix(c.max_positions, c.d_model, "positions");
  w.layers.resize(c.n_layers);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    auto& lw = w.layers[l];
    for (auto* set : {&lw.wq, &lw.wk, &lw.wv}) {
      for (std::size_t h = 0; h < c.n_heads; ++h) set->push_back(r.matrix(c.d_model, c.d_head, "head"));
    }
    lw.wo = r.matrix(c.d_model, c.d_model, "wo");
    lw.w1 = r.matrix(c.d_model, c.d_ff, "w1");
    lw.w2 = r.matrix(c.d_ff, c.d_model, "w2");
    lw.attn_gain = r.f64("attn_gain");
    lw.ffn_gain = r.f64("ffn_gain");
    lw.image_masked.assign(c.n_heads, 0);
    const auto masks = header.value("image_masked", nlohmann::json::array());
    if (l < masks.size()) {
      for (std::size_t h = 0; h < c.n_heads && h < masks[l].size(); ++h) {
        lw.image_masked[h] = masks[l][h].get<bool>() ? 1 : 0;
      }
    }
  }
  w.final_gain = r.f64("final_gain");
  w.unembedding = r.matrix(c.d_model, c.vocab_size, "unembedding");
  if (r.offset() != r.size()) {
    throw ParseError("HSWT: " + std::to_string(r.size() - r.offset()) +
                         " trailing bytes at offset " + std::to_string(r.offset()),
                     r.offset());
  }
  return w;
}

}  // namespace headsteer::model
