// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/kernels.hpp"
#include "headsteer/numerics/ops.hpp"

namespace headsteer::model {
namespace {

using numerics::kernels;

// Causal attention of `q` rows (absolute positions first_pos + i) over the
// first (first_pos + q.rows()) key/value rows. hidden(j) excludes position j.
template <typename Hidden>
void attend_rows(const Matrix& q, std::span<const double> keys, std::span<const double> values,
                 std::size_t first_pos, Hidden hidden, Matrix& out,
                 std::vector<double>* last_probs) {
  const std::size_t d = q.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const auto& k = kernels();
  std::vector<double> scores;
  std::vector<std::size_t> visible;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const std::size_t pos = first_pos + i;
    scores.clear();
    visible.clear();
    const double* qi = q.row(i).data();
    for (std::size_t j = 0; j <= pos; ++j) {
      if (hidden(j)) continue;
      visible.push_back(j);
      scores.push_back(k.dot(qi, keys.data() + j * d, d) * inv_sqrt_d);
    }
    auto row = out.row(i);
    std::fill(row.begin(), row.end(), 0.0);
    numerics::softmax_inplace(scores);
    for (std::size_t s = 0; s < visible.size(); ++s) {
      k.axpy(row.data(), scores[s], values.data() + visible[s] * d, d);
    }
    if (last_probs != nullptr && i + 1 == q.rows()) {
      last_probs->assign(pos + 1, 0.0);
      for (std::size_t s = 0; s < visible.size(); ++s) (*last_probs)[visible[s]] = scores[s];
    }
  }
}

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  }
}

Matrix normalize_rows(const Matrix& r, double gain) {
  Matrix x = Matrix::zeros(r.rows(), r.cols());
  for (std::size_t i = 0; i < r.rows(); ++i) numerics::rms_normalize_into(r.row(i), gain, x.row(i));
  return x;
}

}  // namespace

Matrix head_forward(const Matrix& x_seq, const Matrix& wq, const Matrix& wk, const Matrix& wv,
                    std::span<const std::uint8_t> hidden) {
  if (wq.rows() != x_seq.cols() || wk.rows() != x_seq.cols() || wv.rows() != x_seq.cols()) {
    throw InvalidArgument("head_forward: projection rows must equal input width");
  }
  if (wk.cols() != wq.cols() || wv.cols() != wq.cols()) {
    throw InvalidArgument("head_forward: query/key/value widths differ");
  }
  if (!hidden.empty() && hidden.size() != x_seq.rows()) {
    throw InvalidArgument("head_forward: hidden mask length must equal sequence length");
  }
  const Matrix q = numerics::matmul(x_seq, wq);
  const Matrix kmat = numerics::matmul(x_seq, wk);
  const Matrix v = numerics::matmul(x_seq, wv);
  Matrix out = Matrix::zeros(x_seq.rows(), wq.cols());
  auto is_hidden = [&](std::size_t j) { return !hidden.empty() && hidden[j] != 0; };
  attend_rows(q, kmat.values(), v.values(), 0, is_hidden, out, nullptr);
  return out;
}

MhaResult mha_forward(const Matrix& x_seq, const LayerWeights& lw, const HeadScalePlan& plan,
                      std::size_t layer, std::span<const std::uint8_t> image_positions) {
  const std::size_t n_heads = lw.wq.size();
  if (n_heads == 0 || lw.wk.size() != n_heads || lw.wv.size() != n_heads) {
    throw InvalidArgument("mha_forward: inconsistent head count");
  }
  if (plan.n_heads() != n_heads || layer >= plan.n_layers()) {
    throw InvalidArgument("mha_forward: plan does not match layer");
  }
  const std::size_t d_head = lw.wq[0].cols();
  check_shape(lw.wo, n_heads * d_head, x_seq.cols(), "mha_forward: wo");
  const auto scales = plan.layer_scales(layer);
  const std::vector<std::uint8_t> none;
  Matrix concat = Matrix::zeros(x_seq.rows(), n_heads * d_head);
  MhaResult result;
  for (std::size_t h = 0; h < n_heads; ++h) {
    const bool masked = !lw.image_masked.empty() && lw.image_masked[h] != 0;
    const Matrix a = head_forward(x_seq, lw.wq[h], lw.wk[h], lw.wv[h],
                                  masked ? image_positions : std::span<const std::uint8_t>(none));
    const auto last = a.row(a.rows() - 1);
    result.last_position.emplace_back(std::vector<double>(last.begin(), last.end()));
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t c = 0; c < d_head; ++c) concat(i, h * d_head + c) = scales[h] * a(i, c);
    }
  }
  result.output = numerics::matmul(concat, lw.wo);
  return result;
}

// ---------------------------------------------------------------------------
// Session / LayerwisePass

Session::Session(const Weights& weights, Stream stream)
    : weights_(&weights), stream_(stream), cache_(weights.config) {}

LayerwisePass Session::begin(std::span<const InputToken> tokens) {
  return LayerwisePass(*this, tokens);
}

StepResult Session::step(std::span<const InputToken> tokens, const HeadScalePlan& plan) {
  const auto& cfg = weights_->config;
  if (plan.n_layers() != cfg.n_layers || plan.n_heads() != cfg.n_heads) {
    throw InvalidArgument("Session::step: plan dimensions do not match the model");
  }
  LayerwisePass pass = begin(tokens);
  while (!pass.done()) {
    const std::size_t l = pass.next_layer();
    pass.attend();
    pass.complete(plan.layer_scales(l));
  }
  return pass.finish();
}

LayerwisePass::LayerwisePass(Session& session, std::span<const InputToken> tokens)
    : session_(&session), start_(session.cache_.length()), n_new_(tokens.size()) {
  const Weights& w = *session.weights_;
  const auto& cfg = w.config;
  if (tokens.empty()) throw InvalidArgument("forward: no input tokens");
  if (start_ + n_new_ > cfg.max_positions) {
    throw CapacityError("forward: " + std::to_string(start_ + n_new_) +
                        " positions exceed capacity " + std::to_string(cfg.max_positions));
  }
  session.cache_.reserve(start_ + n_new_);
  residual_ = Matrix::zeros(n_new_, cfg.d_model);
  for (std::size_t i = 0; i < n_new_; ++i) {
    const InputToken& t = tokens[i];
    const Matrix& table = t.kind == TokenKind::image ? w.image_embedding : w.token_embedding;
    if (t.id >= table.rows()) {
      throw InvalidArgument("forward: token id " + std::to_string(t.id) + " out of range");
    }
    auto row = residual_.row(i);
    const auto emb = table.row(t.id);
    const auto pos = w.position.row(start_ + i);
    for (std::size_t c = 0; c < cfg.d_model; ++c) row[c] = emb[c] + pos[c];
    session.cache_.set_image_flag(start_ + i, t.kind == TokenKind::image);
  }
  capture_ = ForwardCapture(session.stream_, cfg.n_layers, cfg.n_heads, cfg.d_head);
  head_out_.assign(cfg.n_heads, Matrix::zeros(n_new_, cfg.d_head));
  if (session.record_attention_) attention_.resize(cfg.n_layers * cfg.n_heads);
}

bool LayerwisePass::done() const noexcept {
  return layer_ >= session_->weights_->config.n_layers;
}

void LayerwisePass::attend() {
  if (done()) throw InvalidArgument("LayerwisePass::attend: all layers already processed");
  if (attended_) throw InvalidArgument("LayerwisePass::attend: layer already attended");
  const Weights& w = *session_->weights_;
  const auto& cfg = w.config;
  const LayerWeights& lw = w.layers[layer_];
  KVCache& cache = session_->cache_;

  const Matrix x = normalize_rows(residual_, lw.attn_gain);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const Matrix q = numerics::matmul(x, lw.wq[h]);
    const Matrix k = numerics::matmul(x, lw.wk[h]);
    const Matrix v = numerics::matmul(x, lw.wv[h]);
    for (std::size_t i = 0; i < n_new_; ++i) {
      const auto kr = k.row(i);
      const auto vr = v.row(i);
      std::copy(kr.begin(), kr.end(), cache.key_row(layer_, h, start_ + i).begin());
      std::copy(vr.begin(), vr.end(), cache.value_row(layer_, h, start_ + i).begin());
    }
    const std::size_t total = start_ + n_new_;
    const bool masked = !lw.image_masked.empty() && lw.image_masked[h] != 0;
    auto is_hidden = [&](std::size_t j) { return masked && cache.is_image(j); };
    std::vector<double>* probs =
        attention_.empty() ? nullptr : &attention_[layer_ * cfg.n_heads + h];
    attend_rows(q, cache.keys(layer_, h, total), cache.values(layer_, h, total), start_,
                is_hidden, head_out_[h], probs);
    const auto last = head_out_[h].row(n_new_ - 1);
    std::copy(last.begin(), last.end(), capture_.head(layer_, h).begin());
  }
  attended_ = true;
}

std::span<const double> LayerwisePass::head_output(std::size_t h) const {
  if (!attended_) throw InvalidArgument("LayerwisePass::head_output: attend() not called");
  return head_out_.at(h).row(n_new_ - 1);
}

void LayerwisePass::complete(std::span<const double> scales) {
  if (!attended_) throw InvalidArgument("LayerwisePass::complete: attend() not called");
  const Weights& w = *session_->weights_;
  const auto& cfg = w.config;
  if (scales.size() != cfg.n_heads) throw InvalidArgument("LayerwisePass::complete: scale count");
  const LayerWeights& lw = w.layers[layer_];
  const auto& k = numerics::kernels();

  Matrix concat = Matrix::zeros(n_new_, cfg.d_model);
  for (std::size_t i = 0; i < n_new_; ++i) {
    auto row = concat.row(i);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const auto a = head_out_[h].row(i);
      double* dst = row.data() + h * cfg.d_head;
      std::copy(a.begin(), a.end(), dst);
      k.scale(dst, scales[h], cfg.d_head);
    }
  }
  const Matrix attn = numerics::matmul(concat, lw.wo);
  for (std::size_t i = 0; i < n_new_; ++i) k.axpy(residual_.row(i).data(), 1.0, attn.row(i).data(), cfg.d_model);

  const Matrix z = normalize_rows(residual_, lw.ffn_gain);
  Matrix hidden = numerics::matmul(z, lw.w1);
  for (double& v : hidden.values()) v = v > 0.0 ? v : 0.0;
  const Matrix ffn = numerics::matmul(hidden, lw.w2);
  for (std::size_t i = 0; i < n_new_; ++i) k.axpy(residual_.row(i).data(), 1.0, ffn.row(i).data(), cfg.d_model);

  attended_ = false;
  ++layer_;
}

StepResult LayerwisePass::finish() {
  if (!done()) throw InvalidArgument("LayerwisePass::finish: layers remain");
  const Weights& w = *session_->weights_;
  const auto& cfg = w.config;
  std::vector<double> x(cfg.d_model);
  numerics::rms_normalize_into(residual_.row(n_new_ - 1), w.final_gain, x);
  std::vector<double> logits(cfg.vocab_size, 0.0);
  numerics::accumulate_row_times_matrix(x, w.unembedding, logits);
  session_->cache_.commit(start_ + n_new_);
  session_->positions_processed_ += n_new_;
  return StepResult{Vec(std::move(logits)), std::move(capture_), std::move(attention_)};
}

// ---------------------------------------------------------------------------
// Greedy decoding

TokenId argmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

GenerationResult continue_greedy(Session& session, const Prompt& prompt, StepResult first,
                                 const HeadScalePlan& plan, const GenerateOptions& options) {
  GenerationResult out;
  StepResult current = std::move(first);
  std::vector<InputToken> full;
  if (!options.use_cache) full = prompt.sequence(session.stream());
  for (std::size_t t = 0; t < options.max_new; ++t) {
    const TokenId next = argmax(current.logits.values());
    out.tokens.push_back(next);
    if (options.record_captures) out.captures.push_back(std::move(current.capture));
    if (options.eos && next == *options.eos) break;
    if (t + 1 == options.max_new) break;
    const InputToken tok{TokenKind::text, next};
    if (options.use_cache) {
      current = session.step(std::span<const InputToken>(&tok, 1), plan);
    } else {
      full.push_back(tok);
      session.reset();
      current = session.step(full, plan);
    }
  }
  return out;
}

GenerationResult generate(const Weights& weights, const Prompt& prompt, Stream stream,
                          const HeadScalePlan& plan, const GenerateOptions& options) {
  if (prompt.length(stream) == 0) throw InvalidArgument("generate: empty prompt");
  if (options.max_new == 0) return {};
  Session session(weights, stream);
  StepResult first = session.step(prompt.sequence(stream), plan);
  return continue_greedy(session, prompt, std::move(first), plan, options);
}

}  // namespace headsteer::model
