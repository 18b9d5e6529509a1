// SPDX-License-Identifier: Apache-2.0
#include "headsteer/divergence/vhd.hpp"

#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/ops.hpp"
#include "headsteer/numerics/stats.hpp"

namespace headsteer::divergence {

using model::Stream;

void PairedCapture::validate() const {
  if (!with_image.same_shape(text_only)) throw InvalidArgument("PairedCapture: shape mismatch");
  if (with_image.stream() != Stream::with_image || text_only.stream() != Stream::text_only) {
    throw InvalidArgument("PairedCapture: stream tags must be (with_image, text_only)");
  }
  if (with_image.data().empty()) throw InvalidArgument("PairedCapture: empty capture");
}

VhdTable vhd_scores(const PairedCapture& pair) {
  pair.validate();
  const std::size_t L = pair.with_image.n_layers();
  const std::size_t H = pair.with_image.n_heads();
  VhdTable t{pair.step, HeadTable(L, H)};
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t h = 0; h < H; ++h) {
      t.scores(l, h) = numerics::euclidean_distance(pair.with_image.head(l, h),
                                                    pair.text_only.head(l, h));
    }
  }
  return t;
}

TaTable text_activation(const ForwardCapture& cap) {
  if (cap.stream() != Stream::text_only) {
    throw InvalidArgument("text_activation: capture must come from the text-only stream");
  }
  TaTable t{HeadTable(cap.n_layers(), cap.n_heads())};
  for (std::size_t l = 0; l < cap.n_layers(); ++l) {
    for (std::size_t h = 0; h < cap.n_heads(); ++h) t.values(l, h) = numerics::squared_norm(cap.head(l, h));
  }
  return t;
}

std::vector<double> zero_outliers(std::span<const double> vhd_row, std::span<const double> ta_row) {
  if (vhd_row.size() != ta_row.size()) {
    throw InvalidArgument("zero_outliers: row lengths differ (" + std::to_string(vhd_row.size()) +
                          " vs " + std::to_string(ta_row.size()) + ")");
  }
  std::vector<double> out(vhd_row.begin(), vhd_row.end());
  if (out.empty()) return out;
  const auto sv = numerics::summary_stats(vhd_row);
  const auto st = numerics::summary_stats(ta_row);
  const double vhd_cut = sv.mean + sv.std;
  const double ta_cut = st.mean + st.std;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (vhd_row[i] > vhd_cut && ta_row[i] > ta_cut) out[i] = 0.0;
  }
  return out;
}

double t_vhd(const VhdTable& table, std::size_t k) {
  const std::size_t H = table.scores.n_heads();
  if (k == 0 || k > H) {
    throw InvalidArgument("t_vhd: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(H) + "]");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < table.scores.n_layers(); ++l) {
    total += numerics::topk_sum(table.scores.row(l), k);
  }
  return total;
}

TvhdGeneration continue_paired(model::Session& with_image, model::Session& text_only,
                               const model::Prompt& prompt, model::StepResult first_with,
                               model::StepResult first_text, std::size_t k,
                               const model::GenerateOptions& options,
                               const model::HeadScalePlan& plan) {
  if (with_image.stream() != Stream::with_image || text_only.stream() != Stream::text_only) {
    throw InvalidArgument("continue_paired: sessions must be (with_image, text_only)");
  }
  TvhdGeneration out;
  out.series.k = k;
  model::StepResult cw = std::move(first_with);
  model::StepResult ct = std::move(first_text);
  std::vector<model::InputToken> full_w, full_t;
  if (!options.use_cache) {
    full_w = prompt.sequence(Stream::with_image);
    full_t = prompt.sequence(Stream::text_only);
  }
  for (std::size_t t = 0; t < options.max_new; ++t) {
    const model::TokenId next = model::argmax(cw.logits.values());
    PairedCapture pair{std::move(cw.capture), std::move(ct.capture), t};
    out.series.values.push_back(t_vhd(vhd_scores(pair), k));
    out.pairs.push_back(std::move(pair));
    out.tokens.push_back(next);
    if (options.eos && next == *options.eos) break;
    if (t + 1 == options.max_new) break;
    const model::InputToken tok{model::TokenKind::text, next};
    if (options.use_cache) {
      cw = with_image.step(std::span<const model::InputToken>(&tok, 1), plan);
      ct = text_only.step(std::span<const model::InputToken>(&tok, 1), plan);
    } else {
      full_w.push_back(tok);
      full_t.push_back(tok);
      with_image.reset();
      text_only.reset();
      cw = with_image.step(full_w, plan);
      ct = text_only.step(full_t, plan);
    }
  }
  return out;
}

TvhdGeneration tvhd_for_generation(const model::Weights& weights, const model::Prompt& prompt,
                                   std::size_t k, const model::GenerateOptions& options,
                                   const model::HeadScalePlan& plan) {
  if (prompt.image.empty()) throw InvalidArgument("tvhd_for_generation: image required");
  if (k == 0 || k > weights.config.n_heads) throw InvalidArgument("tvhd_for_generation: k out of range");
  if (options.max_new == 0) return TvhdGeneration{{}, TvhdSeries{k, {}}, {}};
  model::Session sw(weights, Stream::with_image);
  model::Session st(weights, Stream::text_only);
  model::StepResult fw = sw.step(prompt.sequence(Stream::with_image), plan);
  model::StepResult ft = st.step(prompt.sequence(Stream::text_only), plan);
  return continue_paired(sw, st, prompt, std::move(fw), std::move(ft), k, options, plan);
}

}  // namespace headsteer::divergence
