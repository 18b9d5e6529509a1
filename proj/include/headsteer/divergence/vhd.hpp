// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "headsteer/divergence/tables.hpp"
#include "headsteer/model/capture.hpp"
#include "headsteer/model/config.hpp"
#include "headsteer/model/engine.hpp"
#include "headsteer/model/head_plan.hpp"
#include "headsteer/model/weights.hpp"

namespace headsteer::divergence {

using model::ForwardCapture;

struct PairedCapture {
  ForwardCapture with_image;
  ForwardCapture text_only;
  std::size_t step = 0;

  /// Throws InvalidArgument unless shapes match and stream tags are correct.
  void validate() const;
};

/// scores(l, i) = ||with_image(l, i) - text_only(l, i)||.
VhdTable vhd_scores(const PairedCapture& pair);

/// Squared norm per head; `cap` must be a text-only capture.
TaTable text_activation(const ForwardCapture& cap);

/// Entry i becomes 0 iff vhd[i] > mean+std of vhd AND ta[i] > mean+std of ta,
/// both thresholds taken from the input rows (population std, strict >).
std::vector<double> zero_outliers(std::span<const double> vhd_row, std::span<const double> ta_row);

/// Sum over layers of the k largest raw scores in each layer; 1 <= k <= n_heads.
double t_vhd(const VhdTable& table, std::size_t k);

struct TvhdGeneration {
  std::vector<model::TokenId> tokens;
  TvhdSeries series;
  std::vector<PairedCapture> pairs;  ///< one per generated token
};

/// Greedy generation with the image while a text-only session is teacher-forced
/// on the same realized tokens; T-VHD is recorded for each generated token.
/// Both streams run `plan` (identity for baseline analysis).
TvhdGeneration tvhd_for_generation(const model::Weights& weights, const model::Prompt& prompt,
                                   std::size_t k, const model::GenerateOptions& options,
                                   const model::HeadScalePlan& plan);

/// Shared loop: continues two sessions whose last forward produced
/// `first_with` / `first_text`. Used by the baseline and reinforced paths.
TvhdGeneration continue_paired(model::Session& with_image, model::Session& text_only,
                               const model::Prompt& prompt, model::StepResult first_with, model::StepResult first_text,
                               std::size_t k, const model::GenerateOptions& options,
                               const model::HeadScalePlan& plan);

}  // namespace headsteer::divergence
