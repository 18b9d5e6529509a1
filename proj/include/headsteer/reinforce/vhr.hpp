// SPDX-License-Identifier: Apache-2.0
#pragma once

// Head reinforcement: pick the more image-sensitive half of the heads in each
// reinforced layer at the first generation step, then scale their outputs by
// alpha for the whole generation.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "headsteer/divergence/tables.hpp"
#include "headsteer/divergence/vhd.hpp"
#include "headsteer/model/config.hpp"
#include "headsteer/model/engine.hpp"
#include "headsteer/model/head_plan.hpp"
#include "headsteer/model/weights.hpp"

namespace headsteer::reinforce {

/// Layer 1 plus the last ceil(n_layers / 2) layers, ascending, in range.
std::vector<std::size_t> default_reinforced_layers(std::size_t n_layers);

struct VhrConfig {
  double alpha = 2.0;
  std::vector<std::size_t> reinforced_layers;  ///< any order; planning sorts
  std::size_t tvhd_k = 8;

  /// Defaults for a model: alpha 2, default layers, k = min(8, n_heads).
  static VhrConfig defaults(const model::ModelConfig& cfg);
  /// Throws InvalidArgument for alpha <= 0 or non-finite, layers out of range,
  /// or k outside [1, n_heads].
  void validate(const model::ModelConfig& cfg) const;
};

struct HeadSelection {
  double alpha = 1.0;
  std::size_t frozen_at_step = 0;
  std::map<std::size_t, std::vector<std::size_t>> heads;  ///< layer -> ascending head indices

  /// Scale alpha on selected heads, 1 elsewhere.
  model::HeadScalePlan to_plan(std::size_t n_layers, std::size_t n_heads) const;

  friend bool operator==(const HeadSelection&, const HeadSelection&) = default;
};

nlohmann::json to_json(const HeadSelection& s);
HeadSelection selection_from_json(const nlohmann::json& j);

/// floor(n/2) indices ranked by score descending, ties to the lower index;
/// returned in ascending index order.
std::vector<std::size_t> select_heads(std::span<const double> scores);

/// What planning saw at one reinforced layer.
struct LayerPlanRecord {
  std::size_t layer = 0;
  std::vector<double> vhd;
  std::vector<double> ta;
  std::vector<double> zeroed;
  std::vector<std::size_t> selected;
};

struct PlanOutcome {
  HeadSelection selection;
  std::vector<LayerPlanRecord> layers;
  /// Step-0 with-image forward under the frozen plan (reused as the first decode step).
  model::StepResult first_with_image;
  /// Step-0 text-only forward; only present when requested.
  std::optional<model::StepResult> first_text_only;
};

/// Layer-by-layer dual-stream planning on the two sessions, which must be
/// empty and tagged (with_image, text_only). When `finish_text_only` is false
/// the text-only stream stops after the last reinforced layer.
PlanOutcome plan_vhr(model::Session& with_image, model::Session& text_only,
                     const model::Prompt& prompt, const VhrConfig& cfg, bool finish_text_only);

/// Convenience: fresh sessions, selection only.
HeadSelection plan_vhr(const model::Weights& weights, const model::Prompt& prompt,
                       const VhrConfig& cfg);

struct VhrGeneration {
  std::vector<model::TokenId> tokens;
  HeadSelection selection;
  std::optional<divergence::TvhdSeries> tvhd;
  std::vector<model::ForwardCapture> captures;  ///< with-image, when options.record_captures
  std::vector<divergence::PairedCapture> pairs;  ///< per generated token, when T-VHD is tracked
};

/// Plans at step 0, then decodes greedily with the frozen plan at every step.
VhrGeneration generate_with_vhr(const model::Weights& weights, const model::Prompt& prompt,
                                const VhrConfig& cfg, const model::GenerateOptions& options,
                                bool track_tvhd = false);

struct Reorientation {
  double cos_before = 0.0;
  double cos_after = 0.0;
};

/// x = x_hat + sum(contribs), y = contribs[h];
/// cos_before = cos(norm(x), norm(y)), cos_after = cos(norm(x + (alpha-1) y), norm(y)).
/// alpha must be finite and >= 1; zero-norm x, y or amplified x throw SingularInput.
Reorientation reorientation_check(const numerics::Vec& x_hat,
                                  std::span<const numerics::Vec> head_contribs, std::size_t h,
                                  double alpha);

struct Prop1Summary {
  std::size_t trials = 0;
  std::size_t passed = 0;
  double min_margin = 0.0;
  double seconds = 0.0;
};

/// Random trials: x_hat and n_contribs contributions ~ N(0, 1)^dim, h uniform,
/// alpha uniform in (1, 4]. A trial passes when cos_after - cos_before > margin.
Prop1Summary prop1_battery(std::size_t trials, std::size_t dim, std::size_t n_contribs,
                           std::uint64_t seed, double margin = 1e-9);

struct OverheadResult {
  double baseline_ms = 0.0;  ///< median per run
  double vhr_ms = 0.0;
  double ratio = 0.0;
  std::size_t runs = 0;
};

/// Median wall-clock of baseline vs reinforced generation over the prompts,
/// with runs interleaved. EOS is ignored so every run decodes max_new tokens.
/// `plan` false skips planning (reinforced run uses an identity plan).
OverheadResult overhead_benchmark(const model::Weights& weights,
                                  std::span<const model::Prompt> prompts, const VhrConfig& cfg,
                                  std::size_t max_new, std::size_t runs, bool plan = true);

struct WorkCount {
  std::size_t baseline_positions = 0;
  std::size_t vhr_positions = 0;
  double ratio() const { return static_cast<double>(vhr_positions) / static_cast<double>(baseline_positions); }
};

/// Positions pushed through the full stack (a timing-free cost measure).
WorkCount overhead_work(const model::Weights& weights, const model::Prompt& prompt,
                        const VhrConfig& cfg, std::size_t max_new);

}  // namespace headsteer::reinforce
