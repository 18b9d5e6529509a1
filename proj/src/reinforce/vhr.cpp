// SPDX-License-Identifier: Apache-2.0
#include "headsteer/reinforce/vhr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/ops.hpp"
#include "headsteer/numerics/random.hpp"

namespace headsteer::reinforce {

using model::Stream;

std::vector<std::size_t> default_reinforced_layers(std::size_t n_layers) {
  std::set<std::size_t> layers;
  if (n_layers > 1) layers.insert(1);
  const std::size_t tail = (n_layers + 1) / 2;
  for (std::size_t l = n_layers - tail; l < n_layers; ++l) layers.insert(l);
  return {layers.begin(), layers.end()};
}

VhrConfig VhrConfig::defaults(const model::ModelConfig& cfg) {
  VhrConfig c;
  c.reinforced_layers = default_reinforced_layers(cfg.n_layers);
  c.tvhd_k = std::min<std::size_t>(8, cfg.n_heads);
  return c;
}

void VhrConfig::validate(const model::ModelConfig& cfg) const {
  if (!std::isfinite(alpha) || !(alpha > 0.0)) throw InvalidArgument("VhrConfig: alpha must be finite and > 0");
  for (std::size_t l : reinforced_layers) {
    if (l >= cfg.n_layers) {
      throw InvalidArgument("VhrConfig: layer " + std::to_string(l) + " out of range (model has " +
                            std::to_string(cfg.n_layers) + ")");
    }
  }
  if (tvhd_k == 0 || tvhd_k > cfg.n_heads) throw InvalidArgument("VhrConfig: k out of range");
}

model::HeadScalePlan HeadSelection::to_plan(std::size_t n_layers, std::size_t n_heads) const {
  model::HeadScalePlan plan(n_layers, n_heads);
  for (const auto& [layer, hs] : heads) {
    for (std::size_t h : hs) plan.set(layer, h, alpha);
  }
  return plan;
}

nlohmann::json to_json(const HeadSelection& s) {
  nlohmann::json layers = nlohmann::json::object();
  for (const auto& [layer, hs] : s.heads) layers[std::to_string(layer)] = hs;
  return {{"alpha", s.alpha}, {"frozen_at_step", s.frozen_at_step}, {"layers", layers}};
}

HeadSelection selection_from_json(const nlohmann::json& j) {
  HeadSelection s;
  try {
    s.alpha = j.at("alpha").get<double>();
    s.frozen_at_step = j.at("frozen_at_step").get<std::size_t>();
    for (const auto& [key, value] : j.at("layers").items()) {
      s.heads[std::stoul(key)] = value.get<std::vector<std::size_t>>();
    }
  } catch (const std::exception& e) {
    throw InvalidArgument(std::string("HeadSelection JSON: ") + e.what());
  }
  return s;
}

std::vector<std::size_t> select_heads(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(scores.size() / 2);
  std::sort(idx.begin(), idx.end());
  return idx;
}

PlanOutcome plan_vhr(model::Session& with_image, model::Session& text_only,
                     const model::Prompt& prompt, const VhrConfig& cfg, bool finish_text_only) {
  const auto& mc = with_image.weights().config;
  cfg.validate(mc);
  if (with_image.stream() != Stream::with_image || text_only.stream() != Stream::text_only) {
    throw InvalidArgument("plan_vhr: sessions must be (with_image, text_only)");
  }
  if (with_image.length() != 0 || text_only.length() != 0) {
    throw InvalidArgument("plan_vhr: planning happens at the first step; sessions must be empty");
  }
  if (prompt.image.empty()) throw InvalidArgument("plan_vhr: image required");
  if (prompt.length(Stream::text_only) == 0) throw InvalidArgument("plan_vhr: empty prompt");

  const std::set<std::size_t> planned(cfg.reinforced_layers.begin(), cfg.reinforced_layers.end());
  const std::size_t last_planned = planned.empty() ? 0 : *planned.rbegin();
  const auto seq_w = prompt.sequence(Stream::with_image);
  const auto seq_t = prompt.sequence(Stream::text_only);
  model::LayerwisePass pw = with_image.begin(seq_w);
  std::optional<model::LayerwisePass> pt;
  if (!planned.empty() || finish_text_only) pt.emplace(text_only.begin(seq_t));

  PlanOutcome out;
  out.selection.alpha = cfg.alpha;
  std::vector<double> scales(mc.n_heads);
  while (!pw.done()) {
    const std::size_t l = pw.next_layer();
    const bool run_text = pt && (finish_text_only || l <= last_planned);
    pw.attend();
    if (run_text) pt->attend();
    std::fill(scales.begin(), scales.end(), 1.0);
    if (planned.contains(l)) {
      LayerPlanRecord rec;
      rec.layer = l;
      for (std::size_t h = 0; h < mc.n_heads; ++h) {
        const auto a_text = pt->head_output(h);
        rec.vhd.push_back(numerics::euclidean_distance(pw.head_output(h), a_text));
        rec.ta.push_back(numerics::squared_norm(a_text));
      }
      rec.zeroed = divergence::zero_outliers(rec.vhd, rec.ta);
      rec.selected = select_heads(rec.zeroed);
      for (std::size_t h : rec.selected) scales[h] = cfg.alpha;
      out.selection.heads[l] = rec.selected;
      out.layers.push_back(std::move(rec));
    }
    pw.complete(scales);
    if (run_text) pt->complete(scales);
  }
  out.first_with_image = pw.finish();
  if (finish_text_only && pt) out.first_text_only = pt->finish();
  return out;
}

HeadSelection plan_vhr(const model::Weights& weights, const model::Prompt& prompt,
                       const VhrConfig& cfg) {
  model::Session sw(weights, Stream::with_image);
  model::Session st(weights, Stream::text_only);
  return plan_vhr(sw, st, prompt, cfg, false).selection;
}

VhrGeneration generate_with_vhr(const model::Weights& weights, const model::Prompt& prompt,
                                const VhrConfig& cfg, const model::GenerateOptions& options,
                                bool track_tvhd) {
  const auto& mc = weights.config;
  VhrGeneration out;
  if (options.max_new == 0 && cfg.reinforced_layers.empty()) {
    // Nothing to plan and nothing to decode.
    cfg.validate(mc);
    out.selection.alpha = cfg.alpha;
    return out;
  }
  model::Session sw(weights, Stream::with_image);
  model::Session st(weights, Stream::text_only);
  PlanOutcome planned = plan_vhr(sw, st, prompt, cfg, track_tvhd);
  out.selection = planned.selection;
  if (options.max_new == 0) return out;
  const model::HeadScalePlan plan = out.selection.to_plan(mc.n_layers, mc.n_heads);
  if (track_tvhd) {
    auto g = divergence::continue_paired(sw, st, prompt, std::move(planned.first_with_image),
                                         std::move(*planned.first_text_only), cfg.tvhd_k, options,
                                         plan);
    out.tokens = std::move(g.tokens);
    out.tvhd = std::move(g.series);
    if (options.record_captures) {
      for (const auto& p : g.pairs) out.captures.push_back(p.with_image);
    }
    out.pairs = std::move(g.pairs);
    return out;
  }
  auto g = model::continue_greedy(sw, prompt, std::move(planned.first_with_image), plan, options);
  out.tokens = std::move(g.tokens);
  out.captures = std::move(g.captures);
  return out;
}

Reorientation reorientation_check(const numerics::Vec& x_hat,
                                  std::span<const numerics::Vec> head_contribs, std::size_t h,
                                  double alpha) {
  if (!std::isfinite(alpha) || alpha < 1.0) {
    throw InvalidArgument("reorientation_check: alpha must be finite and >= 1");
  }
  if (h >= head_contribs.size()) throw InvalidArgument("reorientation_check: head index out of range");
  const std::size_t n = x_hat.size();
  std::vector<double> x(x_hat.values().begin(), x_hat.values().end());
  for (const auto& c : head_contribs) {
    if (c.size() != n) throw InvalidArgument("reorientation_check: contribution length mismatch");
    for (std::size_t i = 0; i < n; ++i) x[i] += c[i];
  }
  const auto y = head_contribs[h].values();
  std::vector<double> x_amp(x);
  for (std::size_t i = 0; i < n; ++i) x_amp[i] += (alpha - 1.0) * y[i];

  std::vector<double> ny(n), nx(n), nxa(n);
  numerics::rms_normalize_into(y, 1.0, ny);
  numerics::rms_normalize_into(x, 1.0, nx);
  numerics::rms_normalize_into(x_amp, 1.0, nxa);
  return {numerics::cosine(nx, ny), numerics::cosine(nxa, ny)};
}

Prop1Summary prop1_battery(std::size_t trials, std::size_t dim, std::size_t n_contribs,
                           std::uint64_t seed, double margin) {
  if (dim == 0 || n_contribs == 0) throw InvalidArgument("prop1_battery: empty dimensions");
  const auto start = std::chrono::steady_clock::now();
  numerics::Rng rng(seed);
  Prop1Summary s;
  s.trials = trials;
  s.min_margin = std::numeric_limits<double>::infinity();
  auto draw = [&] {
    std::vector<double> v(dim);
    for (double& e : v) e = rng.normal();
    return numerics::Vec(std::move(v));
  };
  for (std::size_t t = 0; t < trials; ++t) {
    const numerics::Vec x_hat = draw();
    std::vector<numerics::Vec> contribs;
    for (std::size_t c = 0; c < n_contribs; ++c) contribs.push_back(draw());
    const std::size_t h = rng.below(n_contribs);
    const double alpha = 4.0 - 3.0 * rng.uniform();  // (1, 4]
    const Reorientation r = reorientation_check(x_hat, contribs, h, alpha);
    const double gap = r.cos_after - r.cos_before;
    s.min_margin = std::min(s.min_margin, gap);
    if (gap > margin) ++s.passed;
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

OverheadResult overhead_benchmark(const model::Weights& weights,
                                  std::span<const model::Prompt> prompts, const VhrConfig& cfg,
                                  std::size_t max_new, std::size_t runs, bool plan) {
  if (prompts.empty() || runs == 0) throw InvalidArgument("overhead_benchmark: nothing to run");
  const auto& mc = weights.config;
  cfg.validate(mc);
  model::GenerateOptions opts;
  opts.max_new = max_new;
  opts.use_cache = true;
  const model::HeadScalePlan identity(mc.n_layers, mc.n_heads);
  VhrConfig no_plan = cfg;
  no_plan.reinforced_layers.clear();
  no_plan.alpha = 1.0;

  using clock = std::chrono::steady_clock;
  std::vector<double> base_ms, vhr_ms;
  std::size_t sink = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    // Alternate which side goes first so drift does not favour one of them.
    for (int side = 0; side < 2; ++side) {
      const bool vhr_side = (side == 0) == (r % 2 == 1);
      const auto t0 = clock::now();
      for (const auto& p : prompts) {
        if (vhr_side) {
          sink += generate_with_vhr(weights, p, plan ? cfg : no_plan, opts).tokens.size();
        } else {
          sink += model::generate(weights, p, Stream::with_image, identity, opts).tokens.size();
        }
      }
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      (vhr_side ? vhr_ms : base_ms).push_back(ms);
    }
  }
  if (sink == ~std::size_t{0}) throw Error("unreachable");
  OverheadResult res;
  res.runs = runs;
  res.baseline_ms = median(base_ms);
  res.vhr_ms = median(vhr_ms);
  res.ratio = res.vhr_ms / res.baseline_ms;
  return res;
}

WorkCount overhead_work(const model::Weights& weights, const model::Prompt& prompt,
                        const VhrConfig& cfg, std::size_t max_new) {
  const auto& mc = weights.config;
  model::GenerateOptions opts;
  opts.max_new = max_new;
  WorkCount w;
  {
    model::Session s(weights, Stream::with_image);
    auto first = s.step(prompt.sequence(Stream::with_image), model::HeadScalePlan(mc.n_layers, mc.n_heads));
    model::continue_greedy(s, prompt, std::move(first), model::HeadScalePlan(mc.n_layers, mc.n_heads), opts);
    w.baseline_positions = s.positions_processed();
  }
  {
    model::Session sw(weights, Stream::with_image);
    model::Session st(weights, Stream::text_only);
    // The text-only stream is charged a full pass whenever anything is planned.
    PlanOutcome planned = plan_vhr(sw, st, prompt, cfg, !cfg.reinforced_layers.empty());
    const auto plan = planned.selection.to_plan(mc.n_layers, mc.n_heads);
    model::continue_greedy(sw, prompt, std::move(planned.first_with_image), plan, opts);
    w.vhr_positions = sw.positions_processed() + st.positions_processed();
  }
  return w;
}

}  // namespace headsteer::reinforce
