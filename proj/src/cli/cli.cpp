// SPDX-License-Identifier: Apache-2.0
#include "headsteer/cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "headsteer/divergence/vhd.hpp"
#include "headsteer/error.hpp"
#include "headsteer/evalsuite/experiment.hpp"
#include "headsteer/evalsuite/scenes.hpp"
#include "headsteer/model/planted.hpp"
#include "headsteer/model/vocab.hpp"
#include "headsteer/numerics/stats.hpp"
#include "headsteer/trace/analyze.hpp"
#include "headsteer/trace/trace.hpp"

namespace headsteer::cli {
namespace {

using nlohmann::json;

std::size_t parse_index(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) {
    throw InvalidArgument(std::string(what) + ": not a nonnegative integer: '" + std::string(s) + "'");
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("config key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw InvalidArgument("config key '" + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

std::string layers_text(const reinforce::VhrConfig& c) {
  std::string s;
  for (std::size_t l : c.reinforced_layers) s += (s.empty() ? "" : ",") + std::to_string(l);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::filesystem::path out_file(const RunConfig& cfg, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(*cfg.out_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.out_dir->string() + ": " + ec.message());
  return *cfg.out_dir / name;
}

/// JSON goes to <out>/<name> when an output directory is set, else to stdout.
void emit_json(const RunConfig& cfg, const std::string& name, const json& j, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (cfg.out_dir) {
    const auto path = out_file(cfg, name);
    write_text(path, text);
    out << "wrote " << path.string() << "\n";
  } else {
    out << text;
  }
}

/// Raw flag values; unset optionals leave the config-file value alone.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> layers;
  std::optional<std::size_t> k;
  std::optional<std::size_t> scenes;
  std::optional<std::size_t> max_new;
  std::optional<std::string> out;
  std::optional<std::string> trace_out;
  bool no_cache = false;
  bool emit_plots = false;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file with flat dotted keys");
  app->add_option("--seed", f.seed, "Seed for scenes, batteries and other run randomness");
  app->add_option("--alpha", f.alpha, "Reinforcement strength (> 0)");
  app->add_option("--layers", f.layers, "Reinforced layers: 'default' or e.g. 1,3-5");
  app->add_option("--k", f.k, "Top-k per layer for T-VHD (1..n_heads)");
  app->add_option("--scenes", f.scenes, "Number of fixture scenes");
  app->add_option("--max-new", f.max_new, "Maximum generated tokens per prompt");
  app->add_option("--out", f.out, "Output directory for JSON reports and images");
  app->add_option("--trace-out", f.trace_out, "Write a VHDT trace of the paired captures (gen)");
  app->add_flag("--no-cache", f.no_cache, "Recompute the full sequence every step");
  app->add_flag("--emit-plots", f.emit_plots, "Write per-step VHD heatmaps (needs --out)");
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (!f.config.empty()) c = load_config_file(f.config, c);
  if (f.seed) c.seed = *f.seed;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.layers) c.layers = parse_layer_spec(*f.layers);
  if (f.k) {
    c.k = *f.k;
    c.k_explicit = true;
  }
  if (f.scenes) c.n_scenes = *f.scenes;
  if (f.max_new) c.max_new = *f.max_new;
  if (f.out) c.out_dir = *f.out;
  if (f.trace_out) c.trace_out = *f.trace_out;
  if (f.no_cache) c.use_cache = false;
  if (f.emit_plots) c.emit_plots = true;
  c.validate();
  return c;
}

std::size_t effective_k(const RunConfig& cfg, std::size_t n_heads) {
  return cfg.k_explicit ? cfg.k : std::min(cfg.k, n_heads);
}

evalsuite::DecoderSpec decoder(const RunConfig& cfg, const model::ModelConfig& mc,
                               std::optional<reinforce::VhrConfig> vhr) {
  evalsuite::DecoderSpec d;
  d.vhr = std::move(vhr);
  d.max_new = cfg.max_new;
  d.k = effective_k(cfg, mc.n_heads);
  d.use_cache = cfg.use_cache;
  return d;
}

std::string alpha_label(double a) {
  std::ostringstream s;
  s << "vhr(alpha=" << a << ")";
  return s.str();
}

evalsuite::MetricsReport chair_report(std::string label, const evalsuite::ChairExperiment& ex) {
  evalsuite::MetricsReport r;
  r.label = std::move(label);
  r.chair = ex.chair;
  r.token_sep = ex.token_sep;
  r.sentence_sep = ex.sentence_sep;
  return r;
}

std::vector<evalsuite::Scene> fixture_scenes(const RunConfig& cfg, const model::ModelConfig& mc,
                                             std::size_t n) {
  return evalsuite::make_scenes(n, cfg.seed, model::default_vocab(), mc.n_image_tokens);
}

json reports_json(const std::vector<evalsuite::MetricsReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(evalsuite::to_json(r));
  return arr;
}

// ---- subcommands ----

int cmd_gen(const RunConfig& cfg, std::size_t scene_index, bool baseline, std::ostream& out) {
  const model::Weights w = load_model(cfg);
  const auto& vocab = model::default_vocab();
  const auto& mc = w.config;
  const auto scenes = fixture_scenes(cfg, mc, scene_index + 1);
  const auto& scene = scenes.back();
  const auto prompt = evalsuite::caption_prompt(vocab, scene);
  const std::size_t k = effective_k(cfg, mc.n_heads);

  model::GenerateOptions opts;
  opts.max_new = cfg.max_new;
  opts.use_cache = cfg.use_cache;
  opts.eos = vocab.eos;

  std::vector<model::TokenId> tokens;
  std::vector<double> series;
  std::vector<divergence::PairedCapture> pairs;
  json j = {{"scene", scene_index}, {"decoder", baseline ? "baseline" : "vhr"}, {"k", k}};
  if (baseline) {
    auto g = divergence::tvhd_for_generation(w, prompt, k, opts,
                                             model::HeadScalePlan(mc.n_layers, mc.n_heads));
    tokens = std::move(g.tokens);
    series = std::move(g.series.values);
    pairs = std::move(g.pairs);
  } else {
    auto vc = cfg.vhr(mc);
    vc.tvhd_k = k;
    auto g = reinforce::generate_with_vhr(w, prompt, vc, opts, true);
    tokens = std::move(g.tokens);
    series = std::move(g.tvhd->values);
    pairs = std::move(g.pairs);
    j["selection"] = reinforce::to_json(g.selection);
  }

  std::string objects;
  for (auto t : scene.true_objects) objects += (objects.empty() ? "" : " ") + std::string(vocab.name(t));
  out << "scene " << scene_index << ": " << objects << "\n";
  if (j.contains("selection")) out << "selection " << j["selection"].dump() << "\n";
  json toks = json::array();
  char line[128];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::snprintf(line, sizeof line, "%4zu  %-10s  %.6f\n", i, std::string(vocab.name(tokens[i])).c_str(),
                  series[i]);
    out << line;
    toks.push_back({{"token", tokens[i]}, {"word", vocab.name(tokens[i])}, {"tvhd", series[i]}});
  }
  j["tokens"] = toks;
  j["text"] = model::detokenize(vocab, tokens);

  if (cfg.out_dir) emit_json(cfg, "gen.json", j, out);
  if (cfg.trace_out && !pairs.empty()) {
    trace::TraceHeader h;
    h.n_layers = mc.n_layers;
    h.n_heads = mc.n_heads;
    h.d_head = mc.d_head;
    h.n_steps = pairs.size();
    h.metadata = {{"model", cfg.weights_path ? cfg.weights_path->string()
                                             : "planted(seed=" + std::to_string(cfg.model_seed) + ")"},
                  {"decoder", baseline ? "baseline" : "vhr"},
                  {"scene", std::to_string(scene_index)}};
    if (!baseline) {
      h.metadata["alpha"] = j["selection"]["alpha"].dump();
      h.metadata["layers"] = layers_text(cfg.vhr(mc));
    }
    trace::write_trace(*cfg.trace_out, h, pairs);
    out << "wrote " << cfg.trace_out->string() << "\n";
  }
  if (cfg.emit_plots && !pairs.empty()) {
    const auto files = trace::write_heatmaps(trace::analyze_pairs(pairs, k), *cfg.out_dir);
    out << "wrote " << files.size() << " heatmaps to " << cfg.out_dir->string() << "\n";
  }
  return 0;
}

int cmd_plan(const RunConfig& cfg, std::size_t scene_index, std::ostream& out) {
  const model::Weights w = load_model(cfg);
  const auto scenes = fixture_scenes(cfg, w.config, scene_index + 1);
  const auto prompt = evalsuite::caption_prompt(model::default_vocab(), scenes.back());
  const auto sel = reinforce::plan_vhr(w, prompt, cfg.vhr(w.config));
  emit_json(cfg, "plan.json", reinforce::to_json(sel), out);
  return 0;
}

int cmd_trace_analyze(const RunConfig& cfg, const std::string& file, std::ostream& out) {
  const auto t = trace::read_trace(file);
  const auto report = trace::analyze_trace(t, effective_k(cfg, t.header().n_heads));
  emit_json(cfg, "trace_report.json", trace::to_json(report), out);
  if (cfg.emit_plots) {
    const auto files = trace::write_heatmaps(report, *cfg.out_dir);
    out << "wrote " << files.size() << " heatmaps to " << cfg.out_dir->string() << "\n";
  }
  return 0;
}

std::vector<evalsuite::MetricsReport> chair_pair(const RunConfig& cfg, const model::Weights& w,
                                                 std::uint64_t scene_seed) {
  const auto& vocab = model::default_vocab();
  const auto scenes = evalsuite::make_scenes(cfg.n_scenes, scene_seed, vocab, w.config.n_image_tokens);
  std::vector<evalsuite::MetricsReport> reports;
  reports.push_back(chair_report(
      "baseline", evalsuite::run_chair_experiment(w, scenes, vocab, decoder(cfg, w.config, {}))));
  reports.push_back(chair_report(alpha_label(cfg.alpha),
                                 evalsuite::run_chair_experiment(
                                     w, scenes, vocab, decoder(cfg, w.config, cfg.vhr(w.config)))));
  return reports;
}

// `splits` > 1 repeats the comparison on scene seeds seed, seed+1, ... and
// adds mean and population std of both rates per decoder.
int cmd_eval_chair(const RunConfig& cfg, std::size_t splits, std::ostream& out) {
  if (splits == 0) throw InvalidArgument("--splits must be >= 1");
  const model::Weights w = load_model(cfg);
  if (splits == 1) {
    const auto reports = chair_pair(cfg, w, cfg.seed);
    out << evalsuite::to_table(reports);
    emit_json(cfg, "chair.json", reports_json(reports), out);
    return 0;
  }
  json runs = json::array();
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rate_s, rate_i;
  for (std::size_t i = 0; i < splits; ++i) {
    const std::uint64_t seed = cfg.seed + i;
    const auto reports = chair_pair(cfg, w, seed);
    if (labels.empty()) {
      for (const auto& r : reports) labels.push_back(r.label);
      rate_s.resize(reports.size());
      rate_i.resize(reports.size());
    }
    for (std::size_t d = 0; d < reports.size(); ++d) {
      rate_s[d].push_back(reports[d].chair->chair_s);
      rate_i[d].push_back(reports[d].chair->chair_i);
    }
    runs.push_back({{"seed", seed}, {"reports", reports_json(reports)}});
  }
  json summary = json::array();
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %19s %19s   (%zu splits of %zu scenes)\n", "method",
                "CHAIR_S", "CHAIR_I", splits, cfg.n_scenes);
  out << line;
  for (std::size_t d = 0; d < labels.size(); ++d) {
    const auto cs = numerics::summary_stats(rate_s[d]);
    const auto ci = numerics::summary_stats(rate_i[d]);
    std::snprintf(line, sizeof line, "%-20s %9.2f +- %6.2f %9.2f +- %6.2f\n", labels[d].c_str(),
                  100.0 * cs.mean, 100.0 * cs.std, 100.0 * ci.mean, 100.0 * ci.std);
    out << line;
    summary.push_back({{"label", labels[d]},
                       {"chair_s_mean", cs.mean},
                       {"chair_s_std", cs.std},
                       {"chair_i_mean", ci.mean},
                       {"chair_i_std", ci.std}});
  }
  emit_json(cfg, "chair.json", {{"splits", splits}, {"summary", summary}, {"runs", runs}}, out);
  return 0;
}

int cmd_eval_pope(const RunConfig& cfg, std::ostream& out) {
  const model::Weights w = load_model(cfg);
  const auto& vocab = model::default_vocab();
  const auto scenes = fixture_scenes(cfg, w.config, cfg.n_scenes);
  std::vector<evalsuite::MetricsReport> reports;
  for (bool vhr : {false, true}) {
    evalsuite::MetricsReport r;
    r.label = vhr ? alpha_label(cfg.alpha) : "baseline";
    auto answer = evalsuite::model_answerer(
        w, vocab, vhr ? std::optional(cfg.vhr(w.config)) : std::nullopt);
    r.pope = evalsuite::run_pope_experiment(answer, scenes, vocab, cfg.seed);
    reports.push_back(std::move(r));
  }
  out << evalsuite::to_table(reports);
  emit_json(cfg, "pope.json", reports_json(reports), out);
  return 0;
}

int cmd_prop1(const RunConfig& cfg, std::size_t trials, std::size_t dim, std::size_t contribs,
              std::ostream& out) {
  const auto s = reinforce::prop1_battery(trials, dim, contribs, cfg.seed);
  out << s.passed << "/" << s.trials << " trials passed\n";
  if (cfg.out_dir) {
    emit_json(cfg, "prop1.json",
              {{"trials", s.trials}, {"passed", s.passed}, {"min_margin", s.min_margin},
               {"dim", dim}, {"contributions", contribs}, {"seed", cfg.seed}},
              out);
  }
  return s.passed == s.trials ? 0 : 1;
}

int cmd_bench(const RunConfig& cfg, std::size_t runs, std::size_t n_prompts, std::ostream& out) {
  const model::Weights w = load_model(cfg);
  const auto scenes = fixture_scenes(cfg, w.config, n_prompts);
  std::vector<model::Prompt> prompts;
  for (const auto& s : scenes) prompts.push_back(evalsuite::caption_prompt(model::default_vocab(), s));
  const auto r = reinforce::overhead_benchmark(w, prompts, cfg.vhr(w.config), cfg.max_new, runs);
  char line[160];
  std::snprintf(line, sizeof line, "baseline %.3f ms  vhr %.3f ms  ratio %.4f  (median of %zu, %zu prompts, %zu tokens)\n",
                r.baseline_ms, r.vhr_ms, r.ratio, r.runs, prompts.size(), cfg.max_new);
  out << line;
  if (cfg.out_dir) {
    emit_json(cfg, "overhead.json",
              {{"baseline_ms", r.baseline_ms}, {"vhr_ms", r.vhr_ms}, {"ratio", r.ratio},
               {"runs", r.runs}, {"prompts", prompts.size()}, {"max_new", cfg.max_new}},
              out);
  }
  return 0;
}

int cmd_sweep_alpha(const RunConfig& cfg, const std::vector<double>& values, std::ostream& out) {
  if (values.empty()) throw InvalidArgument("sweep alpha: --values is empty");
  const model::Weights w = load_model(cfg);
  const auto& vocab = model::default_vocab();
  const auto scenes = fixture_scenes(cfg, w.config, cfg.n_scenes);
  std::vector<evalsuite::MetricsReport> reports;
  reports.push_back(chair_report(
      "baseline", evalsuite::run_chair_experiment(w, scenes, vocab, decoder(cfg, w.config, {}))));
  for (double a : values) {
    RunConfig c = cfg;
    c.alpha = a;
    c.validate();
    reports.push_back(chair_report(
        alpha_label(a),
        evalsuite::run_chair_experiment(w, scenes, vocab, decoder(c, w.config, c.vhr(w.config)))));
  }
  out << evalsuite::to_table(reports);
  emit_json(cfg, "sweep_alpha.json", reports_json(reports), out);
  return 0;
}

int cmd_sweep_layers(const RunConfig& cfg, const std::vector<std::string>& values, std::ostream& out) {
  if (values.empty()) throw InvalidArgument("sweep layers: --values is empty");
  const model::Weights w = load_model(cfg);
  const auto& vocab = model::default_vocab();
  const auto scenes = fixture_scenes(cfg, w.config, cfg.n_scenes);
  std::vector<evalsuite::MetricsReport> reports;
  reports.push_back(chair_report(
      "baseline", evalsuite::run_chair_experiment(w, scenes, vocab, decoder(cfg, w.config, {}))));
  for (const auto& spec : values) {
    RunConfig c = cfg;
    c.layers = parse_layer_spec(spec);
    const auto vc = c.vhr(w.config);
    reports.push_back(chair_report(
        "layers=" + layers_text(vc),
        evalsuite::run_chair_experiment(w, scenes, vocab, decoder(c, w.config, vc))));
  }
  out << evalsuite::to_table(reports);
  emit_json(cfg, "sweep_layers.json", reports_json(reports), out);
  return 0;
}

}  // namespace

void RunConfig::validate() const {
  if (!std::isfinite(alpha) || alpha <= 0.0) throw InvalidArgument("alpha must be finite and > 0");
  if (k == 0) throw InvalidArgument("k must be >= 1");
  if (n_scenes == 0) throw InvalidArgument("scene count must be >= 1");
  if (!std::isfinite(prior_bias) || prior_bias < 0.0) throw InvalidArgument("prior_bias must be >= 0");
  if (emit_plots && !out_dir) throw InvalidArgument("--emit-plots needs --out");
  if (weights_path && !std::filesystem::exists(*weights_path)) {
    throw InvalidArgument("weights file not found: " + weights_path->string());
  }
}

reinforce::VhrConfig RunConfig::vhr(const model::ModelConfig& mc) const {
  reinforce::VhrConfig v = reinforce::VhrConfig::defaults(mc);
  v.alpha = alpha;
  if (layers) v.reinforced_layers = *layers;
  v.tvhd_k = effective_k(*this, mc.n_heads);
  v.validate(mc);
  return v;
}

std::optional<std::vector<std::size_t>> parse_layer_spec(std::string_view spec) {
  const std::string s = trim(spec);
  if (s == "default") return std::nullopt;
  if (s.empty()) throw InvalidArgument("layer spec is empty");
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = std::min(s.find(',', start), s.size());
    const std::string item = trim(std::string_view(s).substr(start, comma - start));
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_index(item, "layer spec"));
    } else {
      const std::size_t lo = parse_index(trim(item.substr(0, dash)), "layer spec");
      const std::size_t hi = parse_index(trim(item.substr(dash + 1)), "layer spec");
      if (hi < lo) throw InvalidArgument("layer spec: descending range '" + item + "'");
      for (std::size_t l = lo; l <= hi; ++l) out.push_back(l);
    }
    start = comma + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RunConfig apply_config_json(const nlohmann::json& flat, RunConfig c) {
  if (!flat.is_object()) throw InvalidArgument("config must be a JSON object");
  for (const auto& [key, v] : flat.items()) {
    if (key == "model.n_layers") c.model.n_layers = get_count(v, key);
    else if (key == "model.n_heads") c.model.n_heads = get_count(v, key);
    else if (key == "model.d_model") c.model.d_model = get_count(v, key);
    else if (key == "model.d_head") c.model.d_head = get_count(v, key);
    else if (key == "model.d_ff") c.model.d_ff = get_count(v, key);
    else if (key == "model.n_image_tokens") c.model.n_image_tokens = get_count(v, key);
    else if (key == "model.max_positions") c.model.max_positions = get_count(v, key);
    else if (key == "model.weights") c.weights_path = get_as<std::string>(v, key);
    else if (key == "model.seed") c.model_seed = get_count(v, key);
    else if (key == "model.prior_bias") c.prior_bias = get_as<double>(v, key);
    else if (key == "vhr.alpha") c.alpha = get_as<double>(v, key);
    else if (key == "vhr.layers") {
      if (v.is_array()) {
        std::vector<std::size_t> ls;
        for (const auto& e : v) ls.push_back(get_count(e, key));
        std::sort(ls.begin(), ls.end());
        ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
        c.layers = ls;
      } else {
        c.layers = parse_layer_spec(get_as<std::string>(v, key));
      }
    } else if (key == "vhr.k") {
      c.k = get_count(v, key);
      c.k_explicit = true;
    } else if (key == "seed") c.seed = get_count(v, key);
    else if (key == "scenes.count") c.n_scenes = get_count(v, key);
    else if (key == "decode.max_new") c.max_new = get_count(v, key);
    else if (key == "decode.use_cache") c.use_cache = get_as<bool>(v, key);
    else if (key == "output.dir") c.out_dir = get_as<std::string>(v, key);
    else if (key == "output.emit_plots") c.emit_plots = get_as<bool>(v, key);
    else if (key == "output.trace_out") c.trace_out = get_as<std::string>(v, key);
    else throw InvalidArgument("unknown config key '" + key + "'");
  }
  return c;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw InvalidArgument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return apply_config_json(j, std::move(base));
}

model::Weights load_model(const RunConfig& cfg) {
  const auto& vocab = model::default_vocab();
  if (cfg.weights_path) {
    model::Weights w = model::load_weights(*cfg.weights_path);
    if (w.config.vocab_size != vocab.size() || w.config.image_vocab_size != vocab.n_objects() + 1) {
      throw InvalidArgument("weights file vocabulary does not match the built-in vocabulary");
    }
    return w;
  }
  return model::build_planted_model(cfg.model, cfg.model_seed, cfg.prior_bias).weights;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Head-divergence analysis and head reinforcement on a toy multimodal transformer",
               "headsteer"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Flags f;
  std::size_t scene = 0;
  bool baseline = false;
  std::string trace_file;
  std::size_t trials = 10000, dim = 64, contribs = 8;
  std::size_t runs = 20, n_prompts = 8;
  std::vector<double> alphas{0.2, 0.5, 2.0, 3.0, 4.0};
  std::vector<std::string> layer_sets;

  auto* gen = app.add_subcommand("gen", "Caption one fixture scene; print tokens and per-token T-VHD");
  add_common(gen, f);
  gen->add_option("--scene", scene, "Fixture scene index");
  gen->add_flag("--baseline", baseline, "Decode without reinforcement");

  auto* plan = app.add_subcommand("plan", "Emit the head selection for one fixture scene as JSON");
  add_common(plan, f);
  plan->add_option("--scene", scene, "Fixture scene index");

  auto* tr = app.add_subcommand("trace", "Trace utilities");
  tr->require_subcommand(1);
  auto* analyze = tr->add_subcommand("analyze", "Offline VHD / T-VHD report for a VHDT file");
  add_common(analyze, f);
  analyze->add_option("file", trace_file, "VHDT trace file")->required();

  auto* ev = app.add_subcommand("eval", "Fixture experiments (baseline vs reinforced)");
  ev->require_subcommand(1);
  auto* chair = ev->add_subcommand("chair", "CHAIR_S / CHAIR_I and T-VHD separation");
  add_common(chair, f);
  std::size_t splits = 1;
  chair->add_option("--splits", splits, "Scene sets (seeds seed, seed+1, ...); >1 adds mean +- std")
      ->capture_default_str();
  auto* pope = ev->add_subcommand("pope", "POPE accuracy / precision / recall / F1 per split");
  add_common(pope, f);

  auto* check = app.add_subcommand("check", "Numerical checks");
  check->require_subcommand(1);
  auto* prop1 = check->add_subcommand("prop1", "Reorientation battery for amplified heads");
  add_common(prop1, f);
  prop1->add_option("--trials", trials, "Number of random trials");
  prop1->add_option("--dim", dim, "Residual dimension");
  prop1->add_option("--contribs", contribs, "Head contributions per trial");

  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  auto* overhead = bench->add_subcommand("overhead", "Reinforced vs baseline decoding time");
  add_common(overhead, f);
  overhead->add_option("--runs", runs, "Timed runs per decoder (median reported)");
  overhead->add_option("--prompts", n_prompts, "Fixture prompts per run");

  auto* sweep = app.add_subcommand("sweep", "Per-setting CHAIR tables");
  sweep->require_subcommand(1);
  auto* sw_alpha = sweep->add_subcommand("alpha", "Sweep the reinforcement strength");
  add_common(sw_alpha, f);
  sw_alpha->add_option("--values", alphas, "Comma-separated alphas")->delimiter(',')->capture_default_str();
  auto* sw_layers = sweep->add_subcommand("layers", "Sweep the reinforced layer set");
  add_common(sw_layers, f);
  sw_layers->add_option("--values", layer_sets, "Semicolon-separated layer specs, e.g. '1;3;1,3;default'")
      ->delimiter(';')
      ->required();

  std::vector<const char*> argv{"headsteer"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  }

  try {
    const RunConfig cfg = resolve(f);
    if (gen->parsed()) return cmd_gen(cfg, scene, baseline, out);
    if (plan->parsed()) return cmd_plan(cfg, scene, out);
    if (analyze->parsed()) return cmd_trace_analyze(cfg, trace_file, out);
    if (chair->parsed()) return cmd_eval_chair(cfg, splits, out);
    if (pope->parsed()) return cmd_eval_pope(cfg, out);
    if (prop1->parsed()) return cmd_prop1(cfg, trials, dim, contribs, out);
    if (overhead->parsed()) return cmd_bench(cfg, runs, n_prompts, out);
    if (sw_alpha->parsed()) return cmd_sweep_alpha(cfg, alphas, out);
    if (sw_layers->parsed()) return cmd_sweep_layers(cfg, layer_sets, out);
    err << app.help();
    return 1;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace headsteer::cli
