// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "headsteer/model/config.hpp"
#include "headsteer/model/planted.hpp"
#include "headsteer/model/weights.hpp"
#include "headsteer/reinforce/vhr.hpp"

namespace headsteer::cli {

/// Resolved settings for one run. Precedence: defaults, then the config file,
/// then command-line flags.
struct RunConfig {
  model::ModelConfig model = model::default_toy_config();
  std::optional<std::filesystem::path> weights_path;  ///< else a planted model
  std::uint64_t model_seed = 7;
  double prior_bias = model::kDefaultPriorBias;

  double alpha = 2.0;
  std::optional<std::vector<std::size_t>> layers;  ///< empty optional = default layers
  std::size_t k = 8;
  bool k_explicit = false;  ///< trace analysis clamps an implicit k to n_heads

  std::uint64_t seed = 2024;  ///< scenes, batteries and other run randomness
  std::size_t n_scenes = 300;
  std::size_t max_new = 32;
  bool use_cache = true;

  std::optional<std::filesystem::path> out_dir;
  bool emit_plots = false;
  std::optional<std::filesystem::path> trace_out;

  /// Throws InvalidArgument: alpha <= 0, k == 0, n_scenes == 0, plots without an output directory.
  void validate() const;
  /// VhrConfig for a model with this config.
  reinforce::VhrConfig vhr(const model::ModelConfig& mc) const;
};

/// "default", or comma-separated indices and inclusive ranges ("1,3-5").
/// Result is sorted and deduplicated; empty optional means the default set.
std::optional<std::vector<std::size_t>> parse_layer_spec(std::string_view spec);

/// Applies a flat dotted-key JSON object on top of `base`. Unknown keys and
/// wrongly typed values throw InvalidArgument.
RunConfig apply_config_json(const nlohmann::json& flat, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Loads the weights file or builds the planted model.
model::Weights load_model(const RunConfig& cfg);

/// Exit codes: 0 success, 1 validation failure or usage error, 2 internal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace headsteer::cli
