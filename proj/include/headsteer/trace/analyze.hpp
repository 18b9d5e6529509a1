// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "headsteer/divergence/tables.hpp"
#include "headsteer/divergence/vhd.hpp"
#include "headsteer/trace/trace.hpp"

namespace headsteer::trace {

struct StepAnalysis {
  std::size_t step = 0;
  divergence::VhdTable vhd;
  divergence::TaTable ta;
  divergence::HeadTable zeroed;  ///< vhd after outlier zeroing, per layer
  /// The heads reinforcement would pick in every layer at this step.
  std::map<std::size_t, std::vector<std::size_t>> selected;
  double tvhd = 0.0;
};

struct TraceReport {
  std::size_t k = 0;
  std::vector<StepAnalysis> steps;
};

/// Shared by in-process and offline analysis; 1 <= k <= n_heads.
TraceReport analyze_pairs(std::span<const divergence::PairedCapture> pairs, std::size_t k);
TraceReport analyze_trace(const TraceFile& trace, std::size_t k);

/// {k, tvhd: [...], steps: [{step, layers, ta, zeroed, selected, tvhd}]}
nlohmann::json to_json(const TraceReport& report);

/// One PNG per step (layer rows x head columns); returns the files written.
std::vector<std::filesystem::path> write_heatmaps(const TraceReport& report,
                                                  const std::filesystem::path& dir,
                                                  const std::string& prefix = "vhd_step");

}  // namespace headsteer::trace
