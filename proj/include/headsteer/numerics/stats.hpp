// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

namespace headsteer::numerics {

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;  ///< population (divide by N)
  double median = 0.0;
};

/// Mean, population standard deviation and median. Even-length medians are
/// the midpoint of the two central order statistics. A constant input yields
/// exactly {c, 0, c}.
SummaryStats summary_stats(std::span<const double> values);

/// Sum of the k largest values, accumulated in descending order.
double topk_sum(std::span<const double> values, std::size_t k);

}  // namespace headsteer::numerics
