// SPDX-License-Identifier: Apache-2.0
#include "headsteer/numerics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "headsteer/error.hpp"

namespace headsteer::numerics {

SummaryStats summary_stats(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("summary_stats: empty input");
  const double first = values.front();
  if (std::all_of(values.begin(), values.end(), [first](double v) { return v == first; })) {
    return {first, 0.0, first};
  }
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median =
      sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return {mean, std::sqrt(ss / n), median};
}

double topk_sum(std::span<const double> values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw InvalidArgument("topk_sum: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(values.size()) + "]");
  }
  std::vector<double> v(values.begin(), values.end());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(),
                    std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += v[i];
  return sum;
}

}  // namespace headsteer::numerics
