// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/capture.hpp"

#include <algorithm>
#include <cmath>

#include "headsteer/error.hpp"

namespace headsteer::model {

ForwardCapture::ForwardCapture(Stream stream, std::size_t n_layers, std::size_t n_heads,
                               std::size_t d_head)
    : stream_(stream),
      n_layers_(n_layers),
      n_heads_(n_heads),
      d_head_(d_head),
      data_(n_layers * n_heads * d_head, 0.0) {}

ForwardCapture::ForwardCapture(Stream stream, std::size_t n_layers, std::size_t n_heads,
                               std::size_t d_head, std::vector<double> data)
    : stream_(stream),
      n_layers_(n_layers),
      n_heads_(n_heads),
      d_head_(d_head),
      data_(std::move(data)) {
  if (data_.size() != n_layers * n_heads * d_head) {
    throw InvalidArgument("ForwardCapture: buffer size does not match dimensions");
  }
}

double max_abs_difference(const ForwardCapture& a, const ForwardCapture& b) {
  if (!a.same_shape(b)) throw InvalidArgument("max_abs_difference: capture shapes differ");
  double worst = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) worst = std::max(worst, std::abs(da[i] - db[i]));
  return worst;
}

}  // namespace headsteer::model
