// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/config.hpp"

#include <string>

#include "headsteer/error.hpp"

namespace headsteer::model {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw InvalidArgument(std::string("ModelConfig: ") + name + " must be positive");
  };
  positive(n_layers, "n_layers");
  positive(n_heads, "n_heads");
  positive(d_model, "d_model");
  positive(d_head, "d_head");
  positive(d_ff, "d_ff");
  positive(vocab_size, "vocab_size");
  positive(image_vocab_size, "image_vocab_size");
  positive(max_positions, "max_positions");
  if (n_heads % 2 != 0) throw InvalidArgument("ModelConfig: n_heads must be even");
  if (n_heads * d_head != d_model) {
    throw InvalidArgument("ModelConfig: n_heads * d_head (" + std::to_string(n_heads * d_head) +
                          ") != d_model (" + std::to_string(d_model) + ")");
  }
  if (max_positions < n_image_tokens + 1) {
    throw InvalidArgument("ModelConfig: max_positions must exceed n_image_tokens");
  }
}

ModelConfig default_toy_config() { return ModelConfig{}; }

std::string_view to_string(Stream s) noexcept {
  return s == Stream::with_image ? "with_image" : "text_only";
}

std::vector<InputToken> Prompt::sequence(Stream stream) const {
  std::vector<InputToken> out;
  out.reserve(length(stream));
  for (TokenId t : prefix) out.push_back({TokenKind::text, t});
  if (stream == Stream::with_image) {
    for (TokenId t : image) out.push_back({TokenKind::image, t});
  }
  for (TokenId t : text) out.push_back({TokenKind::text, t});
  return out;
}

std::size_t Prompt::length(Stream stream) const noexcept {
  return prefix.size() + text.size() + (stream == Stream::with_image ? image.size() : 0);
}

}  // namespace headsteer::model
