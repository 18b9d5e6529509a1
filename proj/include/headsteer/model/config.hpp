// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace headsteer::model {

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 8;
  std::size_t d_model = 128;
  std::size_t d_head = 16;
  std::size_t d_ff = 128;
  std::size_t vocab_size = 32;
  std::size_t image_vocab_size = 13;
  std::size_t n_image_tokens = 6;
  std::size_t max_positions = 512;

  /// Throws InvalidArgument when the invariants do not hold
  /// (n_heads even, n_heads * d_head == d_model, room for the image plus one token).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// The toy default used by the CLI and the fixtures.
ModelConfig default_toy_config();

using TokenId = std::uint32_t;

enum class TokenKind : std::uint8_t { text, image };

struct InputToken {
  TokenKind kind = TokenKind::text;
  TokenId id = 0;

  friend bool operator==(const InputToken&, const InputToken&) = default;
};

enum class Stream : std::uint8_t { with_image, text_only };

std::string_view to_string(Stream s) noexcept;

/// Prompt layout: prefix text, image tokens, then instruction text.
/// The text-only view drops the image span entirely, so later positions shift down.
struct Prompt {
  std::vector<TokenId> prefix;
  std::vector<TokenId> image;
  std::vector<TokenId> text;

  std::vector<InputToken> sequence(Stream stream) const;
  std::size_t length(Stream stream) const noexcept;
};

}  // namespace headsteer::model
