// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "headsteer/model/config.hpp"

namespace headsteer::model {

/// Toy vocabulary shared by the planted model and the evaluation harness.
///
/// Image token ids: object k of `objects` is image id k; the padding image
/// token is objects.size().
struct VocabSpec {
  std::vector<std::string> names;  ///< indexed by text token id
  std::vector<TokenId> objects;    ///< object-word token ids, in object-index order
  std::vector<TokenId> fillers;    ///< words that are neither objects nor control tokens
  /// Over-represented in language, under-represented in scenes.
  std::vector<TokenId> prior_objects;
  /// (prior object, trigger object): mentioning the trigger raises the prior object.
  std::vector<std::pair<TokenId, TokenId>> cooccurrence;

  TokenId bos = 0;
  TokenId eos = 1;
  TokenId dot = 2;
  TokenId yes = 3;
  TokenId no = 4;
  TokenId describe = 5;
  TokenId is = 6;
  TokenId there = 7;
  TokenId qmark = 8;

  std::size_t size() const noexcept { return names.size(); }
  std::size_t n_objects() const noexcept { return objects.size(); }
  bool is_object(TokenId t) const noexcept;
  bool is_prior(TokenId t) const noexcept;
  /// Position of `t` in `objects`; throws InvalidArgument for non-objects.
  std::size_t object_index(TokenId t) const;
  TokenId image_token(TokenId object) const { return static_cast<TokenId>(object_index(object)); }
  TokenId blank_image_token() const noexcept { return static_cast<TokenId>(objects.size()); }
  std::string_view name(TokenId t) const;
  /// Name to token id; throws InvalidArgument for unknown words.
  TokenId id(std::string_view word) const;

  /// Throws InvalidArgument unless there are at least 8 distinct object words,
  /// all ids are in range, and prior/co-occurrence entries are objects.
  void validate() const;
};

/// 32 words: 12 control tokens, 12 objects (the last three are the prior
/// objects), 8 fillers.
const VocabSpec& default_vocab();

/// Space-separated token names.
std::string detokenize(const VocabSpec& vocab, const std::vector<TokenId>& tokens);

}  // namespace headsteer::model
