// SPDX-License-Identifier: Apache-2.0
#include "headsteer/model/vocab.hpp"

#include <algorithm>
#include <set>

#include "headsteer/error.hpp"

namespace headsteer::model {

bool VocabSpec::is_object(TokenId t) const noexcept {
  return std::find(objects.begin(), objects.end(), t) != objects.end();
}

bool VocabSpec::is_prior(TokenId t) const noexcept {
  return std::find(prior_objects.begin(), prior_objects.end(), t) != prior_objects.end();
}

std::size_t VocabSpec::object_index(TokenId t) const {
  const auto it = std::find(objects.begin(), objects.end(), t);
  if (it == objects.end()) throw InvalidArgument("token " + std::to_string(t) + " is not an object");
  return static_cast<std::size_t>(it - objects.begin());
}

std::string_view VocabSpec::name(TokenId t) const {
  if (t >= names.size()) throw InvalidArgument("token id " + std::to_string(t) + " out of range");
  return names[t];
}

TokenId VocabSpec::id(std::string_view word) const {
  const auto it = std::find(names.begin(), names.end(), word);
  if (it == names.end()) throw InvalidArgument("unknown word '" + std::string(word) + "'");
  return static_cast<TokenId>(it - names.begin());
}

void VocabSpec::validate() const {
  const std::set<TokenId> distinct(objects.begin(), objects.end());
  if (distinct.size() < 8) {
    throw InvalidArgument("vocabulary needs at least 8 distinct object words, has " +
                          std::to_string(distinct.size()));
  }
  if (distinct.size() != objects.size()) throw InvalidArgument("duplicate object words");
  for (TokenId t : objects) {
    if (t >= names.size()) throw InvalidArgument("object id out of range");
  }
  for (TokenId t : {bos, eos, dot, yes, no, describe, is, there, qmark}) {
    if (t >= names.size()) throw InvalidArgument("control token id out of range");
    if (is_object(t)) throw InvalidArgument("control token collides with an object word");
  }
  for (TokenId t : prior_objects) {
    if (!is_object(t)) throw InvalidArgument("prior object is not an object word");
  }
  for (const auto& [prior, trigger] : cooccurrence) {
    if (!is_prior(prior) || !is_object(trigger)) {
      throw InvalidArgument("co-occurrence entries must pair a prior object with an object");
    }
  }
}

const VocabSpec& default_vocab() {
  static const VocabSpec vocab = [] {
    VocabSpec v;
    v.names = {"<bos>", "<eos>", ".",     "yes",    "no",    "describe", "is",     "there",
               "?",     "a",     "and",   "the",    "dog",   "cat",      "car",    "table",
               "bottle", "book", "clock", "vase",   "bicycle", "chair",  "cup",    "person",
               "near",  "on",    "with",  "under",  "left",  "right",    "small",  "large"};
    for (TokenId t = 12; t < 24; ++t) v.objects.push_back(t);
    for (TokenId t = 24; t < 32; ++t) v.fillers.push_back(t);
    const TokenId chair = v.id("chair"), cup = v.id("cup"), person = v.id("person");
    v.prior_objects = {chair, cup, person};
    v.cooccurrence = {{chair, v.id("table")},  {chair, v.id("book")},   {cup, v.id("table")},
                      {cup, v.id("bottle")},   {person, v.id("car")},   {person, v.id("bicycle")},
                      {person, v.id("dog")}};
    v.validate();
    return v;
  }();
  return vocab;
}

std::string detokenize(const VocabSpec& vocab, const std::vector<TokenId>& tokens) {
  std::string out;
  for (TokenId t : tokens) {
    if (!out.empty()) out += ' ';
    out += t < vocab.size() ? vocab.names[t] : "<" + std::to_string(t) + ">";
  }
  return out;
}

}  // namespace headsteer::model
