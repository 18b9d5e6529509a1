// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace headsteer {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates an operation's precondition (shape, range, ordering).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Zero-norm or otherwise degenerate numeric input.
class SingularInput : public Error {
 public:
  using Error::Error;
};

/// KV cache or position table would overflow.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A metric whose denominator is empty (e.g. precision with no positive predictions).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input. `offset()` is the byte offset where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace headsteer
