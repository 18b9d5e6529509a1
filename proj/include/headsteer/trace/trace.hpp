// SPDX-License-Identifier: Apache-2.0
#pragma once

// VHDT: paired per-head captures, one record per generation step.
//
//   offset 0   "VHDT"
//   offset 4   u32 format version (little-endian)
//   offset 8   u32 byte length N of the JSON header
//   offset 12  JSON header: format_version, n_layers, n_heads, d_head,
//              n_steps, paired, metadata (string -> string)
//   offset 12+N  f32 little-endian payload ordered
//              step, layer, stream (with_image, text_only), head, component
//
// The payload is exactly n_steps * n_layers * 2 * n_heads * d_head floats and
// every value is finite.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "headsteer/divergence/vhd.hpp"

namespace headsteer::trace {

inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr char kTraceMagic[4] = {'V', 'H', 'D', 'T'};

struct TraceHeader {
  std::uint32_t format_version = kTraceVersion;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::size_t d_head = 0;
  std::size_t n_steps = 0;
  bool paired = true;
  std::map<std::string, std::string> metadata;

  /// Throws InvalidArgument on zero dimensions, unpaired traces or an
  /// unsupported version.
  void validate() const;
  std::size_t floats_per_step() const noexcept { return n_layers * 2 * n_heads * d_head; }

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

class TraceFile {
 public:
  TraceFile() = default;
  /// Validates the header and the payload length and finiteness.
  TraceFile(TraceHeader header, std::vector<float> payload);

  /// Rounds paired captures to f32; their shape must match the header and
  /// their count must equal header.n_steps.
  static TraceFile from_pairs(TraceHeader header, std::span<const divergence::PairedCapture> pairs);

  const TraceHeader& header() const noexcept { return header_; }
  std::span<const float> payload() const noexcept { return payload_; }
  /// stream 0 = with_image, 1 = text_only.
  std::span<const float> head(std::size_t step, std::size_t layer, std::size_t stream,
                              std::size_t head) const;
  /// Captures widened back to f64 (exact), step indices taken from record order.
  std::vector<divergence::PairedCapture> to_pairs() const;

  friend bool operator==(const TraceFile&, const TraceFile&) = default;

 private:
  TraceHeader header_;
  std::vector<float> payload_;
};

std::vector<std::uint8_t> encode_trace(const TraceFile& trace);
/// Throws ParseError naming the byte offset of the first problem.
TraceFile decode_trace(std::span<const std::uint8_t> bytes);

/// Writes header + captures; throws InvalidArgument on shape/count mismatch, IoError on I/O failure.
void write_trace(const std::filesystem::path& path, const TraceHeader& header,
                 std::span<const divergence::PairedCapture> pairs);
void write_trace(const std::filesystem::path& path, const TraceFile& trace);
/// Throws IoError if unreadable, ParseError if malformed.
TraceFile read_trace(const std::filesystem::path& path);

/// Appends one step at a time. close() fails unless exactly header.n_steps were appended.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, TraceHeader header);
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;
  ~TraceWriter();

  void append(const divergence::PairedCapture& pair);
  void close();
  std::size_t steps_written() const noexcept { return written_; }

 private:
  std::filesystem::path path_;
  TraceHeader header_;
  std::ofstream out_;
  std::size_t written_ = 0;
  bool closed_ = false;
};

}  // namespace headsteer::trace
