// SPDX-License-Identifier: Apache-2.0
#include "headsteer/trace/trace.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include <json.hpp>

#include "headsteer/error.hpp"

namespace headsteer::trace {
namespace {

static_assert(std::endian::native == std::endian::little, "VHDT I/O assumes a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

constexpr std::size_t kPreamble = 12;

std::string header_json(const TraceHeader& h) {
  nlohmann::json j = {{"format_version", h.format_version},
                      {"n_layers", h.n_layers},
                      {"n_heads", h.n_heads},
                      {"d_head", h.d_head},
                      {"n_steps", h.n_steps},
                      {"paired", h.paired},
                      {"metadata", h.metadata}};
  return j.dump();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

/// Locates a payload float index within the record structure.
std::string describe_index(const TraceHeader& h, std::size_t index) {
  const std::size_t comp = index % h.d_head;
  std::size_t rest = index / h.d_head;
  const std::size_t head = rest % h.n_heads;
  rest /= h.n_heads;
  const std::size_t stream = rest % 2;
  rest /= 2;
  const std::size_t layer = rest % h.n_layers;
  const std::size_t step = rest / h.n_layers;
  return "step " + std::to_string(step) + ", layer " + std::to_string(layer) + ", stream " +
         (stream == 0 ? "with_image" : "text_only") + ", head " + std::to_string(head) +
         ", component " + std::to_string(comp);
}

void check_pair_shape(const TraceHeader& h, const divergence::PairedCapture& p) {
  p.validate();
  const auto& c = p.with_image;
  if (c.n_layers() != h.n_layers || c.n_heads() != h.n_heads || c.d_head() != h.d_head) {
    throw InvalidArgument("trace: capture shape (" + std::to_string(c.n_layers()) + ", " +
                          std::to_string(c.n_heads()) + ", " + std::to_string(c.d_head()) +
                          ") does not match header");
  }
}

void append_pair(const TraceHeader& h, const divergence::PairedCapture& p, std::vector<float>& out) {
  for (std::size_t l = 0; l < h.n_layers; ++l) {
    for (const auto* cap : {&p.with_image, &p.text_only}) {
      for (std::size_t hd = 0; hd < h.n_heads; ++hd) {
        for (double v : cap->head(l, hd)) {
          const float f = static_cast<float>(v);
          if (!std::isfinite(f)) throw InvalidArgument("trace: capture value overflows f32");
          out.push_back(f);
        }
      }
    }
  }
}

}  // namespace

void TraceHeader::validate() const {
  if (format_version != kTraceVersion) {
    throw InvalidArgument("trace: unsupported format version " + std::to_string(format_version));
  }
  if (n_layers == 0 || n_heads == 0 || d_head == 0 || n_steps == 0) {
    throw InvalidArgument("trace: dimensions must be positive");
  }
  if (!paired) throw InvalidArgument("trace: version 1 traces are always paired");
}

TraceFile::TraceFile(TraceHeader header, std::vector<float> payload)
    : header_(std::move(header)), payload_(std::move(payload)) {
  header_.validate();
  const std::size_t expected = header_.n_steps * header_.floats_per_step();
  if (payload_.size() != expected) {
    throw InvalidArgument("trace: payload has " + std::to_string(payload_.size()) +
                          " floats, header implies " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < payload_.size(); ++i) {
    if (!std::isfinite(payload_[i])) {
      throw InvalidArgument("trace: non-finite value at " + describe_index(header_, i));
    }
  }
}

TraceFile TraceFile::from_pairs(TraceHeader header,
                                std::span<const divergence::PairedCapture> pairs) {
  header.validate();
  if (pairs.size() != header.n_steps) {
    throw InvalidArgument("trace: header declares " + std::to_string(header.n_steps) +
                          " steps, " + std::to_string(pairs.size()) + " provided");
  }
  std::vector<float> payload;
  payload.reserve(header.n_steps * header.floats_per_step());
  for (const auto& p : pairs) {
    check_pair_shape(header, p);
    append_pair(header, p, payload);
  }
  return TraceFile(std::move(header), std::move(payload));
}

std::span<const float> TraceFile::head(std::size_t step, std::size_t layer, std::size_t stream,
                                       std::size_t head) const {
  const auto& h = header_;
  if (step >= h.n_steps || layer >= h.n_layers || stream > 1 || head >= h.n_heads) {
    throw InvalidArgument("TraceFile::head: index out of range");
  }
  const std::size_t at =
      (((step * h.n_layers + layer) * 2 + stream) * h.n_heads + head) * h.d_head;
  return {payload_.data() + at, h.d_head};
}

std::vector<divergence::PairedCapture> TraceFile::to_pairs() const {
  const auto& h = header_;
  std::vector<divergence::PairedCapture> out;
  out.reserve(h.n_steps);
  for (std::size_t s = 0; s < h.n_steps; ++s) {
    std::vector<double> wi, to;
    wi.reserve(h.n_layers * h.n_heads * h.d_head);
    to.reserve(wi.capacity());
    for (std::size_t l = 0; l < h.n_layers; ++l) {
      for (std::size_t hd = 0; hd < h.n_heads; ++hd) {
        for (float v : head(s, l, 0, hd)) wi.push_back(v);
      }
      for (std::size_t hd = 0; hd < h.n_heads; ++hd) {
        for (float v : head(s, l, 1, hd)) to.push_back(v);
      }
    }
    out.push_back({model::ForwardCapture(model::Stream::with_image, h.n_layers, h.n_heads,
                                         h.d_head, std::move(wi)),
                   model::ForwardCapture(model::Stream::text_only, h.n_layers, h.n_heads,
                                         h.d_head, std::move(to)),
                   s});
  }
  return out;
}

std::vector<std::uint8_t> encode_trace(const TraceFile& trace) {
  const std::string json = header_json(trace.header());
  std::vector<std::uint8_t> out;
  out.reserve(kPreamble + json.size() + trace.payload().size() * 4);
  out.insert(out.end(), kTraceMagic, kTraceMagic + 4);
  put_u32(out, trace.header().format_version);
  put_u32(out, static_cast<std::uint32_t>(json.size()));
  out.insert(out.end(), json.begin(), json.end());
  const auto* p = reinterpret_cast<const std::uint8_t*>(trace.payload().data());
  out.insert(out.end(), p, p + trace.payload().size() * 4);
  return out;
}

TraceFile decode_trace(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw ParseError("truncated preamble: expected at least 12 bytes, got " +
                         std::to_string(bytes.size()),
                     bytes.size());
  }
  if (std::memcmp(bytes.data(), kTraceMagic, 4) != 0) throw ParseError("bad magic at offset 0", 0);
  if (bytes.size() < kPreamble) {
    throw ParseError("truncated preamble: expected at least 12 bytes, got " +
                         std::to_string(bytes.size()),
                     bytes.size());
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kTraceVersion) {
    throw ParseError("unsupported version " + std::to_string(version) + " at offset 4", 4);
  }
  const std::uint32_t json_len = get_u32(bytes, 8);
  if (bytes.size() - kPreamble < json_len) {
    throw ParseError("truncated header at offset 12: expected " + std::to_string(json_len) +
                         " header bytes, got " + std::to_string(bytes.size() - kPreamble),
                     bytes.size());
  }

  TraceHeader h;
  try {
    const auto j = nlohmann::json::parse(bytes.begin() + kPreamble,
                                         bytes.begin() + kPreamble + json_len);
    h.format_version = j.at("format_version").get<std::uint32_t>();
    h.n_layers = j.at("n_layers").get<std::size_t>();
    h.n_heads = j.at("n_heads").get<std::size_t>();
    h.d_head = j.at("d_head").get<std::size_t>();
    h.n_steps = j.at("n_steps").get<std::size_t>();
    h.paired = j.at("paired").get<bool>();
    if (j.contains("metadata")) h.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed JSON header at offset 12: ") + e.what(), kPreamble);
  }
  if (h.format_version != version) {
    throw ParseError("header format_version disagrees with preamble at offset 12", kPreamble);
  }
  try {
    h.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid header at offset 12: ") + e.what(), kPreamble);
  }

  const std::size_t payload_at = kPreamble + json_len;
  std::size_t n_floats = h.n_steps;
  bool overflow = false;
  for (std::size_t f : {h.n_layers, std::size_t{2}, h.n_heads, h.d_head}) {
    overflow = overflow || __builtin_mul_overflow(n_floats, f, &n_floats);
  }
  std::size_t expected_bytes = 0;
  overflow = overflow || __builtin_mul_overflow(n_floats, std::size_t{4}, &expected_bytes);
  const std::size_t actual_bytes = bytes.size() - payload_at;
  if (overflow || expected_bytes != actual_bytes) {
    const std::string expected = overflow ? std::string("more than 2^64") : std::to_string(expected_bytes);
    throw ParseError("payload size mismatch at offset " + std::to_string(payload_at) +
                         ": expected " + expected + " bytes, got " + std::to_string(actual_bytes),
                     payload_at);
  }

  std::vector<float> payload(n_floats);
  std::memcpy(payload.data(), bytes.data() + payload_at, expected_bytes);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (!std::isfinite(payload[i])) {
      const std::size_t off = payload_at + 4 * i;
      throw ParseError("non-finite value at offset " + std::to_string(off) + " (" +
                           describe_index(h, i) + ")",
                       off);
    }
  }
  return TraceFile(std::move(h), std::move(payload));
}

void write_trace(const std::filesystem::path& path, const TraceFile& trace) {
  const auto bytes = encode_trace(trace);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_trace(const std::filesystem::path& path, const TraceHeader& header,
                 std::span<const divergence::PairedCapture> pairs) {
  write_trace(path, TraceFile::from_pairs(header, pairs));
}

TraceFile read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return decode_trace(bytes);
}

TraceWriter::TraceWriter(const std::filesystem::path& path, TraceHeader header)
    : path_(path), header_(std::move(header)) {
  header_.validate();
  out_.open(path_, std::ios::binary);
  if (!out_) throw IoError("cannot open " + path_.string() + " for writing");
  const std::string json = header_json(header_);
  std::vector<std::uint8_t> pre(kTraceMagic, kTraceMagic + 4);
  put_u32(pre, header_.format_version);
  put_u32(pre, static_cast<std::uint32_t>(json.size()));
  out_.write(reinterpret_cast<const char*>(pre.data()), static_cast<std::streamsize>(pre.size()));
  out_.write(json.data(), static_cast<std::streamsize>(json.size()));
}

TraceWriter::~TraceWriter() {
  if (!closed_) out_.close();
}

void TraceWriter::append(const divergence::PairedCapture& pair) {
  if (closed_) throw InvalidArgument("TraceWriter: append after close");
  if (written_ == header_.n_steps) {
    throw InvalidArgument("TraceWriter: header declares " + std::to_string(header_.n_steps) +
                          " steps");
  }
  check_pair_shape(header_, pair);
  std::vector<float> record;
  record.reserve(header_.floats_per_step());
  append_pair(header_, pair, record);
  out_.write(reinterpret_cast<const char*>(record.data()),
             static_cast<std::streamsize>(record.size() * 4));
  if (!out_) throw IoError("write failed for " + path_.string());
  ++written_;
}

void TraceWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.close();
  if (!out_) throw IoError("close failed for " + path_.string());
  if (written_ != header_.n_steps) {
    throw InvalidArgument("TraceWriter: " + std::to_string(written_) + " of " +
                          std::to_string(header_.n_steps) + " declared steps written");
  }
}

}  // namespace headsteer::trace
