// SPDX-License-Identifier: Apache-2.0
#include "headsteer/trace/analyze.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include <png.h>

#include "headsteer/error.hpp"
#include "headsteer/reinforce/vhr.hpp"

namespace headsteer::trace {
namespace {

nlohmann::json grid(const divergence::HeadTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t l = 0; l < t.n_layers(); ++l) {
    const auto r = t.row(l);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

constexpr std::size_t kCell = 12;

// Linear ramp between two endpoint colors; v in [0, 1].
void color(double v, png_byte* rgb) {
  static constexpr double lo[3] = {20, 24, 82};
  static constexpr double hi[3] = {250, 220, 40};
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<png_byte>(lo[c] + v * (hi[c] - lo[c]) + 0.5);
}

void write_png(const std::filesystem::path& path, const divergence::HeadTable& t) {
  const std::size_t width = t.n_heads() * kCell;
  const std::size_t height = t.n_layers() * kCell;
  double top = 0.0;
  for (double v : t.values()) top = std::max(top, v);

  std::vector<png_byte> pixels(width * height * 3);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double v = top > 0.0 ? t(y / kCell, x / kCell) / top : 0.0;
      color(v, &pixels[(y * width + x) * 3]);
    }
  }

  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    throw IoError("libpng initialization failed");
  }
  // libpng reports errors by longjmp; no object with a destructor is created below.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) png_write_row(png, &pixels[y * width * 3]);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("close failed for " + path.string());
}

}  // namespace

TraceReport analyze_pairs(std::span<const divergence::PairedCapture> pairs, std::size_t k) {
  if (pairs.empty()) throw InvalidArgument("analyze: no steps");
  const std::size_t H = pairs.front().with_image.n_heads();
  if (k == 0 || k > H) {
    throw InvalidArgument("analyze: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(H) + "]");
  }
  TraceReport report{k, {}};
  report.steps.reserve(pairs.size());
  for (const auto& pair : pairs) {
    StepAnalysis s;
    s.step = pair.step;
    s.vhd = divergence::vhd_scores(pair);
    s.ta = divergence::text_activation(pair.text_only);
    const std::size_t L = s.vhd.scores.n_layers();
    s.zeroed = divergence::HeadTable(L, s.vhd.scores.n_heads());
    for (std::size_t l = 0; l < L; ++l) {
      const auto z = divergence::zero_outliers(s.vhd.scores.row(l), s.ta.values.row(l));
      std::copy(z.begin(), z.end(), s.zeroed.row(l).begin());
      s.selected[l] = reinforce::select_heads(z);
    }
    s.tvhd = divergence::t_vhd(s.vhd, k);
    report.steps.push_back(std::move(s));
  }
  return report;
}

TraceReport analyze_trace(const TraceFile& trace, std::size_t k) {
  const auto pairs = trace.to_pairs();
  return analyze_pairs(pairs, k);
}

nlohmann::json to_json(const TraceReport& report) {
  nlohmann::json steps = nlohmann::json::array();
  std::vector<double> series;
  for (const auto& s : report.steps) {
    nlohmann::json selected = nlohmann::json::object();
    for (const auto& [l, heads] : s.selected) selected[std::to_string(l)] = heads;
    steps.push_back({{"step", s.step},
                     {"layers", grid(s.vhd.scores)},
                     {"ta", grid(s.ta.values)},
                     {"zeroed", grid(s.zeroed)},
                     {"selected", selected},
                     {"tvhd", s.tvhd}});
    series.push_back(s.tvhd);
  }
  return {{"k", report.k}, {"tvhd", series}, {"steps", steps}};
}

std::vector<std::filesystem::path> write_heatmaps(const TraceReport& report,
                                                  const std::filesystem::path& dir,
                                                  const std::string& prefix) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> out;
  for (const auto& s : report.steps) {
    char name[64];
    std::snprintf(name, sizeof name, "_%04zu.png", s.step);
    const auto path = dir / (prefix + name);
    write_png(path, s.vhd.scores);
    out.push_back(path);
  }
  return out;
}

}  // namespace headsteer::trace
