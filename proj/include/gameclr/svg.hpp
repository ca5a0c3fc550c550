#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gameclr/dataio.hpp"
#include "gameclr/training.hpp"

namespace gameclr {

// Minimal hand-rolled SVG line chart of the per-epoch cosine diagnostics.
// Curves are <polyline> elements (one per present series), axes are <line>
// elements, so consumers can count curves structurally. Output bytes are a
// pure function of the inputs.
namespace svg_detail {

inline constexpr double kWidth = 640.0;
inline constexpr double kHeight = 420.0;
inline constexpr double kLeft = 60.0;
inline constexpr double kRight = 170.0;
inline constexpr double kTop = 30.0;
inline constexpr double kBottom = 50.0;

struct Series {
  std::string label;
  std::string color;
  bool dashed = false;
  std::vector<std::pair<double, double>> points;  // (epoch, value)
};

inline std::string fmt(double v) { return detail::format_double(v, 6); }

}  // namespace svg_detail

inline void write_svg_plot(const std::vector<std::pair<std::string, std::vector<TrainLogRecord>>>& logs,
                           const std::filesystem::path& out) {
  using svg_detail::Series;
  const char* colors[3] = {"#1f77b4", "#d62728", "#ff7f0e"};
  std::vector<Series> series;
  for (std::size_t li = 0; li < logs.size(); ++li) {
    const auto& [label, records] = logs[li];
    const std::string prefix = logs.size() > 1 ? label + " " : std::string{};
    Series pos{prefix + "cos_pos", colors[0], li > 0, {}};
    Series neg{prefix + "cos_neg_reg", colors[1], li > 0, {}};
    Series syn{prefix + "cos_neg_syn", colors[2], li > 0, {}};
    for (const TrainLogRecord& r : records) {
      pos.points.emplace_back(r.epoch, r.cos_pos);
      neg.points.emplace_back(r.epoch, r.cos_neg_reg);
      if (r.cos_neg_syn.has_value()) syn.points.emplace_back(r.epoch, *r.cos_neg_syn);
    }
    if (!pos.points.empty()) series.push_back(std::move(pos));
    if (!neg.points.empty()) series.push_back(std::move(neg));
    if (!syn.points.empty()) series.push_back(std::move(syn));
  }

  double x_lo = 1.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool have_data = false;
  for (const Series& s : series)
    for (const auto& [x, y] : s.points) {
      if (!have_data) {
        x_lo = x_hi = x;
        y_lo = y_hi = y;
        have_data = true;
      }
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  const double y_pad = std::max(0.02, (y_hi - y_lo) * 0.08);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double plot_w = svg_detail::kWidth - svg_detail::kLeft - svg_detail::kRight;
  const double plot_h = svg_detail::kHeight - svg_detail::kTop - svg_detail::kBottom;
  const auto sx = [&](double x) {
    return svg_detail::kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w;
  };
  const auto sy = [&](double y) {
    return svg_detail::kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;
  };

  std::string out_s;
  out_s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_detail::fmt(svg_detail::kWidth) +
           "\" height=\"" + svg_detail::fmt(svg_detail::kHeight) + "\" viewBox=\"0 0 " +
           svg_detail::fmt(svg_detail::kWidth) + " " + svg_detail::fmt(svg_detail::kHeight) + "\">\n";
  out_s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double ax_b = svg_detail::kTop + plot_h;
  const double ax_r = svg_detail::kLeft + plot_w;
  out_s += "<line x1=\"" + svg_detail::fmt(svg_detail::kLeft) + "\" y1=\"" + svg_detail::fmt(ax_b) +
           "\" x2=\"" + svg_detail::fmt(ax_r) + "\" y2=\"" + svg_detail::fmt(ax_b) +
           "\" stroke=\"black\"/>\n";
  out_s += "<line x1=\"" + svg_detail::fmt(svg_detail::kLeft) + "\" y1=\"" +
           svg_detail::fmt(svg_detail::kTop) + "\" x2=\"" + svg_detail::fmt(svg_detail::kLeft) +
           "\" y2=\"" + svg_detail::fmt(ax_b) + "\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double yv = y_lo + (y_hi - y_lo) * k / 4.0;
    const double py = sy(yv);
    out_s += "<line x1=\"" + svg_detail::fmt(svg_detail::kLeft - 4) + "\" y1=\"" +
             svg_detail::fmt(py) + "\" x2=\"" + svg_detail::fmt(svg_detail::kLeft) + "\" y2=\"" +
             svg_detail::fmt(py) + "\" stroke=\"black\"/>\n";
    out_s += "<text x=\"" + svg_detail::fmt(svg_detail::kLeft - 8) + "\" y=\"" +
             svg_detail::fmt(py + 4) + "\" font-size=\"11\" text-anchor=\"end\">" +
             detail::format_double(yv, 3) + "</text>\n";
  }
  const int x_span = static_cast<int>(std::lround(x_hi - x_lo));
  const int x_step = std::max(1, (x_span + 9) / 10);
  for (int e = static_cast<int>(std::lround(x_lo)); e <= static_cast<int>(std::lround(x_hi));
       e += x_step) {
    const double px = sx(e);
    out_s += "<line x1=\"" + svg_detail::fmt(px) + "\" y1=\"" + svg_detail::fmt(ax_b) + "\" x2=\"" +
             svg_detail::fmt(px) + "\" y2=\"" + svg_detail::fmt(ax_b + 4) + "\" stroke=\"black\"/>\n";
    out_s += "<text x=\"" + svg_detail::fmt(px) + "\" y=\"" + svg_detail::fmt(ax_b + 18) +
             "\" font-size=\"11\" text-anchor=\"middle\">" + std::to_string(e) + "</text>\n";
  }
  out_s += "<text x=\"" + svg_detail::fmt(svg_detail::kLeft + plot_w / 2) + "\" y=\"" +
           svg_detail::fmt(svg_detail::kHeight - 12) +
           "\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
  out_s += "<text x=\"16\" y=\"" + svg_detail::fmt(svg_detail::kTop + plot_h / 2) +
           "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           svg_detail::fmt(svg_detail::kTop + plot_h / 2) + ")\">mean cosine similarity</text>\n";

  if (!have_data) {
    out_s += "<text x=\"" + svg_detail::fmt(svg_detail::kLeft + plot_w / 2) + "\" y=\"" +
             svg_detail::fmt(svg_detail::kTop + plot_h / 2) +
             "\" font-size=\"14\" text-anchor=\"middle\">no data</text>\n";
  }

  for (const Series& s : series) {
    out_s += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"";
    if (s.dashed) out_s += " stroke-dasharray=\"5 3\"";
    out_s += " points=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (i > 0) out_s += ' ';
      out_s += svg_detail::fmt(sx(s.points[i].first)) + "," + svg_detail::fmt(sy(s.points[i].second));
    }
    out_s += "\"/>\n";
  }

  double ly = svg_detail::kTop + 10;
  const double lx = svg_detail::kLeft + plot_w + 14;
  for (const Series& s : series) {
    out_s += "<line x1=\"" + svg_detail::fmt(lx) + "\" y1=\"" + svg_detail::fmt(ly - 4) +
             "\" x2=\"" + svg_detail::fmt(lx + 22) + "\" y2=\"" + svg_detail::fmt(ly - 4) +
             "\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" +
             (s.dashed ? std::string(" stroke-dasharray=\"5 3\"") : std::string()) + "/>\n";
    out_s += "<text x=\"" + svg_detail::fmt(lx + 27) + "\" y=\"" + svg_detail::fmt(ly) +
             "\" font-size=\"11\">" + s.label + "</text>\n";
    ly += 18;
  }

  out_s += "</svg>\n";
  if (out.has_parent_path()) detail::ensure_dir(out.parent_path());
  detail::write_file(out, out_s);
}

}  // namespace gameclr
