#pragma once

// Minimal static SVG charts. Output depends only on the inputs, so reports
// regenerate byte-identically.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "phyloload/text.hpp"

namespace phyloload::svg {

namespace detail {

constexpr double kWidth = 480, kHeight = 320;
constexpr double kLeft = 56, kRight = 16, kTop = 32, kBottom = 44;

inline std::string num(double v) { return text::format_fixed(v, 2); }

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo, hi;
};

inline Range padded_range(const std::vector<double>& v) {
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double a = *lo, b = *hi;
  if (a == b) {
    a -= 0.5;
    b += 0.5;
  }
  const double pad = 0.05 * (b - a);
  return {a - pad, b + pad};
}

inline std::string header(const std::string& title) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + ' ' + num(kHeight) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kWidth / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" + escape(title) +
         "</text>\n";
  return out;
}

inline std::string axes(Range xr, Range yr, const std::string& xlabel, const std::string& ylabel) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::string out = "<g stroke=\"black\" fill=\"none\">\n";
  out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) + "\"/>\n";
  out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) + "\"/>\n";
  out += "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double px = x0 + f * (x1 - x0);
    const double py = y0 - f * (y0 - y1);
    out += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 14) + "\" text-anchor=\"middle\">" +
           text::format_fixed(xr.lo + f * (xr.hi - xr.lo), 3) + "</text>\n";
    out += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" +
           text::format_fixed(yr.lo + f * (yr.hi - yr.lo), 3) + "</text>\n";
  }
  out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 8) + "\" text-anchor=\"middle\">" +
         escape(xlabel) + "</text>\n";
  out += "<text x=\"12\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 12 " +
         num((y0 + y1) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  return out;
}

}  // namespace detail

inline std::string histogram(const std::vector<double>& values, const std::string& title, const std::string& xlabel,
                             int bins = 20) {
  using namespace detail;
  std::string out = header(title);
  if (values.empty()) return out + "</svg>\n";
  const Range xr = padded_range(values);
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = static_cast<int>((v - xr.lo) / (xr.hi - xr.lo) * bins);
    counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  const int peak = *std::max_element(counts.begin(), counts.end());
  const Range yr{0.0, static_cast<double>(peak)};
  out += axes(xr, yr, xlabel, "trees");
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double bw = (x1 - x0) / bins;
  out += "<g fill=\"steelblue\" stroke=\"white\">\n";
  for (int b = 0; b < bins; ++b) {
    const double h = peak ? (y0 - y1) * counts[static_cast<std::size_t>(b)] / peak : 0.0;
    out += "<rect x=\"" + num(x0 + b * bw) + "\" y=\"" + num(y0 - h) + "\" width=\"" + num(bw) + "\" height=\"" +
           num(h) + "\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

inline std::string scatter(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& title,
                           const std::string& xlabel, const std::string& ylabel) {
  using namespace detail;
  std::string out = header(title);
  if (xs.empty()) return out + "</svg>\n";
  const Range xr = padded_range(xs), yr = padded_range(ys);
  out += axes(xr, yr, xlabel, ylabel);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  out += "<g fill=\"steelblue\" fill-opacity=\"0.7\">\n";
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    const double px = x0 + (xs[i] - xr.lo) / (xr.hi - xr.lo) * (x1 - x0);
    const double py = y0 - (ys[i] - yr.lo) / (yr.hi - yr.lo) * (y0 - y1);
    out += "<circle cx=\"" + num(px) + "\" cy=\"" + num(py) + "\" r=\"3\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace phyloload::svg
