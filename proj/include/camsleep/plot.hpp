#pragma once

// Standalone SVG figures: policy traces, ŵ tradeoff curves, histograms and
// grouped bar charts.

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "camsleep/common.hpp"
#include "camsleep/csv.hpp"
#include "camsleep/env.hpp"
#include "camsleep/eval.hpp"

namespace camsleep::plot {

inline constexpr double kWidth = 800;
inline constexpr double kHeight = 400;
inline constexpr double kLeft = 60;
inline constexpr double kRight = 20;
inline constexpr double kTop = 30;
inline constexpr double kBottom = 50;

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Tick label without trailing zeros ("100", "0.25").
inline std::string tick(double v) {
  std::string s = fmt(v);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Plot frame mapping data coordinates onto the drawing area.
struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

class Svg {
 public:
  explicit Svg(std::string_view title) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n";
  }

  void raw(const std::string& s) { os_ << s << '\n'; }

  void axes(const Frame& f, std::string_view xlabel, std::string_view ylabel, int yticks = 5) {
    os_ << "<g class=\"axes\" stroke=\"black\">\n"
        << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(f.py(f.y0)) << "\" x2=\"" << fmt(kWidth - kRight)
        << "\" y2=\"" << fmt(f.py(f.y0)) << "\"/>\n"
        << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(f.py(f.y0)) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
        << fmt(f.py(f.y1)) << "\"/>\n</g>\n";
    for (int i = 0; i <= yticks; ++i) {
      const double y = f.y0 + (f.y1 - f.y0) * i / yticks;
      os_ << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(f.py(y) + 4) << "\" text-anchor=\"end\">"
          << tick(y) << "</text>\n";
    }
    os_ << "<text class=\"xlabel\" x=\"" << fmt((kLeft + kWidth - kRight) / 2) << "\" y=\"" << fmt(kHeight - 10)
        << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
        << "<text class=\"ylabel\" x=\"14\" y=\"" << fmt(kHeight / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << fmt(kHeight / 2) << ")\">" << escape(ylabel) << "</text>\n";
  }

  std::string str() const { return os_.str() + "</svg>\n"; }

 private:
  std::ostringstream os_;
};

/// Occupancy line with shaded bands where the camera was On.
inline std::string policy_trace(const std::vector<TraceRow>& rows, double high_threshold = 0.8) {
  if (rows.empty()) throw Error("policy-trace: no rows");
  const Frame f{0.0, static_cast<double>(rows.size()), 0.0, 1.0};
  Svg svg("Camera actions and occupancy from " + format_timestamp(rows.front().timestamp));
  for (std::size_t i = 0; i < rows.size();) {
    if (rows[i].action != Action::TurnOn) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < rows.size() && rows[j].action == Action::TurnOn) ++j;
    svg.raw("<rect class=\"on\" x=\"" + fmt(f.px(static_cast<double>(i))) + "\" y=\"" + fmt(f.py(1.0)) +
            "\" width=\"" + fmt(f.px(static_cast<double>(j)) - f.px(static_cast<double>(i))) + "\" height=\"" +
            fmt(f.py(0.0) - f.py(1.0)) + "\" fill=\"#ffd27f\" stroke=\"none\"/>");
    i = j;
  }
  std::string pts;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pts += fmt(f.px(static_cast<double>(i) + 0.5)) + ',' + fmt(f.py(rows[i].true_occupancy)) + ' ';
  }
  svg.raw("<polyline class=\"occupancy\" fill=\"none\" stroke=\"#1f77b4\" points=\"" + pts + "\"/>");
  svg.raw("<line class=\"threshold\" x1=\"" + fmt(f.px(f.x0)) + "\" y1=\"" + fmt(f.py(high_threshold)) + "\" x2=\"" +
          fmt(f.px(f.x1)) + "\" y2=\"" + fmt(f.py(high_threshold)) + "\" stroke=\"red\" stroke-dasharray=\"4 3\"/>");
  svg.axes(f, "minutes", "occupancy (shaded: camera on)");
  return svg.str();
}

/// Accuracy and savings against ŵ / max ŵ.
inline std::string tradeoff_curve(const std::vector<SweepPoint>& points) {
  if (points.empty()) throw Error("tradeoff-curve: no points");
  auto sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.w_hat_scaled < b.w_hat_scaled; });
  const Frame f{0.0, 1.0, 0.0, 100.0};
  Svg svg("Accuracy and energy savings against normalized miss penalty");
  const auto series = [&](const char* cls, const char* color, double SweepPoint::*field) {
    std::string pts;
    for (const auto& p : sorted) pts += fmt(f.px(p.w_hat_scaled)) + ',' + fmt(f.py(p.*field)) + ' ';
    svg.raw(std::string("<polyline class=\"") + cls + "\" fill=\"none\" stroke=\"" + color + "\" points=\"" + pts +
            "\"/>");
    for (const auto& p : sorted) {
      svg.raw(std::string("<circle class=\"marker ") + cls + "\" cx=\"" + fmt(f.px(p.w_hat_scaled)) + "\" cy=\"" +
              fmt(f.py(p.*field)) + "\" r=\"4\" fill=\"" + color + "\"/>");
    }
  };
  series("accuracy", "#1f77b4", &SweepPoint::accuracy_pct);
  series("savings", "#2ca02c", &SweepPoint::savings_pct);
  svg.raw("<text x=\"" + fmt(kWidth - 160) + "\" y=\"40\" fill=\"#1f77b4\">accuracy (%)</text>");
  svg.raw("<text x=\"" + fmt(kWidth - 160) + "\" y=\"56\" fill=\"#2ca02c\">energy savings (%)</text>");
  svg.axes(f, "w_hat / max w_hat", "percent (%)");
  return svg.str();
}

/// One bar per bin; bars carry their bin index in `data-bin`.
inline std::string histogram(const std::string& title, const std::vector<double>& weights) {
  if (weights.empty()) throw Error("histogram: no bins");
  const double top = std::max(1.0, *std::max_element(weights.begin(), weights.end()));
  const Frame f{0.0, static_cast<double>(weights.size()), 0.0, top};
  Svg svg(title);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double x = f.px(static_cast<double>(i) + 0.1);
    const double w = f.px(static_cast<double>(i) + 0.9) - x;
    svg.raw("<rect class=\"bar\" data-bin=\"" + std::to_string(i) + "\" x=\"" + fmt(x) + "\" y=\"" +
            fmt(f.py(weights[i])) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(f.py(0) - f.py(weights[i])) +
            "\" fill=\"#1f77b4\"/>");
    svg.raw("<text x=\"" + fmt(x + w / 2) + "\" y=\"" + fmt(f.py(0) + 14) + "\" text-anchor=\"middle\">" +
            std::to_string(i) + "</text>");
  }
  svg.axes(f, "bin", "normalized high-occupancy count");
  return svg.str();
}

/// Grouped bars of average accuracy and savings per policy.
inline std::string bar_chart(const std::vector<std::pair<std::string, std::pair<double, double>>>& groups) {
  if (groups.empty()) throw Error("bar: no groups");
  const Frame f{0.0, static_cast<double>(groups.size()), 0.0, 100.0};
  Svg svg("Average accuracy and energy savings per policy");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& [name, vals] = groups[i];
    const double base = static_cast<double>(i);
    const auto bar = [&](double lo, double v, const char* cls, const char* color) {
      const double x = f.px(base + lo);
      svg.raw(std::string("<rect class=\"") + cls + "\" x=\"" + fmt(x) + "\" y=\"" + fmt(f.py(v)) + "\" width=\"" +
              fmt(f.px(base + lo + 0.35) - x) + "\" height=\"" + fmt(f.py(0) - f.py(v)) + "\" fill=\"" + color +
              "\"/>");
    };
    bar(0.15, vals.first, "accuracy", "#1f77b4");
    bar(0.5, vals.second, "savings", "#2ca02c");
    svg.raw("<text x=\"" + fmt(f.px(base + 0.5)) + "\" y=\"" + fmt(f.py(0) + 14) + "\" text-anchor=\"middle\">" +
            escape(name) + "</text>");
  }
  svg.axes(f, "policy (blue: accuracy, green: savings)", "percent (%)");
  return svg.str();
}

// ---------------------------------------------------------------------------
// CSV inputs

inline constexpr const char* kHistogramHeader = "label,bin,value";

/// Reads `label,bin,value` rows, returning bins per label in file order.
inline std::vector<std::pair<std::string, std::vector<double>>> read_histogram_csv(std::istream& in,
                                                                                    const std::string& source) {
  csv::expect_header(in, kHistogramHeader, source);
  std::vector<std::pair<std::string, std::vector<double>>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 3) throw Error(source + ": histogram row needs 3 fields");
    const std::string label(f[0]);
    if (out.empty() || out.back().first != label) out.push_back({label, {}});
    const auto bin = static_cast<std::size_t>(csv::parse_int(f[1]));
    auto& bins = out.back().second;
    if (bins.size() <= bin) bins.resize(bin + 1, 0.0);
    bins[bin] = csv::parse_double(f[2]);
  }
  return out;
}

inline std::vector<SweepPoint> read_sweep_csv(std::istream& in, const std::string& source) {
  csv::expect_header(in, kSweepHeader, source);
  std::vector<SweepPoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw Error(source + ": sweep row needs 5 fields");
    out.push_back({csv::parse_double(f[0]), csv::parse_double(f[1]), csv::parse_double(f[2]), csv::parse_double(f[3]),
                   csv::parse_double(f[4])});
  }
  return out;
}

/// Policy averages from an aggregate CSV.
inline std::vector<std::pair<std::string, std::pair<double, double>>> read_aggregate_csv(std::istream& in,
                                                                                        const std::string& source) {
  csv::expect_header(in, kAggregateHeader, source);
  std::vector<std::pair<std::string, std::pair<double, double>>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 10) throw Error(source + ": aggregate row needs 10 fields");
    out.push_back({std::string(f[0]), {csv::parse_double(f[2]), csv::parse_double(f[6])}});
  }
  return out;
}

}  // namespace camsleep::plot
