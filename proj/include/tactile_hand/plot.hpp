#ifndef TACTILE_HAND_PLOT_HPP_
#define TACTILE_HAND_PLOT_HPP_

// Episode-log reader and static SVG line plots. Output depends only on the
// input values (fixed number formatting, no timestamps), so the same log
// always gives the same bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tactile_hand/env.hpp"

namespace tactile_hand {

// Episode index -> steps, in file order.
using EpisodeTable = std::map<int, std::vector<EpisodeStep>>;

inline EpisodeTable read_episode_log(std::istream& in) {
  EpisodeTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  std::ostringstream expected;
  write_episode_header(expected);
  std::string header = expected.str();
  header.pop_back();
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ConfigError("episode log: unexpected header");
  constexpr int kCols = 7 + 9 + 2 * kNumActive + 6;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str()) {
        throw ConfigError("episode log line " + std::to_string(line_no) +
                          ": bad number '" + tok + "'");
      }
      v.push_back(x);
    }
    if (static_cast<int>(v.size()) != kCols) {
      throw ConfigError("episode log line " + std::to_string(line_no) +
                        ": expected " + std::to_string(kCols) + " columns");
    }
    EpisodeStep s;
    int k = 1;
    s.t = v[k++];
    s.reward = v[k++];
    s.p_err_lower = v[k++];
    s.p_err_upper = v[k++];
    s.q_err = v[k++];
    s.total_force = v[k++];
    for (double& c : s.centers) c = v[k++];
    for (double& a : s.action) a = v[k++];
    for (double& q : s.q) q = v[k++];
    for (int i = 0; i < 3; ++i) s.p2_desired[i] = v[k++];
    for (int i = 0; i < 3; ++i) s.p2_actual[i] = v[k++];
    table[static_cast<int>(v[0])].push_back(s);
  }
  return table;
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;  // NaN entries break the line
};

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  bool valid() const { return x0 <= x1 && y0 <= y1; }
  void add(double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
};

inline Bounds bounds_of(const std::vector<Series>& series) {
  Bounds b;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) b.add(s.x[i], s.y[i]);
  }
  return b;
}

struct Panel {
  std::string title;
  std::string x_label, y_label;
  std::vector<Series> series;
  bool equal_aspect = false;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline void draw_panel(std::ostringstream& o, const Panel& p, double left,
                       double top, double w, double h) {
  const double ml = 60, mr = 15, mt = 25, mb = 40;
  const double px = left + ml, py = top + mt;
  const double pw = w - ml - mr, ph = h - mt - mb;
  o << "<rect x=\"" << fmt(px) << "\" y=\"" << fmt(py) << "\" width=\""
    << fmt(pw) << "\" height=\"" << fmt(ph)
    << "\" fill=\"none\" stroke=\"#000\"/>\n";
  o << "<text x=\"" << fmt(px + pw / 2) << "\" y=\"" << fmt(top + 16)
    << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(p.title)
    << "</text>\n";
  o << "<text x=\"" << fmt(px + pw / 2) << "\" y=\"" << fmt(top + h - 6)
    << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(p.x_label)
    << "</text>\n";
  o << "<text x=\"" << fmt(left + 12) << "\" y=\"" << fmt(py + ph / 2)
    << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 "
    << fmt(left + 12) << ' ' << fmt(py + ph / 2) << ")\">"
    << escape(p.y_label) << "</text>\n";

  Bounds b = bounds_of(p.series);
  if (!b.valid()) {
    o << "<text x=\"" << fmt(px + pw / 2) << "\" y=\"" << fmt(py + ph / 2)
      << "\" text-anchor=\"middle\" font-size=\"12\" fill=\"#a00\">"
         "warning: no data</text>\n";
    return;
  }
  if (b.x1 - b.x0 < 1e-12) {
    b.x0 -= 0.5;
    b.x1 += 0.5;
  }
  if (b.y1 - b.y0 < 1e-12) {
    b.y0 -= 0.5;
    b.y1 += 0.5;
  }
  double sx = pw / (b.x1 - b.x0), sy = ph / (b.y1 - b.y0);
  double ox = px, oy = py;
  if (p.equal_aspect) {
    const double s = std::min(sx, sy);
    ox += 0.5 * (pw - s * (b.x1 - b.x0));
    oy += 0.5 * (ph - s * (b.y1 - b.y0));
    sx = sy = s;
  }
  auto X = [&](double x) { return ox + (x - b.x0) * sx; };
  auto Y = [&](double y) { return oy + (b.y1 - y) * sy; };

  // Tick labels at the data extremes.
  o << "<text x=\"" << fmt(X(b.x0)) << "\" y=\"" << fmt(py + ph + 14)
    << "\" font-size=\"10\">" << fmt_tick(b.x0) << "</text>\n";
  o << "<text x=\"" << fmt(X(b.x1)) << "\" y=\"" << fmt(py + ph + 14)
    << "\" font-size=\"10\" text-anchor=\"end\">" << fmt_tick(b.x1)
    << "</text>\n";
  o << "<text x=\"" << fmt(px - 4) << "\" y=\"" << fmt(Y(b.y0))
    << "\" font-size=\"10\" text-anchor=\"end\">" << fmt_tick(b.y0)
    << "</text>\n";
  o << "<text x=\"" << fmt(px - 4) << "\" y=\"" << fmt(Y(b.y1) + 8)
    << "\" font-size=\"10\" text-anchor=\"end\">" << fmt_tick(b.y1)
    << "</text>\n";

  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const Series& s = p.series[k];
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        pen = false;
        continue;
      }
      path += (pen ? " L" : " M") + fmt(X(s.x[i])) + ' ' + fmt(Y(s.y[i]));
      pen = true;
    }
    if (!path.empty()) {
      o << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\""
        << s.color << "\" stroke-width=\"1.2\"/>\n";
    }
    o << "<text x=\"" << fmt(px + pw - 4) << "\" y=\""
      << fmt(py + 12 + 12 * static_cast<double>(k))
      << "\" font-size=\"10\" text-anchor=\"end\" fill=\"" << s.color << "\">"
      << escape(s.label) << "</text>\n";
  }
}

}  // namespace detail

// Panels laid out in a grid with `cols` columns.
inline std::string render_svg(const std::vector<Panel>& panels, int cols = 1,
                              double panel_w = 420, double panel_h = 260) {
  cols = std::max(1, cols);
  const int n = std::max<int>(1, static_cast<int>(panels.size()));
  const int rows = (n + cols - 1) / cols;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
    << detail::fmt(cols * panel_w) << "\" height=\""
    << detail::fmt(rows * panel_h) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    detail::draw_panel(o, panels[i], c * panel_w, r * panel_h, panel_w, panel_h);
  }
  o << "</svg>\n";
  return o.str();
}

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#ff7f0e", "#9467bd", "#8c564b"};

// Lower end point on the X-Y plane, reference in red and actual in blue, cm.
inline Panel trajectory_panel(const std::vector<EpisodeStep>& steps) {
  Panel p;
  p.title = "lower end point";
  p.x_label = "x (cm)";
  p.y_label = "y (cm)";
  p.equal_aspect = true;
  Series ref{"reference", "#d62728", {}, {}}, act{"actual", "#1f77b4", {}, {}};
  for (const auto& s : steps) {
    ref.x.push_back(100.0 * s.p2_desired.x());
    ref.y.push_back(100.0 * s.p2_desired.y());
    act.x.push_back(100.0 * s.p2_actual.x());
    act.y.push_back(100.0 * s.p2_actual.y());
  }
  p.series = {ref, act};
  return p;
}

inline Panel joints_panel(const std::vector<EpisodeStep>& steps) {
  Panel p;
  p.title = "joint positions";
  p.x_label = "t (s)";
  p.y_label = "q (rad)";
  for (int a = 0; a < kNumActive; ++a) {
    Series s{"q" + std::to_string(a), kPalette[a], {}, {}};
    for (const auto& st : steps) {
      s.x.push_back(st.t);
      s.y.push_back(st.q[a]);
    }
    p.series.push_back(std::move(s));
  }
  return p;
}

// One panel per finger, local contact-center coordinates in mm.
inline std::vector<Panel> contact_panels(const std::vector<EpisodeStep>& steps) {
  std::vector<Panel> out;
  const char* axes[] = {"x", "y", "z"};
  for (int f = 0; f < kNumFingers; ++f) {
    Panel p;
    p.title = "contact center, finger " + std::to_string(f);
    p.x_label = "t (s)";
    p.y_label = "mm";
    for (int i = 0; i < 3; ++i) {
      Series s{axes[i], kPalette[i], {}, {}};
      for (const auto& st : steps) {
        s.x.push_back(st.t);
        s.y.push_back(1000.0 * st.centers[3 * f + i]);
      }
      p.series.push_back(std::move(s));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace tactile_hand

#endif  // TACTILE_HAND_PLOT_HPP_
