#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pdekf/harness.hpp"

namespace pdekf {

namespace {

struct Series {
  std::string label;
  std::vector<double> t;
  std::vector<double> v;
};

Series read_series(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "plot: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "plot: empty file " + path.string());
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  const auto it = std::find(header.begin(), header.end(), column);
  if (header.empty() || header.front() != "t" || it == header.end()) {
    throw Error(ErrorKind::Io, "plot: " + path.string() + " lacks the 't' or '" + column + "' column");
  }
  const auto col = static_cast<std::size_t>(it - header.begin());
  Series s{path.stem().string(), {}, {}};
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw Error(ErrorKind::Io, "plot: " + path.string() + ":" + std::to_string(row) + ": bad number '" + cell + "'");
      }
      cells.push_back(v);
    }
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Io, "plot: " + path.string() + ":" + std::to_string(row) + ": wrong column count");
    }
    s.t.push_back(cells[0]);
    s.v.push_back(cells[col]);
  }
  return s;
}

std::string fmt(double v, int decimals = 2) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::string tick_label(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 3);
  return std::string(buf, res.ptr);
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

}  // namespace

void emit_plot(const std::vector<std::filesystem::path>& csvs, const std::filesystem::path& out, bool log_scale,
               const std::string& column) {
  if (csvs.empty()) throw Error(ErrorKind::Misuse, "plot: no input CSVs");
  std::vector<Series> series;
  for (const auto& p : csvs) series.push_back(read_series(p, column));
  for (const auto& s : series) {
    if (s.t != series.front().t) {
      throw Error(ErrorKind::Shape, "plot: " + s.label + " does not share the time grid of " + series.front().label);
    }
  }
  const auto& t = series.front().t;
  if (t.size() < 2) throw Error(ErrorKind::Shape, "plot: need at least two samples");

  // Value transform and range.
  double vmin = INFINITY, vmax = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.v) {
      if (!std::isfinite(v) || (log_scale && v <= 0.0)) continue;
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  if (!std::isfinite(vmin)) vmin = vmax = log_scale ? 1.0 : 0.0;
  double lo = log_scale ? std::floor(std::log10(vmin)) : vmin;
  double hi = log_scale ? std::ceil(std::log10(vmax)) : vmax;
  if (hi <= lo) hi = lo + 1.0;
  const double t0 = t.front(), t1 = t.back();

  constexpr double W = 720, H = 440, left = 80, right = 150, top = 30, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  const auto x_of = [&](double tt) { return left + pw * (tt - t0) / (t1 - t0); };
  const auto y_of = [&](double v) {
    double u = log_scale ? std::log10(std::max(v, std::pow(10.0, lo))) : v;
    u = std::clamp(u, lo, hi);
    return top + ph * (1.0 - (u - lo) / (hi - lo));
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W, 0) << "\" height=\"" << fmt(H, 0)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(W, 0) << "\" height=\"" << fmt(H, 0) << "\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double tt = t0 + (t1 - t0) * i / 5.0;
    const double x = x_of(tt);
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(x) << "\" y2=\""
        << fmt(top + ph + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(top + ph + 20) << "\" text-anchor=\"middle\">" << tick_label(tt)
        << "</text>\n";
  }
  const int yticks = log_scale ? static_cast<int>(hi - lo) : 5;
  for (int i = 0; i <= yticks; ++i) {
    const double u = lo + (hi - lo) * i / yticks;
    const double y = top + ph * (1.0 - (u - lo) / (hi - lo));
    svg << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"black\"/>\n";
    const std::string label = log_scale ? "1e" + std::to_string(static_cast<int>(std::lround(u))) : tick_label(u);
    svg << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(H - 15) << "\" text-anchor=\"middle\">t [s]</text>\n";
  svg << "<text x=\"20\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << fmt(top + ph / 2) << ")\">" << column << (log_scale ? " (log scale)" : "") << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    // Thin to at most ~2000 vertices; the stride is a pure function of the grid.
    const std::size_t stride = std::max<std::size_t>(1, t.size() / 2000);
    for (std::size_t i = 0; i < t.size(); i += stride) {
      svg << (i == 0 ? "" : " ") << fmt(x_of(t[i])) << ',' << fmt(y_of(series[k].v[i]));
    }
    if ((t.size() - 1) % stride != 0) svg << ' ' << fmt(x_of(t.back())) << ',' << fmt(y_of(series[k].v.back()));
    svg << "\"/>\n";
    const double ly = top + 15 + 18 * static_cast<double>(k);
    svg << "<line x1=\"" << fmt(W - right + 10) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(W - right + 35)
        << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(W - right + 40) << "\" y=\"" << fmt(ly + 4) << "\">" << series[k].label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "plot: cannot write " + out.string());
  f << svg.str();
}

}  // namespace pdekf
