#include "evfleet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "evfleet/demand.hpp"
#include "evfleet/util.hpp"

namespace evfleet::plot {

namespace {

constexpr double kWidth = 720, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

using Table = std::vector<std::vector<std::string>>;

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Table rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(demand::split_delimited(line, ','));
  }
  return rows;
}

double num(const std::string& s) { return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s); }

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

Frame frame_for(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  return {x0, x1, y0 - pad, y1 + pad};
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string open_svg(const std::string& title, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
    << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s << "<text x=\"" << f.px(x) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">" << fmt(x)
      << "</text>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
  }
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">" << xlabel
    << "</text>\n";
  s << "<text transform=\"translate(16," << kHeight / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel
    << "</text>\n";
  return s.str();
}

std::string polyline(const Frame& f, const std::vector<std::pair<double, double>>& pts, const std::string& colour) {
  std::ostringstream s;
  s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : pts) {
    if (std::isfinite(y)) s << f.px(x) << ',' << f.py(y) << ' ';
  }
  s << "\"/>\n";
  return s.str();
}

void write(const std::filesystem::path& path, const std::string& body, std::vector<std::string>& written) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body << "</svg>\n";
  written.push_back(path.string());
}

std::vector<std::pair<double, double>> series(const Table& t, std::size_t col) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : t) {
    if (row.size() > col) pts.emplace_back(num(row[0]) / 24.0, num(row[col]));
  }
  return pts;
}

std::pair<double, double> y_range(const std::vector<std::pair<double, double>>& pts) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [x, y] : pts) {
    if (std::isfinite(y)) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return {lo, hi};
}

}  // namespace

std::vector<std::string> render(const std::string& metrics_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path in(metrics_dir), out(out_dir);
  fs::create_directories(out);
  std::vector<std::string> written;

  {
    const auto t = read_csv(in / "soh.csv");
    const auto q25 = series(t, 2), med = series(t, 3), q75 = series(t, 4);
    auto [lo, hi] = y_range(q25);
    hi = std::max(hi, y_range(q75).second);
    const double x1 = t.empty() ? 1.0 : num(t.back()[0]) / 24.0;
    const Frame f = frame_for(0.0, x1, lo, hi);
    std::string body = open_svg("Fleet state of health", f, "days", "SoH");
    std::ostringstream band;
    band << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
    for (const auto& [x, y] : q75) {
      if (std::isfinite(y)) band << f.px(x) << ',' << f.py(y) << ' ';
    }
    for (auto it = q25.rbegin(); it != q25.rend(); ++it) {
      if (std::isfinite(it->second)) band << f.px(it->first) << ',' << f.py(it->second) << ' ';
    }
    band << "\"/>\n";
    body += band.str() + polyline(f, med, "#08519c");
    write(out / "soh.svg", body, written);
  }
  {
    const auto pts = series(read_csv(in / "revenue.csv"), 1);
    const auto [lo, hi] = y_range(pts);
    const Frame f = frame_for(0.0, pts.empty() ? 1.0 : pts.back().first, std::min(0.0, lo), hi);
    write(out / "revenue.svg", open_svg("Cumulative revenue", f, "days", "revenue") + polyline(f, pts, "#238b45"),
          written);
  }
  {
    const auto pts = series(read_csv(in / "power.csv"), 1);
    const auto [lo, hi] = y_range(pts);
    const Frame f = frame_for(0.0, pts.empty() ? 1.0 : pts.back().first, std::min(0.0, lo), hi);
    write(out / "power.svg", open_svg("Total fleet charging power", f, "days", "kW") + polyline(f, pts, "#d94801"),
          written);
  }
  {
    const auto t = read_csv(in / "power_histogram.csv");
    double x0 = 0.0, x1 = 1.0, top = 1.0;
    if (!t.empty()) {
      x0 = num(t.front()[0]);
      x1 = num(t.back()[1]);
      for (const auto& row : t) top = std::max(top, num(row[2]));
    }
    const Frame f = frame_for(x0, x1, 0.0, top);
    std::string body = open_svg("Distribution of charging power", f, "kW", "ticks");
    std::ostringstream bars;
    for (const auto& row : t) {
      const double a = f.px(num(row[0])), b = f.px(num(row[1])), y = f.py(num(row[2]));
      bars << "<rect x=\"" << a << "\" y=\"" << y << "\" width=\"" << std::max(0.5, b - a - 1) << "\" height=\""
           << f.py(0.0) - y << "\" fill=\"#6a51a3\"/>\n";
    }
    write(out / "power_histogram.svg", body + bars.str(), written);
  }
  return written;
}

}  // namespace evfleet::plot
