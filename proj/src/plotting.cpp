#include "mcpo/plotting.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace mcpo::harness {

using nlohmann::json;

Series read_metric_series(const std::string& path, const std::string& metric) {
  std::ifstream in(path);
  if (!in) throw ConfigError("plot: cannot open '" + path + "'");
  Series s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (!j.contains("env_steps") || !j.contains(metric))
      throw ConfigError("plot: '" + path + "' has no metric '" + metric + "'");
    if (j.at(metric).is_null()) continue;  // e.g. no finished episodes yet
    s.x.push_back(j.at("env_steps").get<double>());
    s.y.push_back(j.at(metric).get<double>());
  }
  if (s.x.empty())
    throw ConfigError("plot: no usable values for '" + metric + "' in '" +
                      path + "'");
  return s;
}

namespace {
double interp(const Series& s, double x) {
  auto it = std::lower_bound(s.x.begin(), s.x.end(), x);
  if (it == s.x.begin()) return s.y.front();
  if (it == s.x.end()) return s.y.back();
  size_t hi = static_cast<size_t>(it - s.x.begin());
  size_t lo = hi - 1;
  double t = (x - s.x[lo]) / (s.x[hi] - s.x[lo]);
  return s.y[lo] + t * (s.y[hi] - s.y[lo]);
}
}  // namespace

Aggregate aggregate_series(const std::vector<Series>& runs) {
  if (runs.empty()) throw ConfigError("plot: no runs");
  bool same_grid = true;
  for (const Series& s : runs)
    if (s.x != runs[0].x) same_grid = false;

  std::vector<double> grid;
  if (same_grid) {
    grid = runs[0].x;
  } else {
    std::cerr << "[plot] note: env_steps grids differ; resampling onto a "
                 "common grid\n";
    double lo = runs[0].x.front(), hi = runs[0].x.back();
    size_t points = runs[0].x.size();
    for (const Series& s : runs) {
      lo = std::max(lo, s.x.front());
      hi = std::min(hi, s.x.back());
      points = std::min(points, s.x.size());
    }
    if (hi <= lo) throw ConfigError("plot: runs have no overlapping steps");
    for (size_t i = 0; i < points; ++i)
      grid.push_back(lo + (hi - lo) * static_cast<double>(i) /
                              std::max<size_t>(points - 1, 1));
  }

  Aggregate agg;
  agg.x = grid;
  agg.n = static_cast<int>(runs.size());
  for (double x : grid) {
    double mean = 0.0;
    for (const Series& s : runs) mean += interp(s, x);
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (const Series& s : runs) {
      double d = interp(s, x) - mean;
      var += d * d;
    }
    var /= static_cast<double>(runs.size());
    agg.mean.push_back(mean);
    agg.stddev.push_back(std::sqrt(var));
  }
  return agg;
}

void write_aggregate_csv(const Aggregate& agg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("plot: cannot open '" + path + "'");
  out.precision(12);
  out << "env_steps,mean,std,n\n";
  for (size_t i = 0; i < agg.x.size(); ++i)
    out << agg.x[i] << ',' << agg.mean[i] << ',' << agg.stddev[i] << ','
        << agg.n << '\n';
}

namespace {
struct Frame {
  double x0, x1, y0, y1;           // data range
  double px0, px1, py0, py1;       // pixel box
  double tx(double x) const {
    return px0 + (x - x0) / (x1 - x0) * (px1 - px0);
  }
  double ty(double y) const {
    return py1 - (y - y0) / (y1 - y0) * (py1 - py0);
  }
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}
}  // namespace

void plot(const std::vector<std::string>& metrics_files,
          const std::string& metric, const std::string& output_svg) {
  if (metrics_files.empty()) throw ConfigError("plot: no metrics files");
  std::vector<Series> runs;
  for (const std::string& f : metrics_files)
    runs.push_back(read_metric_series(f, metric));
  Aggregate agg = aggregate_series(runs);
  write_aggregate_csv(agg, output_svg + ".csv");

  double ylo = agg.mean[0] - agg.stddev[0], yhi = agg.mean[0] + agg.stddev[0];
  for (size_t i = 0; i < agg.x.size(); ++i) {
    ylo = std::min(ylo, agg.mean[i] - agg.stddev[i]);
    yhi = std::max(yhi, agg.mean[i] + agg.stddev[i]);
  }
  if (yhi - ylo < 1e-12) {
    yhi += 1.0;
    ylo -= 1.0;
  }
  Frame f{agg.x.front(), std::max(agg.x.back(), agg.x.front() + 1e-9),
          ylo, yhi, 70, 760, 20, 420};

  std::ofstream out(output_svg);
  if (!out) throw ConfigError("plot: cannot open '" + output_svg + "'");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='800' height='480' "
         "viewBox='0 0 800 480'>\n";
  out << "<rect width='800' height='480' fill='white'/>\n";

  // std band
  out << "<polygon fill='#4477aa' fill-opacity='0.25' stroke='none' points='";
  for (size_t i = 0; i < agg.x.size(); ++i)
    out << f.tx(agg.x[i]) << ',' << f.ty(agg.mean[i] + agg.stddev[i]) << ' ';
  for (size_t i = agg.x.size(); i-- > 0;)
    out << f.tx(agg.x[i]) << ',' << f.ty(agg.mean[i] - agg.stddev[i]) << ' ';
  out << "'/>\n";

  // mean line
  out << "<polyline fill='none' stroke='#4477aa' stroke-width='2' points='";
  for (size_t i = 0; i < agg.x.size(); ++i)
    out << f.tx(agg.x[i]) << ',' << f.ty(agg.mean[i]) << ' ';
  out << "'/>\n";

  // axes
  out << "<line x1='" << f.px0 << "' y1='" << f.py1 << "' x2='" << f.px1
      << "' y2='" << f.py1 << "' stroke='black'/>\n";
  out << "<line x1='" << f.px0 << "' y1='" << f.py0 << "' x2='" << f.px0
      << "' y2='" << f.py1 << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<text x='" << f.tx(x) << "' y='" << f.py1 + 18
        << "' font-size='11' text-anchor='middle'>" << fmt(x) << "</text>\n";
    out << "<text x='" << f.px0 - 6 << "' y='" << f.ty(y) + 4
        << "' font-size='11' text-anchor='end'>" << fmt(y) << "</text>\n";
  }
  out << "<text x='415' y='470' font-size='12' "
         "text-anchor='middle'>env_steps</text>\n";
  out << "<text x='415' y='14' font-size='12' text-anchor='middle'>" << metric
      << " (mean ± std over " << agg.n << " runs)</text>\n";
  out << "</svg>\n";
}

}  // namespace mcpo::harness
