#include "dlvmc/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace {

std::string xml_escape(const std::string& s) {
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

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string svg_line_chart(const std::vector<CurveSeries>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
  const double width = 800, height = 500;
  const double ml = 80, mr = 20, mt = 40, mb = 50;

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  if (!std::isfinite(x_min)) {
    x_min = 0;
    x_max = 1;
    y_min = 0;
    y_max = 1;
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;

  auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
  auto py = [&](double y) {
    return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
  };

  std::ostringstream out;
  out.precision(10);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x_min + (x_max - x_min) * t / 4.0;
    const double yv = y_min + (y_max - y_min) * t / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << xv << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << yv << "</text>\n";
  }
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << (mt + height - mb) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";

  int color = 0;
  double legend_y = mt + 10;
  for (const auto& s : series) {
    const char* stroke = kPalette[color % 8];
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    out << "\"/>\n";
    out << "<line x1=\"" << width - mr - 150 << "\" y1=\"" << legend_y << "\" x2=\""
        << width - mr - 130 << "\" y2=\"" << legend_y << "\" stroke=\"" << stroke
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << width - mr - 125 << "\" y=\"" << legend_y + 4
        << "\" font-size=\"11\">" << xml_escape(s.label) << "</text>\n";
    legend_y += 16;
    ++color;
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<RunSummary> collect_runs(const std::vector<std::string>& run_dirs) {
  std::vector<std::string> sorted = run_dirs;
  std::sort(sorted.begin(), sorted.end());
  std::vector<RunSummary> out;
  for (const auto& dir : sorted) {
    RunSummary s;
    s.dir = dir;
    const std::string path = dir + "/energy.json";
    std::ifstream in(path);
    if (!in) {
      s.error = "missing energy.json";
      out.push_back(s);
      continue;
    }
    try {
      nlohmann::json j;
      in >> j;
      s.mean = j.at("mean").get<double>();
      s.stderr_ = j.at("stderr").get<double>();
      s.variance = j.at("variance").get<double>();
      s.n_samples = j.at("n_samples").get<long>();
      s.ok = true;
    } catch (const std::exception& e) {
      s.error = std::string("corrupt energy.json: ") + e.what();
    }
    out.push_back(s);
  }
  return out;
}

CurveSeries load_energy_curve(const std::string& run_dir) {
  CurveSeries c;
  c.label = std::filesystem::path(run_dir).filename().string();
  std::ifstream in(run_dir + "/log.csv");
  if (!in) throw ParseError("missing log.csv in " + run_dir);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() >= 2) {
      c.x.push_back(row[0]);
      c.y.push_back(row[1]);
    }
  }
  return c;
}

void write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto runs = collect_runs(run_dirs);

  std::ofstream table(out_dir + "/report.csv");
  table.precision(17);
  table << "run,energy_mean,energy_stderr,energy_variance,n_samples\n";
  for (const auto& r : runs) {
    if (!r.ok) {
      std::cerr << "report: skipping " << r.dir << " (" << r.error << ")\n";
      continue;
    }
    table << std::filesystem::path(r.dir).filename().string() << "," << r.mean << ","
          << r.stderr_ << "," << r.variance << "," << r.n_samples << "\n";
  }

  std::vector<CurveSeries> curves;
  for (const auto& r : runs) {
    try {
      CurveSeries c = load_energy_curve(r.dir);
      std::ofstream ccsv(out_dir + "/curve_" + c.label + ".csv");
      ccsv.precision(17);
      ccsv << "step,energy_mean\n";
      for (std::size_t i = 0; i < c.x.size(); ++i) ccsv << c.x[i] << "," << c.y[i] << "\n";
      curves.push_back(std::move(c));
    } catch (const std::exception& e) {
      std::cerr << "report: no curve for " << r.dir << " (" << e.what() << ")\n";
    }
  }
  std::ofstream svg(out_dir + "/energies.svg");
  svg << svg_line_chart(curves, "Energy vs step", "step", "energy [Ha]");
}

}  // namespace dlvmc
