#pragma once

#include <string>
#include <vector>

namespace dlvmc {

struct CurveSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained SVG 1.1 line chart, one polyline per series.
std::string svg_line_chart(const std::vector<CurveSeries>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label);

struct RunSummary {
  std::string dir;
  bool ok = false;
  std::string error;
  double mean = 0.0, stderr_ = 0.0, variance = 0.0;
  long n_samples = 0;
};

/// Read energy.json from each run directory; missing/corrupt entries come
/// back with ok = false and a warning message instead of failing the report.
std::vector<RunSummary> collect_runs(const std::vector<std::string>& run_dirs);

/// Energy-vs-step curve from a run's log.csv.
CurveSeries load_energy_curve(const std::string& run_dir);

/// report.csv (one row per run, ordered by directory name), per-run curve CSV
/// files and a combined energies.svg in out_dir.
void write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace dlvmc
