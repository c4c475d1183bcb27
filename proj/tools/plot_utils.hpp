#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "eager/util/csv.hpp"
#include "svg.hpp"

namespace eager::cli {

struct MethodCurves {
  std::string label;
  std::vector<CsvTable> curves;  // one per seed
};

inline std::vector<std::string> find_curve_csvs(const std::string& input) {
  namespace fs = std::filesystem;
  std::vector<std::string> out;
  const fs::path p(input);
  if (fs::is_regular_file(p)) {
    out.push_back(p.string());
    return out;
  }
  if (!fs::is_directory(p)) throw DataError("no such input: " + input);
  std::vector<std::string> seeds;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_directory() && fs::exists(e.path() / "curve.csv"))
      seeds.push_back((e.path() / "curve.csv").string());
  std::sort(seeds.begin(), seeds.end());
  if (!seeds.empty()) return seeds;
  if (fs::exists(p / "curve.csv")) {
    out.push_back((p / "curve.csv").string());
    return out;
  }
  throw DataError("no curve.csv under " + input);
}

inline double interp(const std::vector<double>& xs,
                     const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::lower_bound(xs.begin(), xs.end(), x);
  const size_t hi = static_cast<size_t>(it - xs.begin());
  const size_t lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] * (1 - w) + ys[hi] * w;
}

// Aggregates per-seed curves into a mean +/- std series over a common
// frame grid. Mismatched grids fail unless resampling is allowed.
inline Series aggregate_method(const MethodCurves& method,
                               const std::string& column, bool resample) {
  std::vector<std::vector<double>> grids, values;
  for (const auto& table : method.curves) {
    const int fcol = table.column("frames");
    const int vcol = table.column(column);
    std::vector<double> g, v;
    for (const auto& row : table.rows) {
      g.push_back(row[fcol]);
      v.push_back(row[vcol]);
    }
    grids.push_back(std::move(g));
    values.push_back(std::move(v));
  }
  std::vector<double> grid = grids[0];
  bool mismatch = false;
  for (const auto& g : grids) mismatch |= g != grid;
  if (mismatch) {
    if (!resample)
      throw DataError("frame grids differ across curves for '" +
                      method.label + "'; pass --resample to interpolate");
    std::vector<double> merged;
    for (const auto& g : grids) merged.insert(merged.end(), g.begin(), g.end());
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    grid = std::move(merged);
  }
  Series s;
  s.label = method.label;
  s.x = grid;
  for (double x : grid) {
    double mean = 0.0, var = 0.0;
    std::vector<double> at;
    for (size_t c = 0; c < grids.size(); ++c)
      at.push_back(mismatch ? interp(grids[c], values[c], x)
                            : values[c][static_cast<size_t>(
                                  std::lower_bound(grid.begin(), grid.end(),
                                                   x) -
                                  grid.begin())]);
    for (double v : at) mean += v;
    mean /= at.size();
    for (double v : at) var += (v - mean) * (v - mean);
    var /= at.size();
    s.mean.push_back(mean);
    if (at.size() > 1) {
      s.lo.push_back(mean - std::sqrt(var));
      s.hi.push_back(mean + std::sqrt(var));
    }
  }
  if (!s.lo.empty() && s.lo.size() != s.x.size()) {
    s.lo.clear();
    s.hi.clear();
  }
  return s;
}

}  // namespace eager::cli
