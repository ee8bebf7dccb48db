#pragma once

// Reference implementations written independently of the library code, used
// by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hett/geom.hpp"

namespace oracle {

// One cell of the history grid: features m[j][k], instruction e[t][k].
// Returns the per-record weights and the aggregated token.
struct CellResult {
  std::vector<double> weights;
  std::vector<double> token;
};

inline CellResult grid_cell(const std::vector<std::vector<double>>& m, const std::vector<std::vector<double>>& e) {
  const std::size_t J = m.size(), N = e.size(), D = m.empty() ? 0 : m[0].size();
  CellResult r;
  r.weights.assign(J, 0.0);
  r.token.assign(D, 0.0);
  for (std::size_t t = 0; t < N; ++t) {
    std::vector<double> s(J);
    for (std::size_t j = 0; j < J; ++j) {
      s[j] = 0.0;
      for (std::size_t k = 0; k < D; ++k) s[j] += m[j][k] * e[t][k];
    }
    const double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (std::size_t j = 0; j < J; ++j) z += std::exp(s[j] - mx);
    for (std::size_t j = 0; j < J; ++j) r.weights[j] += std::exp(s[j] - mx) / z / static_cast<double>(N);
  }
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t k = 0; k < D; ++k) r.token[k] += r.weights[j] * m[j][k];
  return r;
}

struct Metrics {
  double ne = 0, sr = 0, osr = 0, spl = 0;
};

// positions[i] = p_0..p_T of episode i.
inline Metrics navigation_metrics(const std::vector<std::vector<hett::geom::Point2>>& positions,
                                  const std::vector<hett::geom::Point2>& goals, const std::vector<bool>& stopped,
                                  double radius) {
  Metrics out;
  const double n = static_cast<double>(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto& p = positions[i];
    const auto g = goals[i];
    auto dist = [](hett::geom::Point2 a, hett::geom::Point2 b) {
      return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y));
    };
    const double ne = dist(p.back(), g);
    const bool s = stopped[i] && ne <= radius;
    bool os = false;
    double travelled = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (dist(p[t], g) <= radius) os = true;
      if (t > 0) travelled += dist(p[t - 1], p[t]);
    }
    const double l = dist(p.front(), g);
    double spl = 0.0;
    if (s) spl = travelled == 0.0 ? 1.0 : l / std::max(travelled, l);
    out.ne += ne / n;
    out.sr += (s ? 100.0 : 0.0) / n;
    out.osr += (os ? 100.0 : 0.0) / n;
    out.spl += 100.0 * spl / n;
  }
  return out;
}

// Plain dynamic-programming edit distance.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

}  // namespace oracle
