#pragma once

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hett/error.hpp"
#include "hett/geom.hpp"

namespace hett::eval {

using geom::Point2;

// What the metrics need from one finished episode.
struct EpisodeOutcome {
  std::string episode_id;
  std::vector<Point2> positions;  // p_0 .. p_T, p_0 = start
  bool stopped = false;
  Point2 goal;
};

struct EpisodeMetrics {
  std::string episode_id;
  double navigation_error = 0.0;
  bool success = false;
  bool oracle_success = false;
  double spl = 0.0;
  double path_length = 0.0;
  double reference_length = 0.0;
};

// Success requires an issued Stop with the final position inside the radius.
// SPL term = S * l / max(p, l) with l the straight start-goal distance and p
// the travelled length; when p = 0 the term is S.
inline EpisodeMetrics episode_metrics(const EpisodeOutcome& o, double success_radius) {
  if (o.positions.empty()) throw data_error("episode " + o.episode_id + " has no positions");
  EpisodeMetrics m;
  m.episode_id = o.episode_id;
  m.navigation_error = geom::distance(o.positions.back(), o.goal);
  m.success = o.stopped && m.navigation_error <= success_radius;
  m.oracle_success = std::any_of(o.positions.begin(), o.positions.end(),
                                 [&](Point2 p) { return geom::distance(p, o.goal) <= success_radius; });
  for (std::size_t i = 1; i < o.positions.size(); ++i) m.path_length += geom::distance(o.positions[i - 1], o.positions[i]);
  m.reference_length = geom::distance(o.positions.front(), o.goal);
  const double s = m.success ? 1.0 : 0.0;
  if (m.path_length <= 0.0) {
    m.spl = s;
  } else {
    m.spl = s * m.reference_length / std::max(m.path_length, m.reference_length);
  }
  return m;
}

// NE in meters; SR, OSR, SPL in percent.
struct MetricsReport {
  double ne = 0.0;
  double sr = 0.0;
  double osr = 0.0;
  double spl = 0.0;
  std::vector<EpisodeMetrics> rows;

  std::string csv() const {
    std::ostringstream o;
    o << "NE,SR,OSR,SPL\n" << std::fixed << std::setprecision(2) << ne << ',' << sr << ',' << osr << ',' << spl << '\n';
    return o.str();
  }

  std::string per_episode_csv() const {
    std::ostringstream o;
    o << "episode,NE,success,oracle_success,SPL,path_length,reference_length\n" << std::setprecision(10);
    for (const auto& r : rows)
      o << r.episode_id << ',' << r.navigation_error << ',' << r.success << ',' << r.oracle_success << ',' << r.spl
        << ',' << r.path_length << ',' << r.reference_length << '\n';
    return o.str();
  }
};

inline MetricsReport summarize(std::vector<EpisodeMetrics> rows) {
  MetricsReport r;
  if (rows.empty()) return r;
  double ne = 0, sr = 0, osr = 0, spl = 0;
  for (const auto& m : rows) {
    ne += m.navigation_error;
    sr += m.success;
    osr += m.oracle_success;
    spl += m.spl;
  }
  const double n = static_cast<double>(rows.size());
  r.ne = ne / n;
  r.sr = 100.0 * sr / n;
  r.osr = 100.0 * osr / n;
  r.spl = 100.0 * spl / n;
  r.rows = std::move(rows);
  return r;
}

inline MetricsReport compute_metrics(const std::vector<EpisodeOutcome>& outcomes, double success_radius) {
  std::vector<EpisodeMetrics> rows;
  rows.reserve(outcomes.size());
  for (const auto& o : outcomes) rows.push_back(episode_metrics(o, success_radius));
  return summarize(std::move(rows));
}

inline void print_table(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  out << std::left << std::setw(16) << "split" << std::right << std::setw(10) << "NE" << std::setw(10) << "SR"
      << std::setw(10) << "OSR" << std::setw(10) << "SPL" << '\n';
  for (const auto& [name, r] : rows)
    out << std::left << std::setw(16) << name << std::right << std::fixed << std::setprecision(2) << std::setw(10)
        << r.ne << std::setw(10) << r.sr << std::setw(10) << r.osr << std::setw(10) << r.spl << '\n';
}

}  // namespace hett::eval
