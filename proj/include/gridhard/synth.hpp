#pragma once

/* Synthetic outage generator. A ground-truth model ties fault location to
 * wind speed through per-segment logistic fragility curves:
 *
 *   q_s(w) = sigmoid((w - w0_s) / k_s),   P(fault on s | w) = q_s / sum q
 *
 * with wind drawn from a truncated normal. The implied marginal scenario
 * distribution is available in closed form (by quadrature) so learned and
 * empirical estimates can be checked against it exactly. */

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridhard/common.hpp"
#include "gridhard/outage.hpp"

namespace gridhard {

struct SegmentFragility {
  double w0 = 30.0;  // wind at which the segment reaches half its max hazard
  double k = 5.0;    // logistic width, mph
};

struct GroundTruthModel {
  double wind_mean = 30.0, wind_std = 10.0, wind_min = 0.0, wind_max = 80.0;
  double duration_mean_h = 2.0, duration_std_h = 0.5, duration_min_h = 0.25;
  double humidity_mean = 60.0, humidity_std = 15.0;
  double temp_mean = 15.0, temp_std = 8.0;
  std::vector<SegmentFragility> segments;  // aligned with the scenario catalog
};

inline GroundTruthModel truth_from_json(const nlohmann::json& j, const ScenarioCatalog& cat) {
  GroundTruthModel m;
  if (j.value("version", 1) != 1) throw ConfigError("truth model: unsupported version");
  if (j.contains("wind")) {
    const auto& w = j.at("wind");
    m.wind_mean = w.value("mean", m.wind_mean);
    m.wind_std = w.value("std", m.wind_std);
    m.wind_min = w.value("min", m.wind_min);
    m.wind_max = w.value("max", m.wind_max);
  }
  if (j.contains("duration")) {
    const auto& d = j.at("duration");
    m.duration_mean_h = d.value("mean_h", m.duration_mean_h);
    m.duration_std_h = d.value("std_h", m.duration_std_h);
    m.duration_min_h = d.value("min_h", m.duration_min_h);
  }
  if (j.contains("humidity")) {
    m.humidity_mean = j.at("humidity").value("mean", m.humidity_mean);
    m.humidity_std = j.at("humidity").value("std", m.humidity_std);
  }
  if (j.contains("temp")) {
    m.temp_mean = j.at("temp").value("mean", m.temp_mean);
    m.temp_std = j.at("temp").value("std", m.temp_std);
  }
  if (m.wind_std <= 0 || m.wind_max <= m.wind_min) throw ConfigError("truth model: bad wind spec");
  m.segments.assign(cat.size(), SegmentFragility{});
  if (!j.contains("segments")) throw ConfigError("truth model: segments required");
  const auto& segs = j.at("segments");
  for (size_t i = 0; i < cat.size(); ++i) {
    if (!segs.contains(cat.scenarios[i].id))
      throw ConfigError("truth model: missing segment " + cat.scenarios[i].id);
    const auto& s = segs.at(cat.scenarios[i].id);
    m.segments[i].w0 = s.at("w0").get<double>();
    m.segments[i].k = s.at("k").get<double>();
    if (m.segments[i].k <= 0) throw ConfigError("truth model: k must be > 0");
  }
  return m;
}

inline GroundTruthModel load_truth_file(const std::string& path, const ScenarioCatalog& cat) {
  return truth_from_json(nlohmann::json::parse(read_text_file(path)), cat);
}

inline std::vector<double> fault_pmf_given_wind(const GroundTruthModel& m, double wind) {
  std::vector<double> q(m.segments.size());
  double tot = 0;
  for (size_t i = 0; i < q.size(); ++i) {
    q[i] = sigmoid((wind - m.segments[i].w0) / m.segments[i].k);
    tot += q[i];
  }
  if (tot <= 0) throw SolveError("degenerate fragility model");
  for (double& v : q) v /= tot;
  return q;
}

/* Marginal P(scenario) under the truncated-normal wind law, by Simpson
 * quadrature over [wind_min, wind_max]. */
inline std::vector<double> truth_scenario_distribution(const GroundTruthModel& m,
                                                       int panels = 2000) {
  size_t S = m.segments.size();
  std::vector<double> acc(S, 0.0);
  double mass = 0.0;
  double a = m.wind_min, b = m.wind_max;
  int n = panels % 2 == 0 ? panels : panels + 1;
  double hstep = (b - a) / n;
  auto dens = [&](double w) {
    double z = (w - m.wind_mean) / m.wind_std;
    return std::exp(-0.5 * z * z);
  };
  for (int i = 0; i <= n; ++i) {
    double w = a + hstep * i;
    double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    double f = wgt * dens(w);
    mass += f;
    auto pmf = fault_pmf_given_wind(m, w);
    for (size_t s = 0; s < S; ++s) acc[s] += f * pmf[s];
  }
  for (size_t s = 0; s < S; ++s) acc[s] /= mass;
  return acc;
}

namespace detail {

inline double truncated_normal(Rng& rng, std::normal_distribution<double>& g, double mean,
                               double sd, double lo, double hi) {
  for (int i = 0; i < 1000; ++i) {
    double v = mean + sd * g(rng);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(mean, lo, hi);
}

}  // namespace detail

/* Deterministic per (model, catalog, n, seed); output is byte-stable. */
inline std::vector<OutageRecord> synth_generate(const GroundTruthModel& m,
                                                const ScenarioCatalog& cat, int n_events,
                                                std::uint64_t seed) {
  if (m.segments.size() != cat.size()) throw ConfigError("truth model/catalog size mismatch");
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<OutageRecord> out;
  out.reserve(static_cast<size_t>(n_events));
  char idbuf[32], tbuf[48];
  for (int e = 0; e < n_events; ++e) {
    OutageRecord r;
    std::snprintf(idbuf, sizeof(idbuf), "e%06d", e);
    r.id = idbuf;
    // synthetic clock: one event every 9 hours from 2024-01-01 00:00
    long minutes = 540L * e;
    long day = minutes / 1440, rem = minutes % 1440;
    std::snprintf(tbuf, sizeof(tbuf), "2024-01-01T00:00+%ldd%02ld:%02ld", day, rem / 60, rem % 60);
    r.time = tbuf;
    double wind = detail::truncated_normal(rng, g, m.wind_mean, m.wind_std, m.wind_min, m.wind_max);
    auto pmf = fault_pmf_given_wind(m, wind);
    double u = unif(rng), cum = 0;
    size_t si = pmf.size() - 1;
    for (size_t s = 0; s < pmf.size(); ++s) {
      cum += pmf[s];
      if (u <= cum) {
        si = s;
        break;
      }
    }
    r.clear_device = cat.scenarios[si].clear_device;
    double dur = m.duration_mean_h + m.duration_std_h * g(rng);
    dur = std::max(m.duration_min_h, dur);
    r.duration_h = std::round(dur * 4.0) / 4.0;  // quarter-hour quanta
    if (r.duration_h < m.duration_min_h) r.duration_h = m.duration_min_h;
    r.wind_mph = wind;
    r.humidity_pct = std::clamp(m.humidity_mean + m.humidity_std * g(rng), 0.0, 100.0);
    r.temp_c = m.temp_mean + m.temp_std * g(rng);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace gridhard
