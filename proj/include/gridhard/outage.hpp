#pragma once

/* Outage records, the per-segment scenario catalog, and training-set
 * construction for the scenario-translation regressor.
 *
 * A scenario = "fault somewhere on segment s". The catalog maps each segment
 * to the protection device that clears it (the boundary device toward the
 * source in the base topology), which is also how raw records are attributed
 * back to segments. */

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gridhard/common.hpp"
#include "gridhard/decision.hpp"
#include "gridhard/network.hpp"

namespace gridhard {

struct OutageRecord {
  std::string id;
  std::string time;          // opaque timestamp string, kept verbatim
  std::string clear_device;  // protection device that operated ("" if none)
  double duration_h = 0;
  double wind_mph = 0;
  double humidity_pct = 0;
  double temp_c = 0;
};

inline constexpr const char* kOutageCsvHeader =
    "id,time,clear_device,duration_h,wind_mph,humidity_pct,temp_c";

inline std::vector<OutageRecord> parse_outage_csv(const std::string& text) {
  std::vector<OutageRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  auto to_d = [&](const std::string& s, const char* field) {
    try {
      size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("outage csv line " + std::to_string(lineno) + ": bad " +
                        std::string(field) + " '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kOutageCsvHeader)
        throw ConfigError("outage csv: unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    auto f = split_csv_line(line);
    if (f.size() != 7)
      throw ConfigError("outage csv line " + std::to_string(lineno) + ": expected 7 fields, got " +
                        std::to_string(f.size()));
    OutageRecord r;
    r.id = f[0];
    r.time = f[1];
    r.clear_device = f[2];
    r.duration_h = to_d(f[3], "duration_h");
    r.wind_mph = to_d(f[4], "wind_mph");
    r.humidity_pct = to_d(f[5], "humidity_pct");
    r.temp_c = to_d(f[6], "temp_c");
    if (r.duration_h <= 0)
      throw ConfigError("outage csv line " + std::to_string(lineno) + ": duration_h must be > 0");
    out.push_back(std::move(r));
  }
  if (!saw_header) throw ConfigError("outage csv: empty file");
  return out;
}

inline std::vector<OutageRecord> read_outage_csv(const std::string& path) {
  return parse_outage_csv(read_text_file(path));
}

inline std::string format_outage_csv(const std::vector<OutageRecord>& recs) {
  std::ostringstream os;
  os << kOutageCsvHeader << "\n";
  char buf[160];
  for (const auto& r : recs) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.1f,%.1f", r.duration_h, r.wind_mph,
                  r.humidity_pct, r.temp_c);
    os << r.id << ',' << r.time << ',' << r.clear_device << ',' << buf << "\n";
  }
  return os.str();
}

inline void write_outage_csv(const std::string& path, const std::vector<OutageRecord>& recs) {
  write_text_file(path, format_outage_csv(recs));
}

struct Scenario {
  int segment = -1;          // index into Network::segments
  std::string id;            // segment id
  std::string clear_device;  // "" when the segment contains the source zone
  double duration_h = 0;     // repair duration used when the scenario strikes
  int n_records = 0;         // records attributed to this scenario
};

struct ScenarioCatalog {
  std::vector<Scenario> scenarios;  // one per segment, in Network::segments order

  size_t size() const { return scenarios.size(); }
  const Scenario& operator[](size_t i) const { return scenarios[i]; }

  int by_device(const std::string& dev) const {
    for (size_t i = 0; i < scenarios.size(); ++i)
      if (scenarios[i].clear_device == dev) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

/* For every protection device in the base tree, the zone on its far side from
 * the source. Returns line index -> zone (or -1 for ties/switches). */
inline std::vector<int> downstream_zone_of_device(const Network& net) {
  // BFS over zones through closed devices starting at source zones.
  size_t nz = static_cast<size_t>(net.n_zones);
  std::vector<int> parent_dev(nz, -1);
  std::vector<char> seen(nz, 0);
  std::vector<int> order;
  for (const auto& n : net.nodes)
    if (n.is_source) {
      int z = net.zone_of_node[static_cast<size_t>(net.node_index(n.id))];
      if (!seen[static_cast<size_t>(z)]) {
        seen[static_cast<size_t>(z)] = 1;
        order.push_back(z);
      }
    }
  for (size_t head = 0; head < order.size(); ++head) {
    int z = order[head];
    for (size_t li = 0; li < net.lines.size(); ++li) {
      const auto& l = net.lines[li];
      if (!l.is_protection()) continue;  // base topology: ties open
      int za = net.zone_of_node[static_cast<size_t>(l.from)];
      int zb = net.zone_of_node[static_cast<size_t>(l.to)];
      int other = -1;
      if (za == z) other = zb;
      else if (zb == z) other = za;
      else continue;
      if (seen[static_cast<size_t>(other)]) continue;
      seen[static_cast<size_t>(other)] = 1;
      parent_dev[static_cast<size_t>(other)] = static_cast<int>(li);
      order.push_back(other);
    }
  }
  std::vector<int> down(net.lines.size(), -1);
  for (size_t z = 0; z < nz; ++z)
    if (parent_dev[z] >= 0) down[static_cast<size_t>(parent_dev[z])] = static_cast<int>(z);
  return down;
}

}  // namespace detail

/* Protection device clearing each segment: the parent device of the segment's
 * zone in the base tree. Segments on a source zone have none (""). */
inline std::vector<std::string> clearing_device_of_segment(const Network& net) {
  auto down = detail::downstream_zone_of_device(net);
  std::vector<std::string> clr(net.segments.size());
  std::vector<int> zone_parent_dev(static_cast<size_t>(net.n_zones), -1);
  for (size_t li = 0; li < down.size(); ++li)
    if (down[li] >= 0) zone_parent_dev[static_cast<size_t>(down[li])] = static_cast<int>(li);
  for (size_t si = 0; si < net.segments.size(); ++si) {
    const auto& seg = net.segments[si];
    int z;
    if (seg.kind == SegmentKind::transformer) {
      z = net.zone_of_node[static_cast<size_t>(seg.transformer_node)];
    } else {
      // zone of any member node
      z = net.zone_of_node[static_cast<size_t>(seg.nodes.front())];
    }
    int pd = zone_parent_dev[static_cast<size_t>(z)];
    clr[si] = pd >= 0 ? net.lines[static_cast<size_t>(pd)].id : std::string();
  }
  return clr;
}

inline ScenarioCatalog build_scenario_catalog(const Network& net,
                                              const std::vector<OutageRecord>& records,
                                              double default_duration_h = 2.0) {
  ScenarioCatalog cat;
  auto clr = clearing_device_of_segment(net);
  std::map<std::string, int> dev_to_scn;
  for (size_t si = 0; si < net.segments.size(); ++si) {
    Scenario s;
    s.segment = static_cast<int>(si);
    s.id = net.segments[si].id;
    s.clear_device = clr[si];
    s.duration_h = default_duration_h;
    cat.scenarios.push_back(std::move(s));
    if (!clr[si].empty()) {
      if (!dev_to_scn.emplace(clr[si], static_cast<int>(si)).second)
        throw ConfigError("device " + clr[si] + " clears more than one segment");
    }
  }
  // attribute records, then replace default durations with per-scenario means
  std::vector<double> dur_sum(cat.size(), 0.0);
  for (const auto& r : records) {
    int si = -1;
    if (r.clear_device.empty()) {
      for (size_t i = 0; i < cat.size(); ++i)
        if (cat.scenarios[i].clear_device.empty()) {
          if (si >= 0) throw ConfigError("record " + r.id + ": ambiguous empty clear_device");
          si = static_cast<int>(i);
        }
    } else {
      auto it = dev_to_scn.find(r.clear_device);
      if (it != dev_to_scn.end()) si = it->second;
    }
    if (si < 0)
      throw ConfigError("record " + r.id + ": clear_device '" + r.clear_device +
                        "' matches no segment");
    cat.scenarios[static_cast<size_t>(si)].n_records += 1;
    dur_sum[static_cast<size_t>(si)] += r.duration_h;
  }
  for (size_t i = 0; i < cat.size(); ++i)
    if (cat.scenarios[i].n_records > 0)
      cat.scenarios[i].duration_h = dur_sum[i] / cat.scenarios[i].n_records;
  return cat;
}

/* One supervised example for the translation regressor: plan bits + weather
 * covariates + observed scenario distribution in, translated distribution out. */
struct TrainingInstance {
  std::vector<double> h;        // binary plan indicator per segment
  std::vector<double> weather;  // wind_mph, humidity_pct, temp_c
  std::vector<double> o;        // observed distribution over scenarios
  std::vector<double> label;    // distribution after applying the plan
};

/* Label rule: a hardened faulted segment keeps its probability scaled by
 * (1 - I); the removed mass spreads evenly over the other scenarios. For a
 * general observed mixture o, apply per-component and re-mix. */
inline std::vector<double> translate_distribution(const std::vector<double>& o,
                                                  const std::vector<double>& I,
                                                  const std::vector<int>& h) {
  size_t S = o.size();
  if (I.size() != S || h.size() != S) throw ConfigError("translate: size mismatch");
  std::vector<double> out(S, 0.0);
  for (size_t s = 0; s < S; ++s) {
    double retained = h[s] ? 1.0 - I[s] : 1.0;
    out[s] += o[s] * retained;
    if (S > 1) {
      double spread = o[s] * (1.0 - retained) / static_cast<double>(S - 1);
      for (size_t t = 0; t < S; ++t)
        if (t != s) out[t] += spread;
    } else {
      out[s] += o[s] * (1.0 - retained);
    }
  }
  return out;
}

inline std::vector<TrainingInstance> construct_training_set(
    const std::vector<OutageRecord>& records, const ScenarioCatalog& cat,
    const HardeningDecision& plan, const ImprovementFactors& factors) {
  size_t S = cat.size();
  if (plan.measures.size() != S) throw ConfigError("plan/catalog size mismatch");
  std::vector<double> I = resolve_improvements(plan, factors);
  std::vector<int> h = plan.h_binary();
  std::map<std::string, int> dev_to_scn;
  int empty_scn = -1;
  for (size_t i = 0; i < S; ++i) {
    if (cat.scenarios[i].clear_device.empty()) empty_scn = static_cast<int>(i);
    else dev_to_scn[cat.scenarios[i].clear_device] = static_cast<int>(i);
  }
  std::vector<TrainingInstance> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    int si = -1;
    if (r.clear_device.empty()) si = empty_scn;
    else {
      auto it = dev_to_scn.find(r.clear_device);
      if (it != dev_to_scn.end()) si = it->second;
    }
    if (si < 0)
      throw ConfigError("record " + r.id + ": clear_device '" + r.clear_device +
                        "' matches no segment");
    TrainingInstance ti;
    ti.h.assign(h.begin(), h.end());
    ti.weather = {r.wind_mph, r.humidity_pct, r.temp_c};
    ti.o.assign(S, 0.0);
    ti.o[static_cast<size_t>(si)] = 1.0;
    ti.label = translate_distribution(ti.o, I, h);
    out.push_back(std::move(ti));
  }
  return out;
}

/* Augmentation: `copies` jittered passes over the base set. Weather gets
 * zero-mean gaussian noise scaled to noise_std_frac of each feature's std;
 * with probability swap_prob the observed fault moves to a uniformly chosen
 * other scenario (labels recomputed). copies=1, noise=0, swap=0 is identity. */
inline std::vector<TrainingInstance> augment_dataset(const std::vector<TrainingInstance>& base,
                                                     const std::vector<double>& I,
                                                     double noise_std_frac, double swap_prob,
                                                     int copies, std::uint64_t seed) {
  if (copies < 1) throw ConfigError("augment: copies must be >= 1");
  if (swap_prob < 0 || swap_prob > 1) throw ConfigError("augment: swap_prob out of range");
  if (base.empty()) return {};
  size_t nw = base[0].weather.size();
  std::vector<double> mean(nw, 0.0), sd(nw, 0.0);
  for (const auto& t : base)
    for (size_t j = 0; j < nw; ++j) mean[j] += t.weather[j];
  for (size_t j = 0; j < nw; ++j) mean[j] /= static_cast<double>(base.size());
  for (const auto& t : base)
    for (size_t j = 0; j < nw; ++j) sd[j] += (t.weather[j] - mean[j]) * (t.weather[j] - mean[j]);
  for (size_t j = 0; j < nw; ++j) sd[j] = std::sqrt(sd[j] / static_cast<double>(base.size()));

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<TrainingInstance> out;
  out.reserve(base.size() * static_cast<size_t>(copies));
  for (int c = 0; c < copies; ++c) {
    for (const auto& t : base) {
      TrainingInstance u = t;
      if (noise_std_frac > 0)
        for (size_t j = 0; j < nw; ++j) u.weather[j] += gauss(rng) * noise_std_frac * sd[j];
      if (swap_prob > 0 && unif(rng) < swap_prob && u.o.size() > 1) {
        size_t cur = static_cast<size_t>(
            std::max_element(u.o.begin(), u.o.end()) - u.o.begin());
        std::uniform_int_distribution<size_t> pick(0, u.o.size() - 2);
        size_t alt = pick(rng);
        if (alt >= cur) ++alt;
        std::fill(u.o.begin(), u.o.end(), 0.0);
        u.o[alt] = 1.0;
        std::vector<int> h(u.h.size());
        for (size_t j = 0; j < h.size(); ++j) h[j] = u.h[j] > 0.5 ? 1 : 0;
        u.label = translate_distribution(u.o, I, h);
      }
      out.push_back(std::move(u));
    }
  }
  return out;
}

}  // namespace gridhard
