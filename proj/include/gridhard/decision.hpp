#pragma once

/* Hardening plans over line segments: pole upgrade or undergrounding on
 * feeder segments, pad-mount conversion on transformers. At most one measure
 * per segment; plans are priced against the per-segment $M tags. */

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridhard/network.hpp"

namespace gridhard {

enum class Measure : std::uint8_t { none = 0, pole = 1, underground = 2, padmount = 3 };

inline char measure_char(Measure m) {
  switch (m) {
    case Measure::none: return 'N';
    case Measure::pole: return 'P';
    case Measure::underground: return 'U';
    case Measure::padmount: return 'D';
  }
  return '?';
}

struct HardeningDecision {
  std::vector<Measure> measures;  // aligned with Network::segments

  bool operator==(const HardeningDecision& o) const = default;

  static HardeningDecision none_of(const Network& net) {
    HardeningDecision d;
    d.measures.assign(net.segments.size(), Measure::none);
    return d;
  }

  double cost(const Network& net) const {
    double c = 0;
    for (size_t i = 0; i < measures.size(); ++i) {
      const auto& seg = net.segments[i];
      switch (measures[i]) {
        case Measure::none: break;
        case Measure::pole: c += seg.cost_pl; break;
        case Measure::underground: c += seg.cost_ud; break;
        case Measure::padmount: c += seg.cost_pd; break;
      }
    }
    return c;
  }

  // one char per segment in catalog order, e.g. "UNP:D" without the colon
  std::string bits(const Network& net) const {
    (void)net;
    std::string s;
    for (Measure m : measures) s += measure_char(m);
    return s;
  }

  std::vector<int> h_binary() const {
    std::vector<int> h(measures.size());
    for (size_t i = 0; i < measures.size(); ++i) h[i] = measures[i] == Measure::none ? 0 : 1;
    return h;
  }
};

inline bool measure_allowed(const LineSegment& seg, Measure m) {
  switch (m) {
    case Measure::none: return true;
    case Measure::pole: return seg.kind == SegmentKind::feeder && !seg.no_pole;
    case Measure::underground: return seg.kind == SegmentKind::feeder && !seg.no_underground;
    case Measure::padmount: return seg.kind == SegmentKind::transformer;
  }
  return false;
}

inline bool decision_feasible(const Network& net, const HardeningDecision& d, double budget) {
  if (d.measures.size() != net.segments.size()) return false;
  for (size_t i = 0; i < d.measures.size(); ++i)
    if (!measure_allowed(net.segments[i], d.measures[i])) return false;
  return d.cost(net) <= budget + 1e-9;
}

/* All budget-feasible plans in lexicographic order (per segment:
 * none < pole < underground, none < padmount). */
inline std::vector<HardeningDecision> feasible_decisions(const Network& net, double budget,
                                                         size_t cap = 1u << 22) {
  std::vector<HardeningDecision> out;
  HardeningDecision cur = HardeningDecision::none_of(net);
  const size_t n = net.segments.size();
  std::vector<std::vector<Measure>> options(n);
  for (size_t i = 0; i < n; ++i) {
    options[i].push_back(Measure::none);
    const auto& seg = net.segments[i];
    if (measure_allowed(seg, Measure::pole)) options[i].push_back(Measure::pole);
    if (measure_allowed(seg, Measure::underground)) options[i].push_back(Measure::underground);
    if (measure_allowed(seg, Measure::padmount)) options[i].push_back(Measure::padmount);
  }
  // DFS with running cost; options per segment are cheapest-first only by
  // convention of the enum order, so prune on the explicit running total.
  std::vector<size_t> pick(n, 0);
  double run_cost = 0;
  size_t level = 0;
  auto seg_cost = [&](size_t i, Measure m) {
    const auto& seg = net.segments[i];
    switch (m) {
      case Measure::pole: return seg.cost_pl;
      case Measure::underground: return seg.cost_ud;
      case Measure::padmount: return seg.cost_pd;
      default: return 0.0;
    }
  };
  while (true) {
    if (level == n) {
      out.push_back(cur);
      if (out.size() > cap) throw SolveError("feasible decision set exceeds cap");
      // backtrack
      while (level > 0) {
        --level;
        run_cost -= seg_cost(level, cur.measures[level]);
        if (++pick[level] < options[level].size()) break;
        pick[level] = 0;
      }
      if (level == 0 && pick[0] == 0) break;
    }
    Measure m = options[level][pick[level]];
    if (run_cost + seg_cost(level, m) <= budget + 1e-9) {
      cur.measures[level] = m;
      run_cost += seg_cost(level, m);
      ++level;
    } else {
      // infeasible choice: advance at this level or backtrack
      while (true) {
        if (++pick[level] < options[level].size()) break;
        pick[level] = 0;
        if (level == 0) return out;
        --level;
        run_cost -= seg_cost(level, cur.measures[level]);
      }
    }
  }
  return out;
}

struct ImprovementFactors {
  double pole = 0.6;
  double underground = 0.95;
  double padmount = 0.9;

  double of(Measure m) const {
    switch (m) {
      case Measure::pole: return pole;
      case Measure::underground: return underground;
      case Measure::padmount: return padmount;
      default: return 0.0;
    }
  }
};

// Fragility improvement per segment under a plan; 0 where untouched.
inline std::vector<double> resolve_improvements(const HardeningDecision& d,
                                                const ImprovementFactors& f) {
  std::vector<double> I(d.measures.size(), 0.0);
  for (size_t i = 0; i < d.measures.size(); ++i) I[i] = f.of(d.measures[i]);
  return I;
}

inline nlohmann::json decision_to_json(const Network& net, const HardeningDecision& d) {
  nlohmann::json j = nlohmann::json::object();
  for (size_t i = 0; i < d.measures.size(); ++i) {
    const char* name = nullptr;
    switch (d.measures[i]) {
      case Measure::none: continue;
      case Measure::pole: name = "pole"; break;
      case Measure::underground: name = "underground"; break;
      case Measure::padmount: name = "padmount"; break;
    }
    j[net.segments[i].id] = name;
  }
  return j;
}

inline HardeningDecision decision_from_json(const Network& net, const nlohmann::json& j) {
  HardeningDecision d = HardeningDecision::none_of(net);
  for (auto it = j.begin(); it != j.end(); ++it) {
    int si = net.segment_index(it.key());
    std::string v = it.value().get<std::string>();
    Measure m;
    if (v == "pole") m = Measure::pole;
    else if (v == "underground") m = Measure::underground;
    else if (v == "padmount") m = Measure::padmount;
    else if (v == "none") m = Measure::none;
    else throw ConfigError("unknown measure: " + v);
    if (!measure_allowed(net.segments[static_cast<size_t>(si)], m))
      throw ConfigError("measure " + v + " not allowed on " + it.key());
    d.measures[static_cast<size_t>(si)] = m;
  }
  return d;
}

// Seeded uniform pick among budget-feasible plans (used for initial plans).
inline HardeningDecision random_feasible_decision(const Network& net, double budget, Rng& rng,
                                                  int tries = 64) {
  HardeningDecision d = HardeningDecision::none_of(net);
  for (int t = 0; t < tries; ++t) {
    HardeningDecision cand = HardeningDecision::none_of(net);
    for (size_t i = 0; i < net.segments.size(); ++i) {
      std::vector<Measure> opts{Measure::none};
      if (measure_allowed(net.segments[i], Measure::pole)) opts.push_back(Measure::pole);
      if (measure_allowed(net.segments[i], Measure::underground)) opts.push_back(Measure::underground);
      if (measure_allowed(net.segments[i], Measure::padmount)) opts.push_back(Measure::padmount);
      cand.measures[i] = opts[std::uniform_int_distribution<size_t>(0, opts.size() - 1)(rng)];
    }
    if (decision_feasible(net, cand, budget)) return cand;
    d = cand;
  }
  // fall back: strip measures until affordable
  for (size_t i = 0; i < d.measures.size() && !decision_feasible(net, d, budget); ++i)
    d.measures[i] = Measure::none;
  return d;
}

}  // namespace gridhard
