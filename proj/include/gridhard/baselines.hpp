#pragma once
// Benchmark planning strategies sharing one plan search and one cost oracle:
// robust (worst scenario), stochastic (fixed probabilities), and static
// distributionally robust (worst case over a fixed ball). Plus a Monte Carlo
// harness that replays fixed plans against the synthetic ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "gridhard/common.hpp"
#include "gridhard/decision.hpp"
#include "gridhard/learner.hpp"
#include "gridhard/network.hpp"
#include "gridhard/outage.hpp"
#include "gridhard/projection.hpp"
#include "gridhard/restoration.hpp"
#include "gridhard/synth.hpp"

namespace gridhard {

struct StaticSolveResult {
  HardeningDecision h;
  double objective = 0;
  bool enumerated = true;
};

/* Worst case over a fixed ball around `center`. Radius 0 degenerates to the
 * plain expectation and any radius >= sqrt(2) to the worst vertex; both land
 * on exact early returns inside the ball maximizer, so the stochastic and
 * robust solvers below reuse this very code path bit for bit. */
inline StaticSolveResult solve_dro_static(const Network& net, const ScenarioCatalog& cat,
                                          const std::vector<double>& center, double radius,
                                          double budget, CostTable& table, size_t enum_cap = 4096,
                                          const RestorationOptions& ropt = {},
                                          HardeningSemantics sem = HardeningSemantics::immunity) {
  if (center.size() != cat.size()) throw ConfigError("dro_static: center size mismatch");
  if (radius < 0) throw ConfigError("dro_static: negative radius");
  double sum = 0;
  for (double v : center) {
    if (v < -1e-9) throw ConfigError("dro_static: negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("dro_static: probabilities must sum to 1");
  auto obj = [&](const HardeningDecision& d) {
    auto costs = scenario_costs(net, cat, d, table, ropt, sem);
    return worst_case_distribution(costs, center, radius).value;
  };
  auto r = minimize_over_plans(net, budget, enum_cap, obj);
  return {r.h, r.objective, r.enumerated};
}

/* Robust baseline: minimize the worst single-scenario cost. */
inline StaticSolveResult solve_ro(const Network& net, const ScenarioCatalog& cat, double budget,
                                  CostTable& table, size_t enum_cap = 4096,
                                  const RestorationOptions& ropt = {},
                                  HardeningSemantics sem = HardeningSemantics::immunity) {
  std::vector<double> uniform(cat.size(), 1.0 / static_cast<double>(cat.size()));
  return solve_dro_static(net, cat, uniform, std::sqrt(2.0), budget, table, enum_cap, ropt, sem);
}

/* Stochastic baseline: minimize the expected cost under fixed probabilities.
 * Under probability-only semantics the probabilities are translated per plan
 * (hardening reshapes the distribution instead of erasing the fault). */
inline StaticSolveResult solve_sp(const Network& net, const ScenarioCatalog& cat,
                                  const std::vector<double>& probs, double budget, CostTable& table,
                                  size_t enum_cap = 4096, const RestorationOptions& ropt = {},
                                  HardeningSemantics sem = HardeningSemantics::immunity,
                                  const ImprovementFactors& factors = {}) {
  if (probs.size() != cat.size()) throw ConfigError("sp: probability size mismatch");
  if (sem == HardeningSemantics::probability_only) {
    auto obj = [&](const HardeningDecision& d) {
      auto p = translate_distribution(probs, resolve_improvements(d, factors), d.h_binary());
      auto costs = scenario_costs(net, cat, d, table, ropt, sem);
      return worst_case_distribution(costs, p, 0.0).value;
    };
    auto r = minimize_over_plans(net, budget, enum_cap, obj);
    return {r.h, r.objective, r.enumerated};
  }
  return solve_dro_static(net, cat, probs, 0.0, budget, table, enum_cap, ropt, sem);
}

struct Strategy {
  std::string name;
  HardeningDecision h;
};

struct StrategyOutcome {
  std::string name;
  double mean_kwh = 0;
  double lo_kwh = 0;
  double hi_kwh = 0;
  std::vector<double> trial_means;
};

struct TrialReport {
  std::vector<StrategyOutcome> strategies;
  int n_trials = 0;
  int n_scen = 0;
  double percentile = 0;  // 0 reports min/max, else the [p, 100-p] band
};

/* Replays each fixed plan against fresh event draws from the ground truth:
 * per trial, n_scen faulted segments are sampled (wind then fault), costed
 * with the shared restoration table, and averaged. Every strategy sees the
 * same draws. Trial i uses its own stream seeded from (seed, i), so results
 * are reproducible independent of evaluation order. */
inline TrialReport compare_trials(const Network& net, const ScenarioCatalog& cat,
                                  const std::vector<Strategy>& strategies,
                                  const GroundTruthModel& truth, int n_trials = 50,
                                  int n_scen = 50, std::uint64_t seed = 1, double percentile = 0,
                                  CostTable* shared_table = nullptr,
                                  const RestorationOptions& ropt = {},
                                  HardeningSemantics sem = HardeningSemantics::immunity) {
  if (strategies.empty()) throw ConfigError("compare_trials: no strategies");
  if (n_trials < 1 || n_scen < 1) throw ConfigError("compare_trials: trials and events must be >= 1");
  if (percentile < 0 || percentile >= 50)
    throw ConfigError("compare_trials: percentile must lie in [0, 50)");
  if (truth.segments.size() != cat.size())
    throw ConfigError("compare_trials: truth does not match catalog");

  CostTable local;
  CostTable& table = shared_table ? *shared_table : local;
  std::vector<std::vector<double>> costs;
  costs.reserve(strategies.size());
  for (const auto& s : strategies)
    costs.push_back(scenario_costs(net, cat, s.h, table, ropt, sem));

  TrialReport rep;
  rep.n_trials = n_trials;
  rep.n_scen = n_scen;
  rep.percentile = percentile;
  rep.strategies.resize(strategies.size());
  for (size_t k = 0; k < strategies.size(); ++k) {
    rep.strategies[k].name = strategies[k].name;
    rep.strategies[k].trial_means.assign(static_cast<size_t>(n_trials), 0.0);
  }

  for (int trial = 0; trial < n_trials; ++trial) {
    Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(trial + 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> sums(strategies.size(), 0.0);
    for (int ev = 0; ev < n_scen; ++ev) {
      double w = detail::truncated_normal(rng, gauss, truth.wind_mean, truth.wind_std,
                                          truth.wind_min, truth.wind_max);
      auto pmf = fault_pmf_given_wind(truth, w);
      double u = U(rng), acc = 0;
      size_t s = pmf.size() - 1;
      for (size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        if (u <= acc) {
          s = i;
          break;
        }
      }
      for (size_t k = 0; k < strategies.size(); ++k) sums[k] += costs[k][s];
    }
    for (size_t k = 0; k < strategies.size(); ++k)
      rep.strategies[k].trial_means[static_cast<size_t>(trial)] =
          sums[k] / static_cast<double>(n_scen);
  }

  for (auto& so : rep.strategies) {
    double total = 0;
    for (double v : so.trial_means) total += v;
    so.mean_kwh = total / static_cast<double>(n_trials);
    std::vector<double> sorted = so.trial_means;
    std::sort(sorted.begin(), sorted.end());
    if (percentile == 0) {
      so.lo_kwh = sorted.front();
      so.hi_kwh = sorted.back();
    } else {
      auto rank = [&](double p) {
        auto idx = static_cast<size_t>(std::llround(p / 100.0 * (sorted.size() - 1)));
        return sorted[std::min(idx, sorted.size() - 1)];
      };
      so.lo_kwh = rank(percentile);
      so.hi_kwh = rank(100.0 - percentile);
    }
  }
  return rep;
}

inline std::string report_to_csv(const TrialReport& rep) {
  std::string s = "strategy,mean_kwh,lo_kwh,hi_kwh,n_trials,n_scen\n";
  char buf[256];
  for (const auto& so : rep.strategies) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%d,%d\n", so.name.c_str(), so.mean_kwh,
                  so.lo_kwh, so.hi_kwh, rep.n_trials, rep.n_scen);
    s += buf;
  }
  return s;
}

}  // namespace gridhard
