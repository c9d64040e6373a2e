#pragma once
// Online robust hardening loop. Each step tightens a ball around the Dirichlet
// mean, takes a projected ascent step on the worst-case distribution for the
// standing plan, re-picks the plan against translated probabilities, then
// feeds the next observed outage back into the posterior.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gridhard/common.hpp"
#include "gridhard/decision.hpp"
#include "gridhard/dirichlet.hpp"
#include "gridhard/mlp.hpp"
#include "gridhard/network.hpp"
#include "gridhard/outage.hpp"
#include "gridhard/projection.hpp"
#include "gridhard/restoration.hpp"

namespace gridhard {

enum class RegretReference : std::uint8_t { none, exact };

struct LearnerOptions {
  long T = 500;
  double delta = 0.05;  // confidence budget spread over the whole run
  double eta = 0.05;    // ascent step on costs scaled to [0, 1]
  int inner_steps = 1;
  size_t enum_cap = 4096;  // above this many plans the outer search goes greedy
  std::uint64_t seed = 1;
  double budget = 0;  // $M
  HardeningSemantics harden_semantics = HardeningSemantics::immunity;
  RegretReference regret_reference = RegretReference::none;
  RestorationOptions restoration;
  ImprovementFactors factors;
};

struct LearnerState {
  long t = 0;             // completed steps
  HardeningDecision h;    // standing plan
  std::vector<double> p;  // current worst-case distribution estimate
  DirichletPosterior posterior;
  double eta = 0.05;
  double cost_bound = 0;   // B: largest single-scenario cost of the bare network
  double path_length = 0;  // L: accumulated squared movement of p
};

struct StepRecord {
  long t = 0;
  double worst_case_cost = 0;  // exact sup of expected cost over the step-t ball
  double learner_cost = 0;     // expected cost of the chosen plan under the iterate p_t
  double d_t = 0;
  double reference_cost = std::numeric_limits<double>::quiet_NaN();
  double regret_term = 0;  // learner_cost - reference_cost + epsilon_t
  double epsilon_t = 0;    // translation residual against ground truth
  std::string h_bits;      // one measure letter per segment
};

struct LearnerResult {
  LearnerState state;
  std::vector<StepRecord> history;
  HardeningDecision recommended;      // exact robust plan on the final learned set
  double recommended_worst_kwh = 0;   // its worst-case expected cost there
  bool stream_exhausted = false;      // ran out of outage records before T
  bool residual_unknown = true;       // no ground truth given, epsilon pinned to 0
};

/* Translates a distribution to what it looks like after a plan is built: the
 * trained net when one is supplied, otherwise the closed-form retention rule
 * the net imitates. Plan scoring conditions the net on training-mean weather. */
class PlanTranslator {
 public:
  PlanTranslator(const ImprovementFactors& factors, const RegressorModel* model)
      : factors_(factors), model_(model) {
    if (model_)
      weather_.assign(model_->feat_mean.data(), model_->feat_mean.data() + model_->feat_mean.size());
  }

  std::vector<double> at_weather(const std::vector<double>& p, const HardeningDecision& d,
                                 const std::vector<double>& weather) const {
    if (model_) {
      std::vector<double> hb;
      hb.reserve(d.measures.size());
      for (int v : d.h_binary()) hb.push_back(static_cast<double>(v));
      return predict(*model_, hb, weather, p);
    }
    return translate_distribution(p, resolve_improvements(d, factors_), d.h_binary());
  }

  std::vector<double> apply(const std::vector<double>& p, const HardeningDecision& d) const {
    return at_weather(p, d, weather_);
  }

  bool has_model() const { return model_ != nullptr; }

 private:
  ImprovementFactors factors_;
  const RegressorModel* model_ = nullptr;
  std::vector<double> weather_;  // training means; standardizes to zero inside the net
};

inline LearnerState init_learner(const Network& net, const ScenarioCatalog& cat,
                                 const LearnerOptions& opt,
                                 const std::vector<double>& prior_counts = {}) {
  if (cat.size() == 0) throw ConfigError("learner: empty scenario catalog");
  if (cat.size() != net.segments.size())
    throw ConfigError("learner: catalog does not match network segments");
  if (!(opt.eta > 0)) throw ConfigError("learner: eta must be positive");
  if (opt.T < 1) throw ConfigError("learner: T must be at least 1");
  if (opt.inner_steps < 1) throw ConfigError("learner: inner_steps must be at least 1");
  if (opt.budget < 0) throw ConfigError("learner: negative budget");
  LearnerState st;
  st.posterior = DirichletPosterior(cat.size(), 1.0);
  if (!prior_counts.empty()) {
    if (prior_counts.size() != cat.size()) throw ConfigError("learner: prior count size mismatch");
    for (double v : prior_counts)
      if (!(v > 0)) throw ConfigError("learner: prior counts must be positive");
    st.posterior.counts = prior_counts;
  }
  Rng rng(opt.seed);
  st.h = random_feasible_decision(net, opt.budget, rng);
  st.p = st.posterior.mean();
  st.eta = opt.eta;
  return st;
}

/* Projected ascent on the expected cost: p <- proj(p + eta * c / B), repeated
 * inner_steps times against the same ball. */
inline std::vector<double> inner_step(const std::vector<double>& p, const std::vector<double>& costs,
                                      double cost_bound, double eta, int steps,
                                      const std::vector<double>& center, double radius) {
  if (steps < 1) throw ConfigError("inner_step: steps must be at least 1");
  if (costs.size() != p.size()) throw ConfigError("inner_step: cost size mismatch");
  double scale = cost_bound > 0 ? cost_bound : 1.0;
  std::vector<double> q = p;
  for (int k = 0; k < steps; ++k) {
    for (size_t s = 0; s < q.size(); ++s) q[s] += eta * costs[s] / scale;
    q = project_ambiguity(q, center, radius);
  }
  return q;
}

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double v = 0;
  for (size_t i = 0; i < a.size(); ++i) v += a[i] * b[i];
  return v;
}

inline double move2(const std::vector<double>& a, const std::vector<double>& b) {
  double v = 0;
  for (size_t i = 0; i < a.size(); ++i) v += (a[i] - b[i]) * (a[i] - b[i]);
  return v;
}

inline bool improves(double v, double best) {
  if (!std::isfinite(best)) return true;  // first candidate
  return v < best - 1e-12 * std::max(1.0, std::abs(best));
}

}  // namespace detail

struct PlanSearchResult {
  HardeningDecision h;
  double objective = 0;
  bool enumerated = true;  // false when the greedy path ran
};

/* Greedy growth from the empty plan by best marginal improvement, then 1-swap
 * polish (drop, re-measure, or relocate one chosen measure). Deterministic:
 * candidates scan in segment-then-measure order and only strict improvements
 * move, so ties keep the earlier (lexicographically smaller) plan. */
inline PlanSearchResult greedy_plan_search(const Network& net, double budget,
                                           const std::function<double(const HardeningDecision&)>& obj) {
  static constexpr Measure kOpts[3] = {Measure::pole, Measure::underground, Measure::padmount};
  HardeningDecision cur = HardeningDecision::none_of(net);
  double cv = obj(cur);
  for (;;) {
    HardeningDecision best = cur;
    double bv = cv;
    for (size_t i = 0; i < net.segments.size(); ++i) {
      if (cur.measures[i] != Measure::none) continue;
      for (Measure m : kOpts) {
        if (!measure_allowed(net.segments[i], m)) continue;
        HardeningDecision cand = cur;
        cand.measures[i] = m;
        if (!decision_feasible(net, cand, budget)) continue;
        double v = obj(cand);
        if (detail::improves(v, bv)) {
          best = cand;
          bv = v;
        }
      }
    }
    if (best == cur) break;
    cur = best;
    cv = bv;
  }
  for (int pass = 0; pass < 64; ++pass) {
    bool moved = false;
    for (size_t i = 0; i < net.segments.size() && !moved; ++i) {
      if (cur.measures[i] == Measure::none) continue;
      HardeningDecision drop = cur;
      drop.measures[i] = Measure::none;
      std::vector<HardeningDecision> cands{drop};
      for (Measure m : kOpts) {
        if (m == cur.measures[i] || !measure_allowed(net.segments[i], m)) continue;
        HardeningDecision c2 = drop;
        c2.measures[i] = m;
        cands.push_back(c2);
      }
      for (size_t j = 0; j < net.segments.size(); ++j) {
        if (j == i || drop.measures[j] != Measure::none) continue;
        for (Measure m : kOpts) {
          if (!measure_allowed(net.segments[j], m)) continue;
          HardeningDecision c2 = drop;
          c2.measures[j] = m;
          cands.push_back(c2);
        }
      }
      for (const auto& c2 : cands) {
        if (!decision_feasible(net, c2, budget)) continue;
        double v = obj(c2);
        if (detail::improves(v, cv)) {
          cur = c2;
          cv = v;
          moved = true;
          break;
        }
      }
    }
    if (!moved) break;
  }
  return {cur, cv, false};
}

/* Budget-feasible plan minimizing obj. Full enumeration while the plan count
 * stays within enum_cap (plans come out lexicographically sorted, so keeping
 * the first strict minimum resolves ties), greedy + 1-swap beyond it. */
inline PlanSearchResult minimize_over_plans(const Network& net, double budget, size_t enum_cap,
                                            const std::function<double(const HardeningDecision&)>& obj) {
  std::vector<HardeningDecision> plans;
  try {
    plans = feasible_decisions(net, budget, enum_cap);
  } catch (const SolveError&) {
    return greedy_plan_search(net, budget, obj);
  }
  PlanSearchResult best;
  double bv = std::numeric_limits<double>::infinity();
  for (const auto& d : plans) {
    double v = obj(d);
    if (detail::improves(v, bv)) {
      best.h = d;
      bv = v;
    }
  }
  if (!std::isfinite(bv)) throw SolveError("plan search found no feasible plan");
  best.objective = bv;
  best.enumerated = true;
  return best;
}

/* Picks the plan whose expected cost is smallest once the current worst-case
 * distribution is translated to reflect that plan being built. */
inline PlanSearchResult outer_minimize(const Network& net, const ScenarioCatalog& cat,
                                       const std::vector<double>& p, const PlanTranslator& tr,
                                       CostTable& table, const LearnerOptions& opt) {
  auto obj = [&](const HardeningDecision& d) {
    auto costs = scenario_costs(net, cat, d, table, opt.restoration, opt.harden_semantics);
    return detail::dot(tr.apply(p, d), costs);
  };
  return minimize_over_plans(net, opt.budget, opt.enum_cap, obj);
}

struct ExactDro {
  HardeningDecision h;
  double value = 0;  // worst-case expected cost of h over the ball
};

/* Exact robust minimizer: enumerates every budget-feasible plan and maximizes
 * the expectation over the ball for each. Errors past the enumeration cap. */
inline ExactDro exact_dro_reference(const Network& net, const ScenarioCatalog& cat, CostTable& table,
                                    const std::vector<double>& center, double radius, double budget,
                                    size_t enum_cap, const RestorationOptions& ropt = {},
                                    HardeningSemantics sem = HardeningSemantics::immunity) {
  std::vector<HardeningDecision> plans;
  try {
    plans = feasible_decisions(net, budget, enum_cap);
  } catch (const SolveError&) {
    throw SolveError("exact reference needs full enumeration; plan count exceeds cap");
  }
  ExactDro best;
  double bv = std::numeric_limits<double>::infinity();
  for (const auto& d : plans) {
    auto costs = scenario_costs(net, cat, d, table, ropt, sem);
    double v = worst_case_distribution(costs, center, radius).value;
    if (detail::improves(v, bv)) {
      best = {d, v};
      bv = v;
    }
  }
  if (!std::isfinite(bv)) throw SolveError("exact reference found no feasible plan");
  return best;
}

/* Full online run. Per step: ball update, ascent on the standing plan's costs,
 * plan re-selection, regret bookkeeping, posterior update from the next
 * record. Deterministic given (options.seed, stream order). truth_pmf, when
 * given, is the stationary scenario distribution used for the translation
 * residual; left empty the residual is reported as 0 and flagged unknown. */
inline LearnerResult run_learner(const Network& net, const ScenarioCatalog& cat,
                                 const std::vector<OutageRecord>& stream, const LearnerOptions& opt,
                                 const RegressorModel* model = nullptr,
                                 const std::vector<double>& truth_pmf = {},
                                 CostTable* shared_table = nullptr) {
  LearnerState st = init_learner(net, cat, opt);
  CostTable local;
  CostTable& table = shared_table ? *shared_table : local;
  PlanTranslator tr(opt.factors, model);
  const size_t S = cat.size();
  if (!truth_pmf.empty() && truth_pmf.size() != S)
    throw ConfigError("learner: truth pmf size mismatch");

  // B from the bare network; hardening can only remove faults, never add cost
  auto bare = scenario_costs(net, cat, HardeningDecision::none_of(net), table, opt.restoration,
                             opt.harden_semantics);
  st.cost_bound = *std::max_element(bare.begin(), bare.end());
  if (!(st.cost_bound > 0)) st.cost_bound = 1.0;

  // plan set and per-plan cost vectors are step-invariant: hoist them
  std::vector<HardeningDecision> plans;
  std::vector<std::vector<double>> plan_costs;
  bool enumerated = true;
  try {
    plans = feasible_decisions(net, opt.budget, opt.enum_cap);
  } catch (const SolveError&) {
    enumerated = false;
    plans.clear();
  }
  if (enumerated)
    for (const auto& d : plans)
      plan_costs.push_back(scenario_costs(net, cat, d, table, opt.restoration, opt.harden_semantics));
  if (opt.regret_reference == RegretReference::exact && !enumerated)
    throw SolveError("exact regret reference needs full enumeration; raise enum_cap");

  LearnerResult out;
  out.residual_unknown = truth_pmf.empty();
  out.history.reserve(static_cast<size_t>(opt.T));

  size_t used = 0;
  for (long t = 1; t <= opt.T; ++t) {
    if (used >= stream.size()) {
      out.stream_exhausted = true;
      break;
    }
    const OutageRecord& rec = stream[used++];

    // one ambiguity set per step: posterior mean center, shrinking radius
    std::vector<double> center = st.posterior.mean();
    double d_t = ambiguity_radius(t, S, opt.delta);

    auto cost_prev = scenario_costs(net, cat, st.h, table, opt.restoration, opt.harden_semantics);
    std::vector<double> p_prev = st.p;
    st.p = inner_step(st.p, cost_prev, st.cost_bound, st.eta, opt.inner_steps, center, d_t);
    st.path_length += detail::move2(st.p, p_prev);

    std::vector<double> cost_now;
    if (enumerated) {
      double bv = std::numeric_limits<double>::infinity();
      size_t bi = 0;
      for (size_t i = 0; i < plans.size(); ++i) {
        double v = detail::dot(tr.apply(st.p, plans[i]), plan_costs[i]);
        if (detail::improves(v, bv)) {
          bv = v;
          bi = i;
        }
      }
      st.h = plans[bi];
      cost_now = plan_costs[bi];
    } else {
      st.h = outer_minimize(net, cat, st.p, tr, table, opt).h;
      cost_now = scenario_costs(net, cat, st.h, table, opt.restoration, opt.harden_semantics);
    }

    StepRecord row;
    row.t = t;
    row.d_t = d_t;
    row.h_bits = st.h.bits(net);
    row.learner_cost = detail::dot(st.p, cost_now);
    row.worst_case_cost = worst_case_distribution(cost_now, center, d_t).value;

    if (!truth_pmf.empty()) {
      auto believed = tr.apply(center, st.h);
      auto actual = translate_distribution(truth_pmf, resolve_improvements(st.h, opt.factors),
                                           st.h.h_binary());
      row.epsilon_t = std::sqrt(detail::move2(believed, actual));
    }
    if (opt.regret_reference == RegretReference::exact) {
      double bv = std::numeric_limits<double>::infinity();
      size_t bi = 0;
      for (size_t i = 0; i < plans.size(); ++i) {
        double v = worst_case_distribution(plan_costs[i], center, d_t).value;
        if (detail::improves(v, bv)) {
          bv = v;
          bi = i;
        }
      }
      row.reference_cost = detail::dot(st.p, plan_costs[bi]);
      row.regret_term = row.learner_cost - row.reference_cost + row.epsilon_t;
    }

    int si = rec.clear_device.empty() ? -1 : cat.by_device(rec.clear_device);
    if (si < 0 && rec.clear_device.empty())
      for (size_t k = 0; k < S; ++k)
        if (cat.scenarios[k].clear_device.empty()) si = static_cast<int>(k);
    if (si < 0)
      throw SolveError("step " + std::to_string(t) + ": record " + rec.id + " clear_device '" +
                       rec.clear_device + "' matches no scenario");
    std::vector<double> o(S, 0.0);
    o[static_cast<size_t>(si)] = 1.0;
    auto translated = tr.at_weather(o, st.h, {rec.wind_mph, rec.humidity_pct, rec.temp_c});
    bayes_update(st.posterior, translated);

    out.history.push_back(std::move(row));
    st.t = t;
  }

  // deployment plan: the online iterate can flip for single steps when the
  // ascent drains all mass from a hardened scenario (exact objective tie), so
  // the plan to build comes from an exact robust solve on the final set
  {
    std::vector<double> center = st.posterior.mean();
    double d_fin = ambiguity_radius(std::max<long>(st.t, 1), S, opt.delta);
    auto obj = [&](const HardeningDecision& d) {
      auto costs = scenario_costs(net, cat, d, table, opt.restoration, opt.harden_semantics);
      return worst_case_distribution(costs, center, d_fin).value;
    };
    auto r = minimize_over_plans(net, opt.budget, opt.enum_cap, obj);
    out.recommended = r.h;
    out.recommended_worst_kwh = r.objective;
  }

  out.state = std::move(st);
  return out;
}

struct RegretSummary {
  double regret = 0;  // averaged dynamic regret D_T
  double bound = 0;   // B sqrt(L/T) + (B+1) (sum of radii)/T
  double sum_radius = 0;
  long steps = 0;
  bool has_reference = false;   // every step carried an exact reference cost
  bool residual_unknown = false;
};

/* Averaged dynamic regret from the stored per-step terms, plus the bound the
 * run promises: ascent movement gives B sqrt(L/T); center drift and the
 * translation residual are each inside the step-t ball, giving the radius
 * sum term. Accumulation is plain left-to-right so a recompute from the
 * history reproduces the value bit for bit. */
inline RegretSummary dynamic_regret(const LearnerResult& res) {
  if (res.history.empty()) throw ConfigError("dynamic_regret: empty history");
  RegretSummary rs;
  rs.steps = static_cast<long>(res.history.size());
  rs.residual_unknown = res.residual_unknown;
  rs.has_reference = true;
  double sum = 0;
  for (const auto& r : res.history) {
    sum += r.regret_term;
    rs.sum_radius += r.d_t;
    if (!std::isfinite(r.reference_cost)) rs.has_reference = false;
  }
  double T = static_cast<double>(rs.steps);
  rs.regret = sum / T;
  double B = res.state.cost_bound;
  rs.bound = B * std::sqrt(res.state.path_length / T) + (B + 1.0) * rs.sum_radius / T;
  return rs;
}

inline std::string history_to_csv(const std::vector<StepRecord>& history) {
  std::string s = "t,worst_case_cost,d_t,regret_term,epsilon_t,h_bits\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%s\n", r.t, r.worst_case_cost,
                  r.d_t, r.regret_term, r.epsilon_t, r.h_bits.c_str());
    s += buf;
  }
  return s;
}

}  // namespace gridhard
