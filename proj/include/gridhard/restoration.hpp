#pragma once

/* Post-fault service restoration by network reconfiguration.
 *
 * A fault on a segment forces all of the segment's boundary devices open and
 * de-energizes its zone; the solver then picks switch states that minimize
 * weighted unserved load (tier 1, linearized flow) or unserved load plus
 * losses (tier 2, flow with squared-current variables and outer-approximation
 * cuts on the conic current-voltage coupling).
 *
 * Radiality uses the usual fictitious single-commodity construction: a binary
 * topology edge per device must form a spanning forest with one source per
 * tree, and the electrically closed set is a subset of it. Energization is
 * tracked per zone (wires never open, so nodes inside a zone stand or fall
 * together), and per-node served fractions are continuous.
 *
 * solve_config_flow evaluates one fully specified switch configuration with a
 * plain LP on the energized subnetwork; solve_restoration re-evaluates its
 * chosen configuration through the same function so both report identical
 * numbers, and brute_force_oracle enumerates configurations with it. */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "gridhard/decision.hpp"
#include "gridhard/milp.hpp"
#include "gridhard/network.hpp"
#include "gridhard/outage.hpp"

namespace gridhard {

using FaultMask = std::uint64_t;  // bit i = segment i faulted

inline FaultMask fault_on(int segment) { return FaultMask{1} << segment; }

/* Hardened segments shrug the fault off entirely; under probability-only
 * semantics hardening moves likelihood (via the translation model) but a
 * fault that does land plays out unhardened. */
enum class HardeningSemantics : std::uint8_t { immunity, probability_only };

inline FaultMask effective_faults(FaultMask fault, const HardeningDecision& d,
                                  HardeningSemantics sem) {
  if (sem == HardeningSemantics::probability_only) return fault;
  FaultMask out = fault;
  for (size_t i = 0; i < d.measures.size(); ++i)
    if (d.measures[i] != Measure::none) out &= ~(FaultMask{1} << i);
  return out;
}

struct RestorationOptions {
  int tier = 1;
  double vmin = 0.95, vmax = 1.05;  // p.u. voltage band
  double sbase_kw = 1000.0;
  double big_m_scale = 1.0;       // test hook: results must not move with it
  double cone_target = 1e-6;      // cut loop stops below this residual (p.u.^2)
  int cone_max_rounds = 40;
  lp::MipOptions mip;
};

struct ConfigFlowResult {
  bool feasible = false;
  double unserved_kw = 0;  // weight-scaled unserved active power
  double loss_kw = 0;      // tier 2 only; tier 1 estimates post hoc
  double max_cone_residual = 0;
  std::vector<double> beta;     // served fraction per node
  std::vector<char> energized;  // per node
};

struct RestorationResult {
  bool feasible = false;
  double unserved_kw = 0;
  double loss_kw = 0;
  double f1_kwh = 0;  // duration * unserved_kw
  double f2_kwh = 0;  // duration * loss_kw
  double max_cone_residual = 0;
  long bb_nodes = 0;
  std::vector<char> closed;                  // per line; wires reported closed
  std::vector<std::string> closed_devices;   // sorted ids
  std::vector<double> beta;
  std::vector<char> energized;
};

namespace detail {

struct FaultSets {
  std::vector<char> zone_dead;    // per zone
  std::vector<char> force_open;   // per line
};

inline FaultSets fault_sets(const Network& net, FaultMask fault) {
  FaultSets fs;
  fs.zone_dead.assign(static_cast<size_t>(net.n_zones), 0);
  fs.force_open.assign(net.lines.size(), 0);
  for (size_t si = 0; si < net.segments.size(); ++si) {
    if (!(fault & (FaultMask{1} << si))) continue;
    const auto& seg = net.segments[si];
    int z = seg.kind == SegmentKind::transformer
                ? net.zone_of_node[static_cast<size_t>(seg.transformer_node)]
                : net.zone_of_node[static_cast<size_t>(seg.nodes.front())];
    fs.zone_dead[static_cast<size_t>(z)] = 1;
    for (const auto& dev : seg.boundary_devices)
      fs.force_open[static_cast<size_t>(net.line_index(dev))] = 1;
  }
  return fs;
}

inline double line_smax(const Network& net, const Line& l, double vmax) {
  (void)net;
  return std::sqrt(std::max(l.i_max, 0.0)) * vmax;  // |S| <= |V||I| bound, p.u.
}

/* Cap for a squared-current column. The cone can never push I above
 * (P^2+Q^2)/V at the flow caps, so huge "no thermal limit" ratings stay out
 * of the constraint matrix, which they would otherwise wreck numerically. */
inline double line_i_cap(const Line& l, double smax, double vlo) {
  double need = 2.0 * smax * smax / std::max(vlo, 1e-9);
  return std::min(std::max(l.i_max, 0.0), need);
}

/* Closed-graph structure check shared by the oracle: union-find over wires
 * plus closed devices; rejects cycles and components holding two sources. */
inline bool closed_graph_ok(const Network& net, const std::vector<char>& closed) {
  std::vector<int> root(net.nodes.size());
  for (size_t i = 0; i < root.size(); ++i) root[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int a) {
    while (root[static_cast<size_t>(a)] != a) {
      root[static_cast<size_t>(a)] = root[static_cast<size_t>(root[static_cast<size_t>(a)])];
      a = root[static_cast<size_t>(a)];
    }
    return a;
  };
  for (size_t li = 0; li < net.lines.size(); ++li) {
    const auto& l = net.lines[li];
    bool on = l.is_device() ? closed[li] != 0 : true;
    if (!on) continue;
    int a = find(l.from), b = find(l.to);
    if (a == b) return false;  // cycle
    root[static_cast<size_t>(a)] = b;
  }
  std::map<int, int> src_count;
  for (const auto& n : net.nodes)
    if (n.is_source && ++src_count[find(net.node_index(n.id))] > 1) return false;
  return true;
}

inline std::vector<char> energized_nodes(const Network& net, const std::vector<char>& closed,
                                         const FaultSets& fs) {
  std::vector<char> on(net.nodes.size(), 0);
  std::vector<int> stack;
  for (size_t ni = 0; ni < net.nodes.size(); ++ni)
    if (net.nodes[ni].is_source &&
        !fs.zone_dead[static_cast<size_t>(net.zone_of_node[ni])]) {
      on[ni] = 1;
      stack.push_back(static_cast<int>(ni));
    }
  // adjacency on demand: wires always conduct, devices when closed
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    for (size_t li = 0; li < net.lines.size(); ++li) {
      const auto& l = net.lines[li];
      if (l.is_device() && !closed[li]) continue;
      int other = -1;
      if (l.from == n) other = l.to;
      else if (l.to == n) other = l.from;
      else continue;
      if (on[static_cast<size_t>(other)]) continue;
      if (fs.zone_dead[static_cast<size_t>(net.zone_of_node[static_cast<size_t>(other)])]) continue;
      on[static_cast<size_t>(other)] = 1;
      stack.push_back(other);
    }
  }
  return on;
}

struct ConeCut {
  // cut anchored on one arc-phase triple (P, Q, I) plus the tail voltage
  int p_col, q_col, i_col, v_col;
  double up, uq, ui;  // unit normal in (2P, 2Q, I - V) space
};

inline void add_cone_cut_row(lp::Lp& lp, const ConeCut& c) {
  // u . (2P, 2Q, I-V) <= I + V
  lp.add_row(lp::RowType::le, 0.0,
             {{c.p_col, 2 * c.up},
              {c.q_col, 2 * c.uq},
              {c.i_col, c.ui - 1.0},
              {c.v_col, -c.ui - 1.0}});
}

struct Arc {
  int line, tail, head;
  std::array<int, 3> P{-1, -1, -1}, Q{-1, -1, -1}, I{-1, -1, -1};
};

/* Supporting hyperplanes of P^2+Q^2 <= I*V at the current point, most
 * violated first, at most `cap` so rows stay manageable per round. */
inline std::vector<ConeCut> collect_cone_cuts(const std::vector<Arc>& arcs,
                                              const std::vector<std::array<int, 3>>& vcol,
                                              const std::vector<double>& x, double target,
                                              size_t cap, double* worst_out = nullptr) {
  std::vector<std::pair<double, ConeCut>> ranked;
  double worst = 0;
  for (const auto& a : arcs) {
    for (int k = 0; k < 3; ++k) {
      if (a.P[static_cast<size_t>(k)] < 0 || a.I[static_cast<size_t>(k)] < 0) continue;
      int vt = vcol[static_cast<size_t>(a.tail)][static_cast<size_t>(k)];
      if (vt < 0) continue;
      double P = x[static_cast<size_t>(a.P[static_cast<size_t>(k)])];
      double Q = x[static_cast<size_t>(a.Q[static_cast<size_t>(k)])];
      double I = x[static_cast<size_t>(a.I[static_cast<size_t>(k)])];
      double V = x[static_cast<size_t>(vt)];
      double resid = P * P + Q * Q - I * V;
      worst = std::max(worst, resid);
      if (resid <= target) continue;
      double y1 = 2 * P, y2 = 2 * Q, y3 = I - V;
      double nrm = std::sqrt(y1 * y1 + y2 * y2 + y3 * y3);
      if (nrm < 1e-12) continue;
      double u1 = y1 / nrm, u2 = y2 / nrm, u3 = y3 / nrm;
      // scrub roundoff dust; |u| <= 1 keeps the halfspace valid for the cone
      if (std::abs(u1) < 1e-12) u1 = 0;
      if (std::abs(u2) < 1e-12) u2 = 0;
      if (std::abs(u3) < 1e-12) u3 = 0;
      ranked.push_back({resid, ConeCut{a.P[static_cast<size_t>(k)], a.Q[static_cast<size_t>(k)],
                                       a.I[static_cast<size_t>(k)], vt, u1, u2, u3}});
    }
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& l, const auto& r) { return l.first > r.first; });
  if (ranked.size() > cap) ranked.resize(cap);
  std::vector<ConeCut> cuts;
  cuts.reserve(ranked.size());
  for (auto& [resid, c] : ranked) cuts.push_back(c);
  if (worst_out) *worst_out = worst;
  return cuts;
}

inline double cut_slack_at(const ConeCut& c, const std::vector<double>& x) {
  double lhs = 2 * c.up * x[static_cast<size_t>(c.p_col)] +
               2 * c.uq * x[static_cast<size_t>(c.q_col)] +
               (c.ui - 1.0) * x[static_cast<size_t>(c.i_col)] +
               (-c.ui - 1.0) * x[static_cast<size_t>(c.v_col)];
  return -lhs;  // >= 0 when satisfied, 0 when binding
}

}  // namespace detail

/* Evaluate one explicit switch configuration. `closed` is per line; wire
 * entries are ignored. Invalid configurations (cycles, two sources in one
 * component, closing a fault-adjacent device) come back infeasible. */
inline ConfigFlowResult solve_config_flow(const Network& net, const std::vector<char>& closed_in,
                                          FaultMask fault, const RestorationOptions& opt = {}) {
  if (opt.tier != 1 && opt.tier != 2) throw ConfigError("tier must be 1 or 2");
  ConfigFlowResult res;
  detail::FaultSets fs = detail::fault_sets(net, fault);
  std::vector<char> closed(closed_in);
  closed.resize(net.lines.size(), 0);
  for (size_t li = 0; li < net.lines.size(); ++li) {
    if (!net.lines[li].is_device()) closed[li] = 1;
    else if (fs.force_open[li] && closed[li]) return res;  // must stay open
  }
  if (!detail::closed_graph_ok(net, closed)) return res;

  std::vector<char> on = detail::energized_nodes(net, closed, fs);
  const double vlo = opt.vmin * opt.vmin, vhi = opt.vmax * opt.vmax;
  const double scale = 1.0 / opt.sbase_kw;
  double total_pu = net.total_load_kw() * scale;
  const double mflow = opt.big_m_scale * 2.0 * std::max(total_pu, 1e-6);

  lp::Lp lp;
  auto vcol = std::vector<std::array<int, 3>>(net.nodes.size(), {-1, -1, -1});
  auto beta = std::vector<int>(net.nodes.size(), -1);
  std::vector<detail::Arc> arcs;

  double dead_unserved = 0;
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    const auto& n = net.nodes[ni];
    double ptot = n.p_max[0] + n.p_max[1] + n.p_max[2];
    if (!on[ni]) {
      dead_unserved += n.weight * ptot;
      continue;
    }
    for (int k : phase_list(n.phases)) {
      int c = lp.add_col(0, vlo, vhi);
      if (n.is_source) {
        lp.lo[static_cast<size_t>(c)] = lp.hi[static_cast<size_t>(c)] = 1.0;
      }
      vcol[ni][static_cast<size_t>(k)] = c;
    }
    if (ptot > 0) beta[ni] = lp.add_col(-n.weight * ptot, 0, 1);
  }
  lp.obj_offset = net.total_weighted_load_kw();

  for (size_t li = 0; li < net.lines.size(); ++li) {
    const auto& l = net.lines[li];
    if (l.is_device() && !closed[li]) continue;
    if (!on[static_cast<size_t>(l.from)] || !on[static_cast<size_t>(l.to)]) continue;
    double smax = std::min(mflow, detail::line_smax(net, l, opt.vmax));
    double icap = detail::line_i_cap(l, smax, vlo);
    for (int pass = 0; pass < 2; ++pass) {
      detail::Arc a;
      a.line = static_cast<int>(li);
      a.tail = pass == 0 ? l.from : l.to;
      a.head = pass == 0 ? l.to : l.from;
      for (int k : phase_list(l.phases)) {
        a.P[static_cast<size_t>(k)] = lp.add_col(0, 0, smax);
        a.Q[static_cast<size_t>(k)] = lp.add_col(0, 0, smax);
        if (opt.tier == 2)
          a.I[static_cast<size_t>(k)] = lp.add_col(opt.sbase_kw * l.r(k, k), 0, icap);
      }
      arcs.push_back(a);
    }
  }

  // generation columns and balance rows
  std::vector<std::array<int, 3>> gp(net.nodes.size(), {-1, -1, -1}),
      gq(net.nodes.size(), {-1, -1, -1});
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    const auto& n = net.nodes[ni];
    if (!on[ni] || !n.is_source) continue;
    std::vector<std::pair<int, double>> caprow_p, caprow_q;
    for (int k : phase_list(n.phases)) {
      gp[ni][static_cast<size_t>(k)] = lp.add_col(0, 0, n.src_p_cap * scale);
      gq[ni][static_cast<size_t>(k)] = lp.add_col(0, 0, n.src_q_cap * scale);
      caprow_p.push_back({gp[ni][static_cast<size_t>(k)], 1.0});
      caprow_q.push_back({gq[ni][static_cast<size_t>(k)], 1.0});
    }
    lp.add_row(lp::RowType::le, n.src_p_cap * scale, caprow_p);
    lp.add_row(lp::RowType::le, n.src_q_cap * scale, caprow_q);
  }

  // per node-phase balance: in - out + gen - beta*load = (tier2) sum r*I of inbound arcs
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    const auto& n = net.nodes[ni];
    if (!on[ni]) continue;
    for (int k : phase_list(n.phases)) {
      int rp = lp.add_row(lp::RowType::eq, 0.0);
      int rq = lp.add_row(lp::RowType::eq, 0.0);
      for (const auto& a : arcs) {
        if (a.P[static_cast<size_t>(k)] < 0) continue;
        const auto& l = net.lines[static_cast<size_t>(a.line)];
        if (a.head == static_cast<int>(ni)) {
          lp.coef(rp, a.P[static_cast<size_t>(k)], 1.0);
          lp.coef(rq, a.Q[static_cast<size_t>(k)], 1.0);
          if (opt.tier == 2) {
            lp.coef(rp, a.I[static_cast<size_t>(k)], -l.r(k, k));
            lp.coef(rq, a.I[static_cast<size_t>(k)], -l.x(k, k));
          }
        } else if (a.tail == static_cast<int>(ni)) {
          lp.coef(rp, a.P[static_cast<size_t>(k)], -1.0);
          lp.coef(rq, a.Q[static_cast<size_t>(k)], -1.0);
        }
      }
      if (gp[ni][static_cast<size_t>(k)] >= 0) {
        lp.coef(rp, gp[ni][static_cast<size_t>(k)], 1.0);
        lp.coef(rq, gq[ni][static_cast<size_t>(k)], 1.0);
      }
      if (beta[ni] >= 0) {
        lp.coef(rp, beta[ni], -n.p_max[static_cast<size_t>(k)] * scale);
        lp.coef(rq, beta[ni], -n.q_max[static_cast<size_t>(k)] * scale);
      }
    }
  }

  // voltage drop along closed energized lines; net flow forward - reverse
  for (size_t ai = 0; ai + 1 < arcs.size(); ai += 2) {
    const detail::Arc& f = arcs[ai];
    const detail::Arc& r = arcs[ai + 1];
    const auto& l = net.lines[static_cast<size_t>(f.line)];
    for (int k : phase_list(l.phases)) {
      double rr = l.r(k, k), xx = l.x(k, k);
      double z2 = rr * rr + xx * xx;
      int vf = vcol[static_cast<size_t>(f.tail)][static_cast<size_t>(k)];
      int vt = vcol[static_cast<size_t>(f.head)][static_cast<size_t>(k)];
      if (vf < 0 || vt < 0) continue;
      std::vector<std::pair<int, double>> row{{vt, 1.0}, {vf, -1.0},
                                              {f.P[static_cast<size_t>(k)], 2 * rr},
                                              {f.Q[static_cast<size_t>(k)], 2 * xx},
                                              {r.P[static_cast<size_t>(k)], -2 * rr},
                                              {r.Q[static_cast<size_t>(k)], -2 * xx}};
      if (opt.tier == 2 && z2 > 1e-9) {  // below that the drop term is noise
        row.push_back({f.I[static_cast<size_t>(k)], -z2});
        row.push_back({r.I[static_cast<size_t>(k)], z2});
      }
      lp.add_row(lp::RowType::eq, 0.0, row);
      if (opt.tier == 2) {
        double icap = detail::line_i_cap(l, std::min(mflow, detail::line_smax(net, l, opt.vmax)),
                                         vlo);
        if (std::max(l.i_max, 0.0) < 2 * icap)  // otherwise the column caps already cover it
          lp.add_row(lp::RowType::le, std::max(l.i_max, 0.0),
                     {{f.I[static_cast<size_t>(k)], 1.0}, {r.I[static_cast<size_t>(k)], 1.0}});
      }
    }
  }

  // tier 2: outer-approximation loop on P^2+Q^2 <= I * V(tail)
  lp::Solution sol = lp::solve(lp);
  if (sol.status != lp::Status::optimal) return res;  // infeasible config
  if (opt.tier == 2) {
    for (int round = 0; round < opt.cone_max_rounds; ++round) {
      double worst = 0;
      std::vector<detail::ConeCut> cuts =
          detail::collect_cone_cuts(arcs, vcol, sol.x, opt.cone_target, 24, &worst);
      res.max_cone_residual = worst;
      if (cuts.empty()) break;
      for (const auto& c : cuts) detail::add_cone_cut_row(lp, c);
      sol = lp::solve_warm(lp, lp::extend_basis(sol.basis, lp));
      if (sol.status != lp::Status::optimal) {
        sol = lp::solve(lp);  // warm repair failed numerically, start over
        if (sol.status != lp::Status::optimal) return res;
      }
    }
    detail::collect_cone_cuts(arcs, vcol, sol.x, opt.cone_target, 0, &res.max_cone_residual);
  }

  res.feasible = true;
  res.beta.assign(net.nodes.size(), 0.0);
  res.energized.assign(on.begin(), on.end());
  double served = 0;
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    if (beta[ni] >= 0) res.beta[ni] = sol.x[static_cast<size_t>(beta[ni])];
    else if (on[ni])
      res.beta[ni] = 1.0;  // no load to shed
    const auto& n = net.nodes[ni];
    double ptot = n.p_max[0] + n.p_max[1] + n.p_max[2];
    if (on[ni]) served += n.weight * ptot * res.beta[ni];
  }
  res.unserved_kw = net.total_weighted_load_kw() - served;
  if (opt.tier == 2) {
    double loss_pu = 0;
    for (const auto& a : arcs)
      for (int k = 0; k < 3; ++k)
        if (a.I[static_cast<size_t>(k)] >= 0)
          loss_pu += net.lines[static_cast<size_t>(a.line)].r(k, k) *
                     sol.x[static_cast<size_t>(a.I[static_cast<size_t>(k)])];
    res.loss_kw = loss_pu * opt.sbase_kw;
  } else {
    // post hoc estimate from the linearized flows at nominal voltage
    double loss_pu = 0;
    for (const auto& a : arcs)
      for (int k = 0; k < 3; ++k)
        if (a.P[static_cast<size_t>(k)] >= 0) {
          double P = sol.x[static_cast<size_t>(a.P[static_cast<size_t>(k)])];
          double Q = sol.x[static_cast<size_t>(a.Q[static_cast<size_t>(k)])];
          loss_pu += net.lines[static_cast<size_t>(a.line)].r(k, k) * (P * P + Q * Q);
        }
    res.loss_kw = loss_pu * opt.sbase_kw;
  }
  return res;
}

namespace detail {

/* The reconfiguration MILP. Returns the optimal objective (weighted unserved
 * kW, plus loss kW at tier 2) and the chosen closed set. */
struct MilpOutcome {
  bool feasible = false;
  double obj = 0;
  std::vector<char> closed;
  long nodes = 0;
};

/* pins force individual device states; cut_pool carries cone cuts across
 * calls on the same model (column layout is deterministic, so cuts found
 * while solving one pin set stay valid for the next). */
inline MilpOutcome solve_reconfig_milp(const Network& net, const FaultSets& fs,
                                       const RestorationOptions& opt,
                                       const std::vector<std::pair<int, int>>& pins,
                                       std::vector<ConeCut>* cut_pool = nullptr) {
  const double vlo = opt.vmin * opt.vmin, vhi = opt.vmax * opt.vmax;
  const double scale = 1.0 / opt.sbase_kw;
  double total_pu = net.total_load_kw() * scale;
  const double mflow = opt.big_m_scale * 2.0 * std::max(total_pu, 1e-6);
  const double mcount = opt.big_m_scale * static_cast<double>(net.nodes.size());

  lp::Lp lp;
  std::vector<int> int_cols;

  // binaries
  std::vector<int> gam(net.lines.size(), -1), Gam(net.lines.size(), -1);
  std::vector<int> U(static_cast<size_t>(net.n_zones), -1);
  for (int z = 0; z < net.n_zones; ++z) {
    U[static_cast<size_t>(z)] = lp.add_col(0, 0, 1);
    int_cols.push_back(U[static_cast<size_t>(z)]);
  }
  for (const auto& n : net.nodes)
    if (n.is_source) {
      int z = net.zone_of_node[static_cast<size_t>(net.node_index(n.id))];
      int c = U[static_cast<size_t>(z)];
      lp.lo[static_cast<size_t>(c)] = fs.zone_dead[static_cast<size_t>(z)] ? 0.0 : 1.0;
      lp.hi[static_cast<size_t>(c)] = lp.lo[static_cast<size_t>(c)];
    }
  for (int z = 0; z < net.n_zones; ++z)
    if (fs.zone_dead[static_cast<size_t>(z)]) {
      lp.lo[static_cast<size_t>(U[static_cast<size_t>(z)])] = 0.0;
      lp.hi[static_cast<size_t>(U[static_cast<size_t>(z)])] = 0.0;
    }
  for (size_t li = 0; li < net.lines.size(); ++li) {
    if (!net.lines[li].is_device()) continue;
    gam[li] = lp.add_col(0, 0, fs.force_open[li] ? 0.0 : 1.0);
    Gam[li] = lp.add_col(0, 0, 1);
    int_cols.push_back(gam[li]);
    int_cols.push_back(Gam[li]);
    lp.add_row(lp::RowType::le, 0.0, {{gam[li], 1.0}, {Gam[li], -1.0}});
  }
  for (auto [line, val] : pins) {
    lp.lo[static_cast<size_t>(gam[static_cast<size_t>(line)])] = val;
    lp.hi[static_cast<size_t>(gam[static_cast<size_t>(line)])] = val;
  }

  // served fraction
  std::vector<int> beta(net.nodes.size(), -1);
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    const auto& n = net.nodes[ni];
    double ptot = n.p_max[0] + n.p_max[1] + n.p_max[2];
    if (ptot <= 0) continue;
    beta[ni] = lp.add_col(-n.weight * ptot, 0, 1);
    lp.add_row(lp::RowType::le, 0.0,
               {{beta[ni], 1.0}, {U[static_cast<size_t>(net.zone_of_node[ni])], -1.0}});
  }
  lp.obj_offset = net.total_weighted_load_kw();

  // voltages
  std::vector<std::array<int, 3>> vcol(net.nodes.size(), {-1, -1, -1});
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    const auto& n = net.nodes[ni];
    for (int k : phase_list(n.phases)) {
      int c = lp.add_col(0, vlo, vhi);
      if (n.is_source) lp.lo[static_cast<size_t>(c)] = lp.hi[static_cast<size_t>(c)] = 1.0;
      vcol[ni][static_cast<size_t>(k)] = c;
    }
  }

  // arcs with flow gating
  std::vector<Arc> arcs;
  for (size_t li = 0; li < net.lines.size(); ++li) {
    const auto& l = net.lines[li];
    double smax = std::min(mflow, detail::line_smax(net, l, opt.vmax));
    for (int pass = 0; pass < 2; ++pass) {
      Arc a;
      a.line = static_cast<int>(li);
      a.tail = pass == 0 ? l.from : l.to;
      a.head = pass == 0 ? l.to : l.from;
      int zt = net.zone_of_node[static_cast<size_t>(a.tail)];
      for (int k : phase_list(l.phases)) {
        a.P[static_cast<size_t>(k)] = lp.add_col(0, 0, smax);
        a.Q[static_cast<size_t>(k)] = lp.add_col(0, 0, smax);
        lp.add_row(lp::RowType::le, 0.0,
                   {{a.P[static_cast<size_t>(k)], 1.0}, {U[static_cast<size_t>(zt)], -smax}});
        lp.add_row(lp::RowType::le, 0.0,
                   {{a.Q[static_cast<size_t>(k)], 1.0}, {U[static_cast<size_t>(zt)], -smax}});
        if (l.is_device()) {
          lp.add_row(lp::RowType::le, 0.0,
                     {{a.P[static_cast<size_t>(k)], 1.0}, {gam[li], -smax}});
          lp.add_row(lp::RowType::le, 0.0,
                     {{a.Q[static_cast<size_t>(k)], 1.0}, {gam[li], -smax}});
        }
        if (opt.tier == 2) {
          double icap = detail::line_i_cap(l, smax, vlo);
          a.I[static_cast<size_t>(k)] = lp.add_col(opt.sbase_kw * l.r(k, k), 0, icap);
          if (l.is_device())
            lp.add_row(lp::RowType::le, 0.0,
                       {{a.I[static_cast<size_t>(k)], 1.0}, {gam[li], -icap}});
        }
      }
      arcs.push_back(a);
    }
  }

  // zone coupling through closed devices
  for (size_t li = 0; li < net.lines.size(); ++li) {
    const auto& l = net.lines[li];
    if (!l.is_device()) continue;
    int zf = net.zone_of_node[static_cast<size_t>(l.from)];
    int zt = net.zone_of_node[static_cast<size_t>(l.to)];
    lp.add_row(lp::RowType::le, 1.0,
               {{U[static_cast<size_t>(zf)], 1.0}, {U[static_cast<size_t>(zt)], -1.0}, {gam[li], 1.0}});
    lp.add_row(lp::RowType::le, 1.0,
               {{U[static_cast<size_t>(zt)], 1.0}, {U[static_cast<size_t>(zf)], -1.0}, {gam[li], 1.0}});
  }

  // generation
  std::vector<std::array<int, 3>> gp(net.nodes.size(), {-1, -1, -1}),
      gq(net.nodes.size(), {-1, -1, -1});
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    const auto& n = net.nodes[ni];
    if (!n.is_source) continue;
    std::vector<std::pair<int, double>> capp, capq;
    for (int k : phase_list(n.phases)) {
      gp[ni][static_cast<size_t>(k)] = lp.add_col(0, 0, n.src_p_cap * scale);
      gq[ni][static_cast<size_t>(k)] = lp.add_col(0, 0, n.src_q_cap * scale);
      capp.push_back({gp[ni][static_cast<size_t>(k)], 1.0});
      capq.push_back({gq[ni][static_cast<size_t>(k)], 1.0});
    }
    lp.add_row(lp::RowType::le, n.src_p_cap * scale, capp);
    lp.add_row(lp::RowType::le, n.src_q_cap * scale, capq);
  }

  // balance
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    const auto& n = net.nodes[ni];
    for (int k : phase_list(n.phases)) {
      int rp = lp.add_row(lp::RowType::eq, 0.0);
      int rq = lp.add_row(lp::RowType::eq, 0.0);
      for (const auto& a : arcs) {
        if (a.P[static_cast<size_t>(k)] < 0) continue;
        const auto& l = net.lines[static_cast<size_t>(a.line)];
        if (a.head == static_cast<int>(ni)) {
          lp.coef(rp, a.P[static_cast<size_t>(k)], 1.0);
          lp.coef(rq, a.Q[static_cast<size_t>(k)], 1.0);
          if (opt.tier == 2) {
            lp.coef(rp, a.I[static_cast<size_t>(k)], -l.r(k, k));
            lp.coef(rq, a.I[static_cast<size_t>(k)], -l.x(k, k));
          }
        } else if (a.tail == static_cast<int>(ni)) {
          lp.coef(rp, a.P[static_cast<size_t>(k)], -1.0);
          lp.coef(rq, a.Q[static_cast<size_t>(k)], -1.0);
        }
      }
      if (gp[ni][static_cast<size_t>(k)] >= 0) {
        lp.coef(rp, gp[ni][static_cast<size_t>(k)], 1.0);
        lp.coef(rq, gq[ni][static_cast<size_t>(k)], 1.0);
      }
      if (beta[ni] >= 0) {
        lp.coef(rp, beta[ni], -n.p_max[static_cast<size_t>(k)] * scale);
        lp.coef(rq, beta[ni], -n.q_max[static_cast<size_t>(k)] * scale);
      }
    }
  }

  // voltage drop equalities with gated slack
  for (size_t ai = 0; ai + 1 < arcs.size(); ai += 2) {
    const detail::Arc& f = arcs[ai];
    const detail::Arc& r = arcs[ai + 1];
    const auto& l = net.lines[static_cast<size_t>(f.line)];
    int zf = net.zone_of_node[static_cast<size_t>(f.tail)];
    int zt = net.zone_of_node[static_cast<size_t>(f.head)];
    for (int k : phase_list(l.phases)) {
      double rr = l.r(k, k), xx = l.x(k, k);
      double z2 = rr * rr + xx * xx;
      int vf = vcol[static_cast<size_t>(f.tail)][static_cast<size_t>(k)];
      int vt = vcol[static_cast<size_t>(f.head)][static_cast<size_t>(k)];
      if (vf < 0 || vt < 0) continue;
      double icap =
          detail::line_i_cap(l, std::min(mflow, detail::line_smax(net, l, opt.vmax)), vlo);
      double mslack = opt.big_m_scale *
                      ((vhi - vlo) + 2 * (std::abs(rr) + std::abs(xx)) * mflow +
                       z2 * icap + 1.0);
      int s = lp.add_col(0, -lp::kInf, lp::kInf);
      std::vector<std::pair<int, double>> row{{vt, 1.0}, {vf, -1.0},
                                              {f.P[static_cast<size_t>(k)], 2 * rr},
                                              {f.Q[static_cast<size_t>(k)], 2 * xx},
                                              {r.P[static_cast<size_t>(k)], -2 * rr},
                                              {r.Q[static_cast<size_t>(k)], -2 * xx},
                                              {s, -1.0}};
      if (opt.tier == 2 && z2 > 1e-9) {  // below that the drop term is noise
        row.push_back({f.I[static_cast<size_t>(k)], -z2});
        row.push_back({r.I[static_cast<size_t>(k)], z2});
      }
      lp.add_row(lp::RowType::eq, 0.0, row);
      // |s| <= M * (open or de-energized indicator)
      if (l.is_device()) {
        lp.add_row(lp::RowType::le, 3 * mslack,
                   {{s, 1.0}, {gam[static_cast<size_t>(f.line)], mslack},
                    {U[static_cast<size_t>(zf)], mslack}, {U[static_cast<size_t>(zt)], mslack}});
        lp.add_row(lp::RowType::le, 3 * mslack,
                   {{s, -1.0}, {gam[static_cast<size_t>(f.line)], mslack},
                    {U[static_cast<size_t>(zf)], mslack}, {U[static_cast<size_t>(zt)], mslack}});
      } else {
        lp.add_row(lp::RowType::le, mslack, {{s, 1.0}, {U[static_cast<size_t>(zf)], mslack}});
        lp.add_row(lp::RowType::le, mslack, {{s, -1.0}, {U[static_cast<size_t>(zf)], mslack}});
      }
      if (opt.tier == 2 && std::max(l.i_max, 0.0) < 2 * icap)
        lp.add_row(lp::RowType::le, std::max(l.i_max, 0.0),
                   {{f.I[static_cast<size_t>(k)], 1.0}, {r.I[static_cast<size_t>(k)], 1.0}});
    }
  }

  // radiality: fictitious commodity over all nodes, one unit per non-source
  int n_sources = 0, n_wires = 0;
  for (const auto& n : net.nodes) n_sources += n.is_source ? 1 : 0;
  std::vector<int> F(net.lines.size(), -1);
  for (size_t li = 0; li < net.lines.size(); ++li) {
    const auto& l = net.lines[li];
    F[li] = lp.add_col(0, -mcount, mcount);
    if (l.is_device()) {
      lp.add_row(lp::RowType::le, 0.0, {{F[li], 1.0}, {Gam[li], -mcount}});
      lp.add_row(lp::RowType::le, 0.0, {{F[li], -1.0}, {Gam[li], -mcount}});
    } else {
      ++n_wires;
    }
  }
  for (size_t ni = 0; ni < net.nodes.size(); ++ni) {
    if (net.nodes[ni].is_source) continue;
    int row = lp.add_row(lp::RowType::eq, 1.0);
    for (size_t li = 0; li < net.lines.size(); ++li) {
      const auto& l = net.lines[li];
      if (l.to == static_cast<int>(ni)) lp.coef(row, F[li], 1.0);
      else if (l.from == static_cast<int>(ni)) lp.coef(row, F[li], -1.0);
    }
  }
  {
    int row = lp.add_row(lp::RowType::eq,
                         static_cast<double>(net.nodes.size()) - n_sources - n_wires);
    for (size_t li = 0; li < net.lines.size(); ++li)
      if (Gam[li] >= 0) lp.coef(row, Gam[li], 1.0);
  }

  if (cut_pool && opt.tier == 2)
    for (const auto& c : *cut_pool) detail::add_cone_cut_row(lp, c);

  auto install = [&](const std::vector<detail::ConeCut>& cuts) {
    for (const auto& c : cuts) detail::add_cone_cut_row(lp, c);
    if (cut_pool) cut_pool->insert(cut_pool->end(), cuts.begin(), cuts.end());
  };

  // Solve, adding outer cone cuts between branch-and-bound passes at tier 2.
  // Nearly all cuts come from a warm-started LP loop with the binaries pinned
  // to the incumbent assignment, so very few MILP passes are needed: the next
  // pass either keeps the assignment (and is cone-feasible) or moves to one
  // whose loss the cuts now price correctly.
  MilpOutcome out;
  const size_t cut_cap = 24;
  std::vector<double> final_x;
  for (int round = 0;; ++round) {
    lp::MipResult mr = lp::solve_mip(lp, int_cols, opt.mip);
    if (mr.status != lp::Status::optimal) {
      if (mr.status == lp::Status::infeasible) return out;
      throw SolveError("reconfiguration solve failed: " +
                       std::string(lp::status_name(mr.status)));
    }
    out.feasible = true;
    out.obj = mr.obj;
    out.nodes += mr.nodes;
    out.closed.assign(net.lines.size(), 0);
    for (size_t li = 0; li < net.lines.size(); ++li) {
      if (!net.lines[li].is_device()) out.closed[li] = 1;
      else out.closed[li] = mr.x[static_cast<size_t>(gam[li])] > 0.5 ? 1 : 0;
    }
    final_x = mr.x;
    if (opt.tier != 2 || round >= opt.cone_max_rounds) break;
    std::vector<detail::ConeCut> cuts =
        detail::collect_cone_cuts(arcs, vcol, mr.x, opt.cone_target, cut_cap);
    if (cuts.empty()) break;
    // Kelley iterations on a copy with the binaries pinned; only the cuts
    // still binding once it converges graduate into the branch-and-bound
    // model, so its row count stays small
    lp::Lp pinned = lp;
    for (int j : int_cols) {
      double v = std::round(mr.x[static_cast<size_t>(j)]);
      pinned.lo[static_cast<size_t>(j)] = v;
      pinned.hi[static_cast<size_t>(j)] = v;
    }
    std::vector<detail::ConeCut> session = cuts;
    for (const auto& c : cuts) detail::add_cone_cut_row(pinned, c);
    lp::Solution s = lp::solve(pinned);
    bool polish_clean = false;
    for (int inner = 0; s.status == lp::Status::optimal && inner < 4 * opt.cone_max_rounds;
         ++inner) {
      std::vector<detail::ConeCut> more =
          detail::collect_cone_cuts(arcs, vcol, s.x, opt.cone_target, cut_cap);
      if (more.empty()) {
        polish_clean = true;
        break;
      }
      session.insert(session.end(), more.begin(), more.end());
      for (const auto& c : more) detail::add_cone_cut_row(pinned, c);
      s = lp::solve_warm(pinned, lp::extend_basis(s.basis, pinned));
    }
    // The polished point keeps the incumbent binaries and satisfies the cone
    // everywhere; if it also meets the branch-and-bound objective there is no
    // gap left for another pass to close.
    if (polish_clean && s.obj <= mr.obj + 1e-7 * std::max(1.0, std::abs(mr.obj))) {
      out.obj = s.obj;
      final_x = s.x;
      break;
    }
    std::vector<detail::ConeCut> graduated;
    if (s.status == lp::Status::optimal) {
      for (const auto& c : session)
        if (detail::cut_slack_at(c, s.x) <= 1e-5) graduated.push_back(c);
    }
    if (graduated.empty()) graduated = cuts;  // polish failed, fall back to the raw cuts
    install(graduated);
  }
  // keep only the cuts that bind at the final point; the stepping stones of
  // the Kelley iterations would otherwise pile up across repeated calls
  if (cut_pool && opt.tier == 2 && out.feasible && !final_x.empty()) {
    std::vector<detail::ConeCut> kept;
    for (const auto& c : *cut_pool)
      if (detail::cut_slack_at(c, final_x) <= 1e-5) kept.push_back(c);
    if (kept.size() > 600) kept.erase(kept.begin(), kept.end() - 600);
    cut_pool->swap(kept);
  }
  return out;
}

}  // namespace detail

/* Full restoration solve: MILP, then a deterministic tie-break pass that
 * opens devices in id order whenever doing so keeps the objective, then a
 * re-evaluation of the final configuration through solve_config_flow. */
inline RestorationResult solve_restoration(const Network& net, FaultMask fault,
                                           double duration_h,
                                           const RestorationOptions& opt = {}) {
  if (opt.tier != 1 && opt.tier != 2) throw ConfigError("tier must be 1 or 2");
  detail::FaultSets fs = detail::fault_sets(net, fault);
  std::vector<std::pair<int, int>> pins;
  std::vector<detail::ConeCut> pool;
  detail::MilpOutcome best = detail::solve_reconfig_milp(net, fs, opt, pins, &pool);
  if (!best.feasible) throw SolveError("restoration model infeasible");

  // lexicographic preference for open devices, scanning ids in order
  std::vector<int> devs;
  for (size_t li = 0; li < net.lines.size(); ++li)
    if (net.lines[li].is_device() && !fs.force_open[li]) devs.push_back(static_cast<int>(li));
  std::sort(devs.begin(), devs.end(), [&](int a, int b) {
    return net.lines[static_cast<size_t>(a)].id < net.lines[static_cast<size_t>(b)].id;
  });
  const double target = best.obj;
  const double tie_tol = 1e-7 * std::max(1.0, std::abs(target));
  long nodes_total = best.nodes;
  for (int li : devs) {
    if (!best.closed[static_cast<size_t>(li)]) {
      pins.push_back({li, 0});
      continue;
    }
    pins.push_back({li, 0});
    detail::MilpOutcome trial = detail::solve_reconfig_milp(net, fs, opt, pins, &pool);
    nodes_total += trial.nodes;
    if (trial.feasible && trial.obj <= target + tie_tol) {
      best = trial;
    } else {
      pins.back().second = 1;  // must stay closed
    }
  }
  best.nodes = nodes_total;

  RestorationResult res;
  ConfigFlowResult flow = solve_config_flow(net, best.closed, fault, opt);
  if (!flow.feasible) throw SolveError("final configuration failed to evaluate");
  res.feasible = true;
  res.unserved_kw = flow.unserved_kw;
  res.loss_kw = flow.loss_kw;
  res.f1_kwh = duration_h * flow.unserved_kw;
  res.f2_kwh = duration_h * flow.loss_kw;
  res.max_cone_residual = flow.max_cone_residual;
  res.bb_nodes = best.nodes;
  res.closed = best.closed;
  for (size_t li = 0; li < net.lines.size(); ++li)
    if (net.lines[li].is_device() && best.closed[li])
      res.closed_devices.push_back(net.lines[li].id);
  std::sort(res.closed_devices.begin(), res.closed_devices.end());
  res.beta = flow.beta;
  res.energized = flow.energized;
  return res;
}

/* Exhaustive reference: every assignment of the non-forced devices, validity
 * filter, config LP per candidate, minimum with the same open-first
 * lexicographic tie-break. Refuses more than `max_free` free devices. */
inline RestorationResult brute_force_oracle(const Network& net, FaultMask fault,
                                            double duration_h, const RestorationOptions& opt = {},
                                            int max_free = 12) {
  detail::FaultSets fs = detail::fault_sets(net, fault);
  std::vector<int> free_devs;
  for (size_t li = 0; li < net.lines.size(); ++li)
    if (net.lines[li].is_device() && !fs.force_open[li])
      free_devs.push_back(static_cast<int>(li));
  std::sort(free_devs.begin(), free_devs.end(), [&](int a, int b) {
    return net.lines[static_cast<size_t>(a)].id < net.lines[static_cast<size_t>(b)].id;
  });
  if (static_cast<int>(free_devs.size()) > max_free)
    throw SolveError("oracle limited to " + std::to_string(max_free) + " free devices");

  double best_obj = lp::kInf;
  std::vector<char> best_closed;
  ConfigFlowResult best_flow;
  std::vector<char> best_key;

  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_devs.size()); ++mask) {
    std::vector<char> closed(net.lines.size(), 0);
    std::vector<char> key(free_devs.size(), 0);
    for (size_t t = 0; t < free_devs.size(); ++t)
      if ((mask >> t) & 1) {
        closed[static_cast<size_t>(free_devs[t])] = 1;
        key[t] = 1;
      }
    ConfigFlowResult flow = solve_config_flow(net, closed, fault, opt);
    if (!flow.feasible) continue;
    double obj = flow.unserved_kw + (opt.tier == 2 ? flow.loss_kw : 0.0);
    bool better = true;
    if (std::isfinite(best_obj)) {
      double tol = 1e-7 * std::max(1.0, std::abs(best_obj));
      better = obj < best_obj - tol;
      if (!better && obj <= best_obj + tol) better = key < best_key;  // open-first lexicographic
    }
    if (better) {
      best_obj = obj;
      best_closed = closed;
      best_flow = flow;
      best_key = key;
    }
  }
  if (!std::isfinite(best_obj)) throw SolveError("oracle found no valid configuration");

  RestorationResult res;
  res.feasible = true;
  res.unserved_kw = best_flow.unserved_kw;
  res.loss_kw = best_flow.loss_kw;
  res.f1_kwh = duration_h * best_flow.unserved_kw;
  res.f2_kwh = duration_h * best_flow.loss_kw;
  res.max_cone_residual = best_flow.max_cone_residual;
  res.closed = best_closed;
  for (size_t li = 0; li < net.lines.size(); ++li)
    if (net.lines[li].is_device() && best_closed[li])
      res.closed_devices.push_back(net.lines[li].id);
  std::sort(res.closed_devices.begin(), res.closed_devices.end());
  res.beta = best_flow.beta;
  res.energized = best_flow.energized;
  return res;
}

/* Memoized restoration costs. Under immunity semantics only |S|+1 distinct
 * masks ever occur per network, so the table stays tiny; durations multiply
 * in afterwards since the optimal configuration does not depend on them. */
class CostTable {
 public:
  struct Entry {
    double unserved_kw = 0;
    double loss_kw = 0;
  };

  Entry get(const Network& net, FaultMask mask, const RestorationOptions& opt) {
    std::pair<FaultMask, int> key{mask, opt.tier};
    {
      std::lock_guard<std::mutex> g(mu_);
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }
    RestorationResult r = solve_restoration(net, mask, 1.0, opt);
    Entry e{r.unserved_kw, r.loss_kw};
    std::lock_guard<std::mutex> g(mu_);
    memo_.emplace(key, e);
    return e;
  }

  size_t size() const {
    std::lock_guard<std::mutex> g(mu_);
    return memo_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::pair<FaultMask, int>, Entry> memo_;
};

/* Per-scenario cost vector (kWh of weighted unserved energy) for a hardening
 * plan: scenario duration times the memoized restoration cost of the
 * effective fault. */
inline std::vector<double> scenario_costs(const Network& net, const ScenarioCatalog& cat,
                                          const HardeningDecision& plan, CostTable& table,
                                          const RestorationOptions& opt = {},
                                          HardeningSemantics sem = HardeningSemantics::immunity) {
  std::vector<double> c(cat.size(), 0.0);
  for (size_t s = 0; s < cat.size(); ++s) {
    FaultMask m = effective_faults(fault_on(cat.scenarios[s].segment), plan, sem);
    c[s] = cat.scenarios[s].duration_h * table.get(net, m, opt).unserved_kw;
  }
  return c;
}

}  // namespace gridhard
