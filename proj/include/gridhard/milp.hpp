#pragma once

/* Small mixed-integer solver: best-bound branch and bound over the bounded
 * simplex, dual-simplex warm starts from the parent basis, pseudocost
 * branching bootstrapped by strong branching probes. Built for the
 * reconfiguration models in this repo (tens of binaries), not for generic
 * MIP workloads. */

#include <cmath>
#include <queue>
#include <tuple>
#include <vector>

#include "gridhard/simplex.hpp"

namespace gridhard::lp {

struct MipOptions {
  double gap_rel = 1e-6;
  double gap_abs = 1e-9;
  double int_tol = 1e-6;
  long node_limit = 200000;
  int strong_candidates = 4;  // most-fractional probes while pseudocosts warm up
  int reliability = 2;        // observations per direction before trusting pseudocosts
};

struct MipResult {
  Status status = Status::iter_limit;
  double obj = 0.0;
  double bound = -kInf;  // proven lower bound (minimization)
  std::vector<double> x;
  long nodes = 0;
  long lp_iterations = 0;
};

namespace detail {

struct BbNode {
  double bound;
  long id;
  std::vector<std::tuple<int, double, double>> fixes;  // col, lo, hi
  Basis basis;
};

struct BbNodeOrder {
  bool operator()(const BbNode& a, const BbNode& b) const {
    return std::tie(a.bound, a.id) > std::tie(b.bound, b.id);
  }
};

}  // namespace detail

inline MipResult solve_mip(const Lp& base, const std::vector<int>& int_cols,
                           const MipOptions& opt = {}) {
  MipResult res;
  if (int_cols.empty()) {
    Solution s = solve(base);
    res.status = s.status;
    res.obj = s.obj;
    res.bound = s.obj;
    res.x = std::move(s.x);
    res.nodes = 1;
    res.lp_iterations = s.iterations;
    return res;
  }

  Lp work = base;
  const std::vector<double> lo0 = base.lo, hi0 = base.hi;
  auto reset_bounds = [&] {
    work.lo = lo0;
    work.hi = hi0;
  };
  auto apply = [&](const std::vector<std::tuple<int, double, double>>& fixes) {
    reset_bounds();
    for (auto [j, l, h] : fixes) {
      work.lo[static_cast<size_t>(j)] = std::max(work.lo[static_cast<size_t>(j)], l);
      work.hi[static_cast<size_t>(j)] = std::min(work.hi[static_cast<size_t>(j)], h);
    }
  };
  auto fractional = [&](const std::vector<double>& x) {
    std::vector<int> out;
    for (int j : int_cols) {
      double v = x[static_cast<size_t>(j)];
      if (std::abs(v - std::round(v)) > opt.int_tol) out.push_back(j);
    }
    return out;
  };

  // pseudocost state: objective degradation per unit of fractionality
  size_t npc = base.c.size();
  std::vector<double> pc_up(npc, 0), pc_dn(npc, 0);
  std::vector<int> cnt_up(npc, 0), cnt_dn(npc, 0);

  double incumbent = kInf;
  std::vector<double> best_x;
  std::priority_queue<detail::BbNode, std::vector<detail::BbNode>, detail::BbNodeOrder> open;
  long next_id = 0;
  double global_bound = -kInf;

  Solution root = solve(work);
  res.lp_iterations += root.iterations;
  res.nodes = 1;
  if (root.status != Status::optimal) {
    res.status = root.status;
    return res;
  }
  global_bound = root.obj;

  open.push({root.obj, next_id++, {}, std::move(root.basis)});

  auto gap_met = [&](double lb) {
    return incumbent - lb <= std::max(opt.gap_abs, opt.gap_rel * std::abs(incumbent));
  };

  while (!open.empty()) {
    detail::BbNode node = open.top();
    open.pop();
    global_bound = node.bound;
    if (incumbent < kInf && gap_met(node.bound)) break;  // rest of tree is within gap
    if (res.nodes >= opt.node_limit) {
      res.status = Status::iter_limit;
      res.obj = incumbent;
      res.bound = node.bound;
      res.x = best_x;
      return res;
    }

    apply(node.fixes);
    Solution sol = solve_warm(work, node.basis);
    ++res.nodes;
    res.lp_iterations += sol.iterations;
    if (sol.status == Status::infeasible) continue;
    if (sol.status != Status::optimal) {
      res.status = sol.status;
      res.obj = incumbent;
      res.bound = node.bound;
      res.x = best_x;
      return res;
    }
    if (incumbent < kInf && sol.obj >= incumbent - opt.gap_abs) continue;

    std::vector<int> frac = fractional(sol.x);
    if (frac.empty()) {
      // integral: snap and accept
      if (sol.obj < incumbent) {
        incumbent = sol.obj;
        best_x = sol.x;
        for (int j : int_cols)
          best_x[static_cast<size_t>(j)] = std::round(best_x[static_cast<size_t>(j)]);
      }
      continue;
    }

    // branching variable selection
    std::sort(frac.begin(), frac.end(), [&](int a, int b) {
      double fa = std::abs(sol.x[static_cast<size_t>(a)] -
                           std::round(sol.x[static_cast<size_t>(a)]));
      double fb = std::abs(sol.x[static_cast<size_t>(b)] -
                           std::round(sol.x[static_cast<size_t>(b)]));
      return fa > fb;
    });
    int branch = -1;
    double branch_score = -1;
    int probes = 0;
    for (int j : frac) {
      double v = sol.x[static_cast<size_t>(j)];
      double f_dn = v - std::floor(v), f_up = std::ceil(v) - v;
      bool reliable = cnt_dn[static_cast<size_t>(j)] >= opt.reliability &&
                      cnt_up[static_cast<size_t>(j)] >= opt.reliability;
      double d_dn, d_up;
      if (!reliable && probes < opt.strong_candidates) {
        ++probes;
        auto probe = [&](double l, double h) {
          double keep_l = work.lo[static_cast<size_t>(j)], keep_h = work.hi[static_cast<size_t>(j)];
          work.lo[static_cast<size_t>(j)] = l;
          work.hi[static_cast<size_t>(j)] = h;
          Solution ps = solve_warm(work, sol.basis);
          res.lp_iterations += ps.iterations;
          work.lo[static_cast<size_t>(j)] = keep_l;
          work.hi[static_cast<size_t>(j)] = keep_h;
          if (ps.status == Status::infeasible) return 1e18;
          if (ps.status != Status::optimal) return 0.0;
          return std::max(0.0, ps.obj - sol.obj);
        };
        d_dn = probe(work.lo[static_cast<size_t>(j)], std::floor(v));
        d_up = probe(std::ceil(v), work.hi[static_cast<size_t>(j)]);
        if (d_dn < 1e17 && f_dn > 1e-9) {
          pc_dn[static_cast<size_t>(j)] += d_dn / f_dn;
          cnt_dn[static_cast<size_t>(j)] += 1;
        }
        if (d_up < 1e17 && f_up > 1e-9) {
          pc_up[static_cast<size_t>(j)] += d_up / f_up;
          cnt_up[static_cast<size_t>(j)] += 1;
        }
      } else {
        double avg_dn = cnt_dn[static_cast<size_t>(j)]
                            ? pc_dn[static_cast<size_t>(j)] / cnt_dn[static_cast<size_t>(j)]
                            : 1.0;
        double avg_up = cnt_up[static_cast<size_t>(j)]
                            ? pc_up[static_cast<size_t>(j)] / cnt_up[static_cast<size_t>(j)]
                            : 1.0;
        d_dn = avg_dn * f_dn;
        d_up = avg_up * f_up;
      }
      double score = std::max(d_dn, 1e-12) * std::max(d_up, 1e-12);
      if (score > branch_score) {
        branch_score = score;
        branch = j;
      }
    }

    double v = sol.x[static_cast<size_t>(branch)];
    detail::BbNode down{sol.obj, next_id++, node.fixes, sol.basis};
    down.fixes.emplace_back(branch, -kInf, std::floor(v));
    detail::BbNode up{sol.obj, next_id++, node.fixes, std::move(sol.basis)};
    up.fixes.emplace_back(branch, std::ceil(v), kInf);
    open.push(std::move(down));
    open.push(std::move(up));
  }

  if (incumbent < kInf) {
    res.status = Status::optimal;
    res.obj = incumbent;
    res.bound = open.empty() ? incumbent : std::min(global_bound, incumbent);
    res.x = std::move(best_x);
  } else {
    res.status = Status::infeasible;
    res.bound = global_bound;
  }
  return res;
}

}  // namespace gridhard::lp
