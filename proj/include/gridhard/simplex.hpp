#pragma once

/* Bounded-variable revised simplex over a dense inverse (Eigen), sized for
 * the restoration models here (hundreds of rows). Cold solves run a two-phase
 * primal with explicit artificials; warm solves run dual simplex from a saved
 * basis after bound changes (the branch-and-bound use case), then a primal
 * cleanup pass. Dantzig pricing with a Bland fallback on degenerate runs,
 * periodic refactorization of the inverse. */

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridhard/common.hpp"

namespace gridhard::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowType : std::uint8_t { le, ge, eq };
enum class Status : std::uint8_t { optimal, infeasible, unbounded, iter_limit };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iter_limit: return "iter_limit";
  }
  return "?";
}

enum class VarStatus : std::uint8_t { basic, at_lower, at_upper, free_zero };

struct Lp {
  std::vector<double> c, lo, hi;
  std::vector<std::vector<std::pair<int, double>>> cols;  // per column: (row, coef)
  std::vector<RowType> row_type;
  std::vector<double> rhs;
  double obj_offset = 0.0;

  int n_cols() const { return static_cast<int>(c.size()); }
  int n_rows() const { return static_cast<int>(rhs.size()); }

  int add_col(double cost, double l, double h) {
    if (l > h) throw ConfigError("lp column with empty bound interval");
    c.push_back(cost);
    lo.push_back(l);
    hi.push_back(h);
    cols.emplace_back();
    return n_cols() - 1;
  }

  int add_row(RowType t, double b) {
    row_type.push_back(t);
    rhs.push_back(b);
    return n_rows() - 1;
  }

  int add_row(RowType t, double b, const std::vector<std::pair<int, double>>& entries) {
    int r = add_row(t, b);
    for (auto [j, v] : entries) coef(r, j, v);
    return r;
  }

  void coef(int row, int col, double v) {
    if (v == 0.0) return;
    cols[static_cast<size_t>(col)].push_back({row, v});
  }
};

/* Basis snapshot for warm starts. `basic` holds one column per row; -1 marks
 * a redundant row carried by an internal artificial. `status` covers the
 * structural + slack columns. */
struct Basis {
  std::vector<int> basic;
  std::vector<VarStatus> status;
  bool empty() const { return basic.empty(); }
};

struct Solution {
  Status status = Status::iter_limit;
  double obj = 0.0;
  std::vector<double> x;     // structural values
  std::vector<double> dual;  // row duals (phase-2 costs)
  Basis basis;
  long iterations = 0;
};

class Simplex {
 public:
  explicit Simplex(const Lp& p)
      : n_(p.n_cols()), m_(p.n_rows()), total_(n_ + 2 * m_), prob_(p) {
    col_.resize(static_cast<size_t>(total_));
    lo_.assign(static_cast<size_t>(total_), 0.0);
    hi_.assign(static_cast<size_t>(total_), 0.0);
    cost_.assign(static_cast<size_t>(total_), 0.0);
    for (int j = 0; j < n_; ++j) {
      col_[static_cast<size_t>(j)] = p.cols[static_cast<size_t>(j)];
      lo_[static_cast<size_t>(j)] = p.lo[static_cast<size_t>(j)];
      hi_[static_cast<size_t>(j)] = p.hi[static_cast<size_t>(j)];
      cost_[static_cast<size_t>(j)] = p.c[static_cast<size_t>(j)];
    }
    for (int i = 0; i < m_; ++i) {
      int j = n_ + i;
      col_[static_cast<size_t>(j)] = {{i, 1.0}};
      switch (p.row_type[static_cast<size_t>(i)]) {
        case RowType::le: lo_[static_cast<size_t>(j)] = 0.0; hi_[static_cast<size_t>(j)] = kInf; break;
        case RowType::ge: lo_[static_cast<size_t>(j)] = -kInf; hi_[static_cast<size_t>(j)] = 0.0; break;
        case RowType::eq: lo_[static_cast<size_t>(j)] = 0.0; hi_[static_cast<size_t>(j)] = 0.0; break;
      }
    }
    // artificial column signs get set at cold start; keep them unusable now
    for (int i = 0; i < m_; ++i) {
      int j = n_ + m_ + i;
      col_[static_cast<size_t>(j)] = {{i, 1.0}};
      lo_[static_cast<size_t>(j)] = 0.0;
      hi_[static_cast<size_t>(j)] = 0.0;
    }
    b_ = Eigen::Map<const Eigen::VectorXd>(p.rhs.data(), m_);
  }

  Solution solve() {
    init_cold();
    Solution out;
    std::vector<double> phase1(static_cast<size_t>(total_), 0.0);
    for (int i = 0; i < m_; ++i) phase1[static_cast<size_t>(n_ + m_ + i)] = 1.0;
    // a stall with leftover artificials can be inverse drift rather than a
    // true infeasibility; refactorize and re-run before believing the verdict
    Status s1 = Status::infeasible;
    double infeas = kInf;
    for (int attempt = 0; attempt < 3; ++attempt) {
      if (attempt > 0) {
        if (!refactor()) break;
        compute_xB();
      }
      s1 = primal(phase1, true);
      if (s1 == Status::iter_limit) return finish(out, s1);
      infeas = 0;
      for (int i = 0; i < m_; ++i)
        if (basic_pos_[static_cast<size_t>(n_ + m_ + i)] >= 0)
          infeas += std::abs(xB_[basic_pos_[static_cast<size_t>(n_ + m_ + i)]]);
      if (s1 == Status::optimal && infeas <= 1e-7) break;
    }
    if (s1 != Status::optimal || infeas > 1e-7) return finish(out, Status::infeasible);
    seal_artificials();
    Status s2 = primal(cost_, false);
    return finish(out, s2);
  }

  /* Dual simplex from a saved basis after bound edits, then a primal pass.
   * Assumes the basis came from this problem's costs (branch-and-bound). */
  Solution solve_from(const Basis& warm) {
    if (static_cast<int>(warm.basic.size()) != m_ ||
        static_cast<int>(warm.status.size()) != n_ + m_)
      throw ConfigError("warm basis has wrong shape");
    st_.assign(static_cast<size_t>(total_), VarStatus::at_lower);
    for (int j = 0; j < n_ + m_; ++j) st_[static_cast<size_t>(j)] = warm.status[static_cast<size_t>(j)];
    for (int i = 0; i < m_; ++i) {
      int j = n_ + m_ + i;
      lo_[static_cast<size_t>(j)] = hi_[static_cast<size_t>(j)] = 0.0;
      st_[static_cast<size_t>(j)] = VarStatus::at_lower;
    }
    basic_.resize(static_cast<size_t>(m_));
    for (int i = 0; i < m_; ++i) {
      int j = warm.basic[static_cast<size_t>(i)];
      basic_[static_cast<size_t>(i)] = j >= 0 ? j : n_ + m_ + i;
      st_[static_cast<size_t>(basic_[static_cast<size_t>(i)])] = VarStatus::basic;
    }
    // nonbasic statuses may point at infinite bounds after edits; repair
    for (int j = 0; j < total_; ++j) {
      if (st_[static_cast<size_t>(j)] == VarStatus::basic) continue;
      st_[static_cast<size_t>(j)] = nonbasic_home(j, st_[static_cast<size_t>(j)]);
    }
    rebuild_positions();
    if (!refactor()) {
      Solution out;
      init_cold_keep_nothing();
      return solve();
    }
    compute_xB();
    Status sd = dual(cost_);
    Solution out;
    if (sd == Status::infeasible) return finish(out, Status::infeasible);
    if (sd == Status::iter_limit) {
      init_cold_keep_nothing();
      return solve();
    }
    Status s2 = primal(cost_, false);
    return finish(out, s2);
  }

 private:
  int n_, m_, total_;
  const Lp& prob_;
  std::vector<std::vector<std::pair<int, double>>> col_;
  std::vector<double> lo_, hi_, cost_;
  Eigen::VectorXd b_;

  std::vector<VarStatus> st_;
  std::vector<int> basic_;      // per row: column index
  std::vector<int> basic_pos_;  // per column: row position or -1
  Eigen::MatrixXd Binv_;
  Eigen::VectorXd xB_;
  long iters_ = 0;
  int since_refactor_ = 0;
  int degen_run_ = 0;
  static constexpr long kMaxIters = 200000;
  static constexpr int kRefactorEvery = 100;
  static constexpr double kTolOpt = 1e-9;
  static constexpr double kTolFeas = 1e-8;
  static constexpr double kTolPivot = 1e-8;

  double nb_value(int j) const {
    switch (st_[static_cast<size_t>(j)]) {
      case VarStatus::at_lower: return lo_[static_cast<size_t>(j)];
      case VarStatus::at_upper: return hi_[static_cast<size_t>(j)];
      default: return 0.0;
    }
  }

  VarStatus nonbasic_home(int j, VarStatus want) const {
    double l = lo_[static_cast<size_t>(j)], h = hi_[static_cast<size_t>(j)];
    if (want == VarStatus::at_lower && std::isfinite(l)) return VarStatus::at_lower;
    if (want == VarStatus::at_upper && std::isfinite(h)) return VarStatus::at_upper;
    if (std::isfinite(l)) return VarStatus::at_lower;
    if (std::isfinite(h)) return VarStatus::at_upper;
    return VarStatus::free_zero;
  }

  void rebuild_positions() {
    basic_pos_.assign(static_cast<size_t>(total_), -1);
    for (int i = 0; i < m_; ++i) basic_pos_[static_cast<size_t>(basic_[static_cast<size_t>(i)])] = i;
  }

  void init_cold_keep_nothing() { init_cold(); }

  void init_cold() {
    st_.assign(static_cast<size_t>(total_), VarStatus::at_lower);
    for (int j = 0; j < n_ + m_; ++j) {
      double l = lo_[static_cast<size_t>(j)], h = hi_[static_cast<size_t>(j)];
      if (std::isfinite(l)) st_[static_cast<size_t>(j)] = VarStatus::at_lower;
      else if (std::isfinite(h)) st_[static_cast<size_t>(j)] = VarStatus::at_upper;
      else st_[static_cast<size_t>(j)] = VarStatus::free_zero;
    }
    // residual of the bound solution; a slack absorbs it where its bounds
    // allow (so only equality-style rows get artificials), otherwise a
    // signed artificial carries it
    Eigen::VectorXd r = b_;
    for (int j = 0; j < n_; ++j) {
      double v = nb_value(j);
      if (v != 0.0)
        for (auto [row, a] : col_[static_cast<size_t>(j)]) r[row] -= a * v;
    }
    basic_.resize(static_cast<size_t>(m_));
    Binv_.setIdentity(m_, m_);
    for (int i = 0; i < m_; ++i) {
      int sj = n_ + i, aj = n_ + m_ + i;
      col_[static_cast<size_t>(aj)] = {{i, r[i] >= 0 ? 1.0 : -1.0}};
      if (r[i] >= lo_[static_cast<size_t>(sj)] && r[i] <= hi_[static_cast<size_t>(sj)]) {
        basic_[static_cast<size_t>(i)] = sj;
        st_[static_cast<size_t>(sj)] = VarStatus::basic;
        lo_[static_cast<size_t>(aj)] = hi_[static_cast<size_t>(aj)] = 0.0;
        st_[static_cast<size_t>(aj)] = VarStatus::at_lower;
      } else {
        lo_[static_cast<size_t>(aj)] = 0.0;
        hi_[static_cast<size_t>(aj)] = kInf;
        basic_[static_cast<size_t>(i)] = aj;
        st_[static_cast<size_t>(aj)] = VarStatus::basic;
        if (col_[static_cast<size_t>(aj)][0].second < 0) Binv_(i, i) = -1.0;
      }
    }
    rebuild_positions();
    xB_ = Binv_ * r;  // slack rows get r, artificial rows |r|
    iters_ = 0;
    since_refactor_ = 0;
    degen_run_ = 0;
  }

  void seal_artificials() {
    for (int i = 0; i < m_; ++i) {
      int j = n_ + m_ + i;
      hi_[static_cast<size_t>(j)] = 0.0;
      int pos = basic_pos_[static_cast<size_t>(j)];
      if (pos < 0) {
        st_[static_cast<size_t>(j)] = VarStatus::at_lower;
        continue;
      }
      // try to pivot the (zero valued) artificial out of the basis
      bool out = false;
      for (int q = 0; q < n_ + m_ && !out; ++q) {
        if (st_[static_cast<size_t>(q)] == VarStatus::basic) continue;
        if (lo_[static_cast<size_t>(q)] == hi_[static_cast<size_t>(q)]) continue;
        Eigen::VectorXd w = ftran(q);
        if (std::abs(w[pos]) > 1e-7) {
          st_[static_cast<size_t>(q)] = VarStatus::basic;
          st_[static_cast<size_t>(j)] = VarStatus::at_lower;
          apply_pivot(q, pos, w);  // degenerate swap at the artificial's zero value
          compute_xB();
          out = true;
        }
      }
      // a stuck artificial marks a redundant row; it stays basic at zero
    }
  }

  bool refactor() {
    Eigen::MatrixXd B(m_, m_);
    B.setZero();
    for (int i = 0; i < m_; ++i)
      for (auto [row, a] : col_[static_cast<size_t>(basic_[static_cast<size_t>(i)])]) B(row, i) = a;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    // partial pivoting has no rank probe; a vanishing U diagonal flags it
    Eigen::VectorXd du = lu.matrixLU().diagonal().cwiseAbs();
    double dmax = m_ > 0 ? du.maxCoeff() : 1.0;
    if (m_ > 0 && du.minCoeff() <= 1e-12 * std::max(dmax, 1.0)) return false;
    Binv_ = lu.inverse();
    since_refactor_ = 0;
    return true;
  }

  void compute_xB() {
    Eigen::VectorXd r = b_;
    for (int j = 0; j < total_; ++j) {
      if (st_[static_cast<size_t>(j)] == VarStatus::basic) continue;
      double v = nb_value(j);
      if (v != 0.0)
        for (auto [row, a] : col_[static_cast<size_t>(j)]) r[row] -= a * v;
    }
    xB_ = Binv_ * r;
  }

  Eigen::VectorXd ftran(int j) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m_);
    for (auto [row, a] : col_[static_cast<size_t>(j)]) w += a * Binv_.col(row);
    return w;
  }

  void apply_pivot(int enter, int row, const Eigen::VectorXd& w) {
    double piv = w[row];
    Binv_.row(row) /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      double f = w[i];
      if (f != 0.0) Binv_.row(i) -= f * Binv_.row(row);
    }
    basic_pos_[static_cast<size_t>(basic_[static_cast<size_t>(row)])] = -1;
    basic_[static_cast<size_t>(row)] = enter;
    basic_pos_[static_cast<size_t>(enter)] = row;
    if (++since_refactor_ >= kRefactorEvery) {
      refactor();
      compute_xB();
    }
  }

  Status primal(const std::vector<double>& cost, bool phase1) {
    bool bland = false;
    while (true) {
      if (++iters_ > kMaxIters) return Status::iter_limit;
      Eigen::VectorXd cB(m_);
      for (int i = 0; i < m_; ++i) cB[i] = cost[static_cast<size_t>(basic_[static_cast<size_t>(i)])];
      Eigen::VectorXd y = Binv_.transpose() * cB;
      int q = -1, qdir = 0;
      double best = kTolOpt;
      for (int j = 0; j < total_; ++j) {
        VarStatus s = st_[static_cast<size_t>(j)];
        if (s == VarStatus::basic) continue;
        if (lo_[static_cast<size_t>(j)] == hi_[static_cast<size_t>(j)]) continue;
        double d = cost[static_cast<size_t>(j)];
        for (auto [row, a] : col_[static_cast<size_t>(j)]) d -= a * y[row];
        int dir = 0;
        if (s == VarStatus::at_lower && d < -best) dir = 1;
        else if (s == VarStatus::at_upper && d > best) dir = -1;
        else if (s == VarStatus::free_zero && std::abs(d) > best) dir = d < 0 ? 1 : -1;
        if (dir != 0) {
          q = j;
          qdir = dir;
          if (bland) break;
          best = std::abs(d);
        }
      }
      if (q < 0) return Status::optimal;

      Eigen::VectorXd w = ftran(q);
      double limit = hi_[static_cast<size_t>(q)] - lo_[static_cast<size_t>(q)];  // bound flip span
      double t = std::isfinite(limit) ? limit : kInf;
      int leave = -1;
      double leave_pivot = 0;
      for (int i = 0; i < m_; ++i) {
        double rate = -qdir * w[i];  // d xB_i / d t
        if (std::abs(rate) < kTolPivot) continue;
        int bj = basic_[static_cast<size_t>(i)];
        double cap;
        if (rate > 0) {
          double u = hi_[static_cast<size_t>(bj)];
          if (!std::isfinite(u)) continue;
          cap = (u - xB_[i]) / rate;
        } else {
          double l = lo_[static_cast<size_t>(bj)];
          if (!std::isfinite(l)) continue;
          cap = (xB_[i] - l) / (-rate);
        }
        if (cap < -1e-9) cap = 0;  // already past the bound; degenerate exit
        if (cap < t - 1e-12 || (cap < t + 1e-12 && std::abs(w[i]) > std::abs(leave_pivot))) {
          t = cap;
          leave = i;
          leave_pivot = w[i];
        }
      }
      if (!std::isfinite(t)) return phase1 ? Status::infeasible : Status::unbounded;
      if (t < 1e-10) {
        if (++degen_run_ > 400) bland = true;
      } else {
        degen_run_ = 0;
        bland = false;
      }
      if (leave < 0) {
        // bound flip, no basis change
        xB_ -= (qdir * t) * w;
        st_[static_cast<size_t>(q)] =
            st_[static_cast<size_t>(q)] == VarStatus::at_lower ? VarStatus::at_upper : VarStatus::at_lower;
        continue;
      }
      int bj = basic_[static_cast<size_t>(leave)];
      double rate = -qdir * w[leave];
      VarStatus exit_to = rate > 0 ? VarStatus::at_upper : VarStatus::at_lower;
      double enter_val = nb_value(q) + qdir * t;
      xB_ -= (qdir * t) * w;
      st_[static_cast<size_t>(bj)] = exit_to;
      st_[static_cast<size_t>(q)] = VarStatus::basic;
      apply_pivot(q, leave, w);  // may refactor; statuses must be current
      if (since_refactor_ != 0) xB_[leave] = enter_val;
    }
  }

  Status dual(const std::vector<double>& cost) {
    long dual_iters = 0;
    while (true) {
      if (++dual_iters > 20000 || ++iters_ > kMaxIters) return Status::iter_limit;
      int r = -1;
      double worst = kTolFeas;
      bool below = false;
      for (int i = 0; i < m_; ++i) {
        int bj = basic_[static_cast<size_t>(i)];
        double v = xB_[i];
        double lov = lo_[static_cast<size_t>(bj)], hiv = hi_[static_cast<size_t>(bj)];
        if (v < lov - worst) {
          worst = lov - v;
          r = i;
          below = true;
        } else if (v > hiv + worst) {
          worst = v - hiv;
          r = i;
          below = false;
        }
      }
      if (r < 0) return Status::optimal;

      Eigen::VectorXd cB(m_);
      for (int i = 0; i < m_; ++i) cB[i] = cost[static_cast<size_t>(basic_[static_cast<size_t>(i)])];
      Eigen::VectorXd y = Binv_.transpose() * cB;
      Eigen::VectorXd rho = Binv_.row(r).transpose();

      int q = -1;
      double best_ratio = kInf, best_alpha = 0;
      for (int j = 0; j < total_; ++j) {
        VarStatus s = st_[static_cast<size_t>(j)];
        if (s == VarStatus::basic) continue;
        if (lo_[static_cast<size_t>(j)] == hi_[static_cast<size_t>(j)]) continue;
        double alpha = 0;
        for (auto [row, a] : col_[static_cast<size_t>(j)]) alpha += a * rho[row];
        if (std::abs(alpha) < kTolPivot) continue;
        bool ok;
        if (below)  // leaving var exits at its lower bound
          ok = (s == VarStatus::at_lower && alpha < 0) || (s == VarStatus::at_upper && alpha > 0) ||
               s == VarStatus::free_zero;
        else
          ok = (s == VarStatus::at_lower && alpha > 0) || (s == VarStatus::at_upper && alpha < 0) ||
               s == VarStatus::free_zero;
        if (!ok) continue;
        double d = cost[static_cast<size_t>(j)];
        for (auto [row, a] : col_[static_cast<size_t>(j)]) d -= a * y[row];
        double ratio = std::abs(d) / std::abs(alpha);
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && std::abs(alpha) > std::abs(best_alpha))) {
          best_ratio = ratio;
          best_alpha = alpha;
          q = j;
        }
      }
      if (q < 0) return Status::infeasible;

      int bj = basic_[static_cast<size_t>(r)];
      Eigen::VectorXd w = ftran(q);
      double target = below ? lo_[static_cast<size_t>(bj)] : hi_[static_cast<size_t>(bj)];
      double step = (xB_[r] - target) / w[r];  // change in entering variable
      double enter_val = nb_value(q) + step;
      xB_ -= step * w;
      st_[static_cast<size_t>(bj)] = below ? VarStatus::at_lower : VarStatus::at_upper;
      st_[static_cast<size_t>(q)] = VarStatus::basic;
      apply_pivot(q, r, w);  // may refactor; statuses must be current
      if (since_refactor_ != 0) xB_[r] = enter_val;
    }
  }

  Solution finish(Solution& out, Status s) {
    out.status = s;
    out.iterations = iters_;
    if (s != Status::optimal) return out;
    compute_xB();
    out.x.assign(static_cast<size_t>(n_), 0.0);
    for (int j = 0; j < n_; ++j) {
      int pos = basic_pos_[static_cast<size_t>(j)];
      out.x[static_cast<size_t>(j)] = pos >= 0 ? xB_[pos] : nb_value(j);
    }
    out.obj = prob_.obj_offset;
    for (int j = 0; j < n_; ++j) out.obj += prob_.c[static_cast<size_t>(j)] * out.x[static_cast<size_t>(j)];
    Eigen::VectorXd cB(m_);
    for (int i = 0; i < m_; ++i) cB[i] = cost_[static_cast<size_t>(basic_[static_cast<size_t>(i)])];
    Eigen::VectorXd y = Binv_.transpose() * cB;
    out.dual.assign(y.data(), y.data() + m_);
    out.basis.basic.resize(static_cast<size_t>(m_));
    for (int i = 0; i < m_; ++i) {
      int j = basic_[static_cast<size_t>(i)];
      out.basis.basic[static_cast<size_t>(i)] = j < n_ + m_ ? j : -1;
    }
    out.basis.status.assign(st_.begin(), st_.begin() + n_ + m_);
    return out;
  }
};

inline Solution solve(const Lp& p) { return Simplex(p).solve(); }

inline Solution solve_warm(const Lp& p, const Basis& basis) {
  if (basis.empty()) return Simplex(p).solve();
  return Simplex(p).solve_from(basis);
}

/* Pad a basis taken before rows were appended: each new row enters with its
 * slack basic, which dual iterations then repair. Columns must be unchanged. */
inline Basis extend_basis(Basis b, const Lp& p) {
  const size_t n = p.c.size(), m = p.rhs.size();
  if (b.empty()) return b;
  if (b.basic.size() > m || b.status.size() != n + b.basic.size())
    throw ConfigError("basis does not match problem");
  while (b.basic.size() < m) {
    b.basic.push_back(static_cast<int>(n + b.basic.size()));
    b.status.push_back(VarStatus::basic);
  }
  return b;
}

}  // namespace gridhard::lp
