#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <functional>
#include <random>

#include "gridhard/simplex.hpp"

using namespace gridhard;
using namespace gridhard::lp;

namespace {

TEST(Simplex, SmallKnownOptimum) {
  Lp p;
  int x = p.add_col(-1, 0, kInf);
  int y = p.add_col(-2, 0, kInf);
  p.add_row(RowType::le, 4, {{x, 1}, {y, 1}});
  p.add_row(RowType::le, 3, {{x, 1}});
  p.add_row(RowType::le, 2, {{y, 1}});
  auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.obj, -6.0, 1e-9);
  EXPECT_NEAR(s.x[static_cast<size_t>(x)], 2.0, 1e-9);
  EXPECT_NEAR(s.x[static_cast<size_t>(y)], 2.0, 1e-9);
}

TEST(Simplex, EqualityAndFreeVariable) {
  Lp p;
  int x = p.add_col(1, 0, 10);
  int y = p.add_col(1, -kInf, kInf);
  p.add_row(RowType::eq, 3, {{x, 1}, {y, -1}});
  auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.obj, -3.0, 1e-9);
  EXPECT_NEAR(s.x[static_cast<size_t>(x)], 0.0, 1e-9);
  EXPECT_NEAR(s.x[static_cast<size_t>(y)], -3.0, 1e-9);
}

TEST(Simplex, PureBoundFlipNoRows) {
  Lp p;
  int x = p.add_col(-1, 0, 5);
  int y = p.add_col(2, -1, 3);
  auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.obj, -7.0, 1e-12);
  EXPECT_NEAR(s.x[static_cast<size_t>(x)], 5.0, 1e-12);
  EXPECT_NEAR(s.x[static_cast<size_t>(y)], -1.0, 1e-12);
}

TEST(Simplex, DetectsInfeasible) {
  Lp p;
  int x = p.add_col(1, 0, 10);
  p.add_row(RowType::le, 1, {{x, 1}});
  p.add_row(RowType::ge, 2, {{x, 1}});
  EXPECT_EQ(solve(p).status, Status::infeasible);
}

TEST(Simplex, DetectsUnbounded) {
  Lp p;
  int x = p.add_col(-1, 0, kInf);
  int y = p.add_col(0, 0, kInf);
  p.add_row(RowType::ge, 0, {{x, 1}, {y, -1}});
  EXPECT_EQ(solve(p).status, Status::unbounded);
}

TEST(Simplex, ObjOffsetCarried) {
  Lp p;
  p.obj_offset = 42.0;
  int x = p.add_col(1, 1, 5);
  (void)x;
  auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.obj, 43.0, 1e-12);
}

// --- randomized property tests ---

struct RndLp {
  Lp p;
  std::vector<double> x0;  // known feasible point
};

RndLp random_lp(Rng& rng, int n, int m) {
  std::uniform_real_distribution<double> U(-1, 1);
  std::uniform_int_distribution<int> type(0, 2);
  RndLp r;
  for (int j = 0; j < n; ++j) {
    double lo = -1 - std::abs(U(rng)) * 2, hi = 1 + std::abs(U(rng)) * 2;
    int kind = type(rng);
    if (kind == 0) lo = -kInf;  // mix in one-sided and free columns
    r.p.add_col(U(rng), lo, hi);
    double l = std::isfinite(lo) ? lo : -2.0;
    r.x0.push_back(l + (hi - l) * std::abs(U(rng)) * 0.5);
  }
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> entries;
    double act = 0;
    for (int j = 0; j < n; ++j) {
      double a = U(rng);
      if (std::abs(a) < 0.2) continue;
      entries.push_back({j, a});
      act += a * r.x0[static_cast<size_t>(j)];
    }
    int t = type(rng);
    if (t == 0) r.p.add_row(RowType::le, act + std::abs(U(rng)), entries);
    else if (t == 1) r.p.add_row(RowType::ge, act - std::abs(U(rng)), entries);
    else r.p.add_row(RowType::eq, act, entries);
  }
  return r;
}

double row_activity(const Lp& p, int row, const std::vector<double>& x) {
  double act = 0;
  for (int j = 0; j < p.n_cols(); ++j)
    for (auto [rr, a] : p.cols[static_cast<size_t>(j)])
      if (rr == row) act += a * x[static_cast<size_t>(j)];
  return act;
}

void check_kkt(const Lp& p, const Solution& s) {
  const double tol = 1e-6;
  for (int j = 0; j < p.n_cols(); ++j) {
    EXPECT_GE(s.x[static_cast<size_t>(j)], p.lo[static_cast<size_t>(j)] - tol);
    EXPECT_LE(s.x[static_cast<size_t>(j)], p.hi[static_cast<size_t>(j)] + tol);
  }
  for (int i = 0; i < p.n_rows(); ++i) {
    double act = row_activity(p, i, s.x);
    switch (p.row_type[static_cast<size_t>(i)]) {
      case RowType::le: EXPECT_LE(act, p.rhs[static_cast<size_t>(i)] + tol); break;
      case RowType::ge: EXPECT_GE(act, p.rhs[static_cast<size_t>(i)] - tol); break;
      case RowType::eq: EXPECT_NEAR(act, p.rhs[static_cast<size_t>(i)], tol); break;
    }
  }
  // stationarity and sign conditions from the returned statuses; slack
  // columns carry d = -y, which also encodes complementary slackness.
  // Fixed columns (equality slacks) have unrestricted duals.
  for (int j = 0; j < p.n_cols() + p.n_rows(); ++j) {
    double d;
    if (j < p.n_cols()) {
      if (p.lo[static_cast<size_t>(j)] == p.hi[static_cast<size_t>(j)]) continue;
      d = p.c[static_cast<size_t>(j)];
      for (auto [row, a] : p.cols[static_cast<size_t>(j)]) d -= a * s.dual[static_cast<size_t>(row)];
    } else {
      if (p.row_type[static_cast<size_t>(j - p.n_cols())] == RowType::eq) continue;
      d = -s.dual[static_cast<size_t>(j - p.n_cols())];
    }
    switch (s.basis.status[static_cast<size_t>(j)]) {
      case VarStatus::basic: EXPECT_NEAR(d, 0.0, tol) << "col " << j; break;
      case VarStatus::at_lower: EXPECT_GE(d, -tol) << "col " << j; break;
      case VarStatus::at_upper: EXPECT_LE(d, tol) << "col " << j; break;
      case VarStatus::free_zero: EXPECT_NEAR(d, 0.0, tol) << "col " << j; break;
    }
  }
}

TEST(Simplex, RandomInstancesSatisfyKkt) {
  Rng rng(2024);
  std::uniform_int_distribution<int> N(3, 12), M(2, 8);
  int solved = 0;
  for (int it = 0; it < 60; ++it) {
    RndLp r = random_lp(rng, N(rng), M(rng));
    auto s = solve(r.p);
    // feasible by construction unless columns are one-sided free (still feasible)
    ASSERT_NE(s.status, Status::infeasible) << "instance " << it;
    if (s.status != Status::optimal) continue;  // unbounded is legitimate
    ++solved;
    check_kkt(r.p, s);
  }
  EXPECT_GE(solved, 30);
}

/* Independent oracle: enumerate all bases (choices of m basic columns among
 * structural+slack, with every nonbasic pinned to one of its finite bounds)
 * and take the best feasible candidate. Exponential, so tiny shapes only. */
double enumerate_optimum(const Lp& p) {
  int n = p.n_cols(), m = p.n_rows(), tot = n + m;
  std::vector<double> lo(p.lo), hi(p.hi);
  for (int i = 0; i < m; ++i) {
    switch (p.row_type[static_cast<size_t>(i)]) {
      case RowType::le: lo.push_back(0); hi.push_back(kInf); break;
      case RowType::ge: lo.push_back(-kInf); hi.push_back(0); break;
      case RowType::eq: lo.push_back(0); hi.push_back(0); break;
    }
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, tot);
  for (int j = 0; j < n; ++j)
    for (auto [row, a] : p.cols[static_cast<size_t>(j)]) A(row, j) = a;
  for (int i = 0; i < m; ++i) A(i, n + i) = 1.0;
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(p.rhs.data(), m);

  double best = kInf;
  std::vector<int> pick;
  std::vector<int> idx(static_cast<size_t>(tot));
  for (int j = 0; j < tot; ++j) idx[static_cast<size_t>(j)] = j;
  std::vector<int> comb(static_cast<size_t>(m));
  std::function<void(int, int)> rec = [&](int start, int k) {
    if (k == m) {
      Eigen::MatrixXd B(m, m);
      for (int i = 0; i < m; ++i) B.col(i) = A.col(comb[static_cast<size_t>(i)]);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
      if (!lu.isInvertible()) return;
      std::vector<int> nb;
      std::vector<char> isb(static_cast<size_t>(tot), 0);
      for (int i = 0; i < m; ++i) isb[static_cast<size_t>(comb[static_cast<size_t>(i)])] = 1;
      for (int j = 0; j < tot; ++j)
        if (!isb[static_cast<size_t>(j)]) nb.push_back(j);
      int nn = static_cast<int>(nb.size());
      for (long mask = 0; mask < (1L << nn); ++mask) {
        Eigen::VectorXd rhs = b;
        double cnb = 0;
        bool ok = true;
        for (int t = 0; t < nn; ++t) {
          int j = nb[static_cast<size_t>(t)];
          double v = (mask >> t) & 1 ? hi[static_cast<size_t>(j)] : lo[static_cast<size_t>(j)];
          if (!std::isfinite(v)) {  // no vertex pins a variable at an infinite bound
            ok = false;
            break;
          }
          rhs -= v * A.col(j);
          if (j < n) cnb += p.c[static_cast<size_t>(j)] * v;
        }
        if (!ok) continue;
        Eigen::VectorXd xb = lu.solve(rhs);
        double cb = 0;
        bool feas = true;
        for (int i = 0; i < m && feas; ++i) {
          int j = comb[static_cast<size_t>(i)];
          if (xb[i] < lo[static_cast<size_t>(j)] - 1e-7 || xb[i] > hi[static_cast<size_t>(j)] + 1e-7)
            feas = false;
          else if (j < n) cb += p.c[static_cast<size_t>(j)] * xb[i];
        }
        if (feas) best = std::min(best, cb + cnb + p.obj_offset);
      }
      return;
    }
    for (int j = start; j <= tot - (m - k); ++j) {
      comb[static_cast<size_t>(k)] = j;
      rec(j + 1, k + 1);
    }
  };
  rec(0, 0);
  return best;
}

TEST(Simplex, MatchesBasisEnumerationOnTinyInstances) {
  Rng rng(77);
  std::uniform_int_distribution<int> N(2, 4), M(1, 3);
  int compared = 0;
  for (int it = 0; it < 40; ++it) {
    RndLp r = random_lp(rng, N(rng), M(rng));
    // clamp unbounded directions so enumeration stays meaningful
    for (int j = 0; j < r.p.n_cols(); ++j) {
      if (!std::isfinite(r.p.lo[static_cast<size_t>(j)])) r.p.lo[static_cast<size_t>(j)] = -4;
      if (!std::isfinite(r.p.hi[static_cast<size_t>(j)])) r.p.hi[static_cast<size_t>(j)] = 4;
    }
    auto s = solve(r.p);
    ASSERT_EQ(s.status, Status::optimal) << "instance " << it;
    double oracle = enumerate_optimum(r.p);
    ASSERT_TRUE(std::isfinite(oracle));
    EXPECT_NEAR(s.obj, oracle, 1e-6) << "instance " << it;
    ++compared;
  }
  EXPECT_EQ(compared, 40);
}

TEST(Simplex, WarmStartAfterBoundChangesMatchesColdSolve) {
  Rng rng(99);
  std::uniform_int_distribution<int> N(4, 10), M(2, 6);
  std::uniform_real_distribution<double> U(0, 1);
  int exercised = 0;
  for (int it = 0; it < 40; ++it) {
    RndLp r = random_lp(rng, N(rng), M(rng));
    for (int j = 0; j < r.p.n_cols(); ++j) {
      if (!std::isfinite(r.p.lo[static_cast<size_t>(j)])) r.p.lo[static_cast<size_t>(j)] = -4;
      if (!std::isfinite(r.p.hi[static_cast<size_t>(j)])) r.p.hi[static_cast<size_t>(j)] = 4;
    }
    auto s0 = solve(r.p);
    ASSERT_EQ(s0.status, Status::optimal);
    // tighten a couple of bounds around the optimum to force dual repairs
    Lp tight = r.p;
    for (int j = 0; j < tight.n_cols(); ++j) {
      if (U(rng) < 0.4) continue;
      double v = s0.x[static_cast<size_t>(j)];
      if (U(rng) < 0.5) tight.lo[static_cast<size_t>(j)] = std::min(v + 0.3, tight.hi[static_cast<size_t>(j)]);
      else tight.hi[static_cast<size_t>(j)] = std::max(v - 0.3, tight.lo[static_cast<size_t>(j)]);
    }
    auto warm = solve_warm(tight, s0.basis);
    auto cold = solve(tight);
    ASSERT_EQ(warm.status, cold.status) << "instance " << it;
    if (cold.status == Status::optimal) {
      EXPECT_NEAR(warm.obj, cold.obj, 1e-6) << "instance " << it;
      check_kkt(tight, warm);
      ++exercised;
    }
  }
  EXPECT_GE(exercised, 20);
}

TEST(Simplex, DegenerateTransportTerminates) {
  // balanced transport with many ties; exercises degenerate pivots
  Lp p;
  int n = 4;
  std::vector<std::vector<int>> xs(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      xs[static_cast<size_t>(i)][static_cast<size_t>(j)] = p.add_col((i == j) ? 1 : 2, 0, kInf);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> row;
    for (int j = 0; j < n; ++j) row.push_back({xs[static_cast<size_t>(i)][static_cast<size_t>(j)], 1.0});
    p.add_row(RowType::eq, 1, row);
  }
  for (int j = 0; j < n; ++j) {
    std::vector<std::pair<int, double>> row;
    for (int i = 0; i < n; ++i) row.push_back({xs[static_cast<size_t>(i)][static_cast<size_t>(j)], 1.0});
    p.add_row(RowType::eq, 1, row);
  }
  auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.obj, 4.0, 1e-9);  // identity assignment
}

}  // namespace
