#pragma once

/* Geometry of the ambiguity set
 *   C = { p : p >= 0, sum p = 1, ||p - pbar||_2 <= d }:
 * Euclidean projection onto C, a KKT residual checker, and the worst-case
 * expectation max_{p in C} c.p. Both optimizations reduce to two dual
 * multipliers; the simplex part is an exact sort-threshold, the ball part a
 * scalar bisection (projection) or an active-set sweep (worst case). */

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "gridhard/common.hpp"

namespace gridhard {

/* Exact projection onto the probability simplex (sort-threshold). */
inline std::vector<double> project_simplex(std::vector<double> v) {
  if (v.empty()) throw ConfigError("project_simplex: empty vector");
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0, theta = u[0] - 1.0;
  for (size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    double th = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - th > 0) theta = th;  // condition holds for a prefix; keep the last
  }
  for (auto& x : v) x = std::max(0.0, x - theta);
  return v;
}

namespace detail {

inline double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline void check_center(const std::vector<double>& pbar) {
  double sum = 0;
  for (double v : pbar) {
    if (v < -1e-9) throw ConfigError("ambiguity center has negative mass");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("ambiguity center not normalized");
}

// simplex projection of the blend (q + lam * pbar) / (1 + lam)
inline std::vector<double> blend_project(const std::vector<double>& q,
                                         const std::vector<double>& pbar, double lam) {
  std::vector<double> v(q.size());
  for (size_t i = 0; i < q.size(); ++i) v[i] = (q[i] + lam * pbar[i]) / (1.0 + lam);
  return project_simplex(std::move(v));
}

}  // namespace detail

/* Projection of q onto C. The stationarity system for a fixed ball
 * multiplier lam is exactly a simplex projection of a blend of q and pbar;
 * ||p(lam) - pbar|| decreases continuously to 0, so bisection on lam closes
 * the ball constraint. */
inline std::vector<double> project_ambiguity(const std::vector<double>& q,
                                             const std::vector<double>& pbar, double d) {
  if (q.size() != pbar.size() || q.empty()) throw ConfigError("project_ambiguity: size mismatch");
  if (d < 0) throw ConfigError("project_ambiguity: negative radius");
  detail::check_center(pbar);
  if (d == 0) return pbar;
  std::vector<double> p0 = project_simplex(q);
  if (std::sqrt(detail::dist2(p0, pbar)) <= d) return p0;  // ball already slack
  double lo = 0, hi = 1;
  while (detail::dist2(detail::blend_project(q, pbar, hi), pbar) > d * d && hi < 1e18) hi *= 2;
  for (int it = 0; it < 120; ++it) {
    double mid = 0.5 * (lo + hi);
    if (detail::dist2(detail::blend_project(q, pbar, mid), pbar) > d * d) lo = mid;
    else hi = mid;
  }
  return detail::blend_project(q, pbar, hi);  // feasible endpoint
}

/* Max KKT violation of p as the claimed projection of q onto C. The two
 * multipliers are reconstructed from the positive components by least
 * squares, so the checker is independent of how p was produced. */
inline double projection_kkt_residual(const std::vector<double>& p, const std::vector<double>& q,
                                      const std::vector<double>& pbar, double d) {
  size_t n = p.size();
  double sum = 0;
  for (double v : p) sum += v;
  double dist = std::sqrt(detail::dist2(p, pbar));
  double worst = std::abs(sum - 1.0);
  for (double v : p) worst = std::max(worst, -v);
  worst = std::max(worst, dist - d);

  // stationarity: p - q + lam (p - pbar) + mu 1 = s, s >= 0, s.p = 0
  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (size_t i = 0; i < n; ++i) {
    if (p[i] <= 1e-12) continue;
    double g = p[i] - pbar[i];
    a11 += g * g;
    a12 += g;
    a22 += 1;
    b1 += g * (q[i] - p[i]);
    b2 += q[i] - p[i];
  }
  double det = a11 * a22 - a12 * a12;
  double lam, mu;
  if (std::abs(det) > 1e-14 * std::max(1.0, a11 * a22)) {
    lam = (b1 * a22 - b2 * a12) / det;
    mu = (a11 * b2 - a12 * b1) / det;
  } else {
    lam = 0;
    mu = a22 > 0 ? b2 / a22 : 0;
  }
  if (lam < 0 || dist < d - 1e-9) {  // ball slack forces lam = 0
    lam = 0;
    mu = a22 > 0 ? b2 / a22 : 0;
  }
  for (size_t i = 0; i < n; ++i) {
    double s = p[i] - q[i] + lam * (p[i] - pbar[i]) + mu;
    if (p[i] > 1e-12) worst = std::max(worst, std::abs(s));
    else worst = std::max(worst, -s);
  }
  worst = std::max(worst, lam * std::max(0.0, d - dist));  // complementarity
  return worst;
}

struct WorstCase {
  double value = 0;
  std::vector<double> p;
};

/* max_{p in C} c.p by active-set elimination. On the face p_Z = 0 the
 * optimum is the hyperplane-recentred ball center pushed distance r along
 * the tangential component of c; negative entries move into Z. A KKT check
 * guards the sweep and reinstates a wrongly zeroed coordinate. */
inline WorstCase worst_case_distribution(const std::vector<double>& c,
                                         const std::vector<double>& pbar, double d) {
  size_t n = c.size();
  if (n == 0 || pbar.size() != n) throw ConfigError("worst_case: size mismatch");
  if (d < 0) throw ConfigError("worst_case: negative radius");
  detail::check_center(pbar);
  WorstCase out;
  if (d == 0) {
    out.p = pbar;
    for (size_t i = 0; i < n; ++i) out.value += c[i] * pbar[i];
    return out;
  }
  // ball covers every vertex: pure worst scenario
  double need = 0;
  for (size_t i = 0; i < n; ++i) {
    double vdist2 = 0;
    for (size_t j = 0; j < n; ++j) {
      double e = (j == i ? 1.0 : 0.0) - pbar[j];
      vdist2 += e * e;
    }
    need = std::max(need, vdist2);
  }
  if (d * d >= need) {
    size_t best = 0;
    for (size_t i = 1; i < n; ++i)
      if (c[i] > c[best]) best = i;
    out.p.assign(n, 0.0);
    out.p[best] = 1.0;
    out.value = c[best];
    return out;
  }

  std::vector<char> zero(n, 0);
  std::vector<double> p(n, 0.0);
  for (int guard = 0; guard < 4 * static_cast<int>(n) + 8; ++guard) {
    double massZ = 0, z2 = 0;
    size_t nf = 0;
    for (size_t i = 0; i < n; ++i) {
      if (zero[i]) {
        massZ += pbar[i];
        z2 += pbar[i] * pbar[i];
      } else {
        ++nf;
      }
    }
    if (nf == 0) throw SolveError("worst_case: emptied the support");
    double r2 = d * d - z2 - massZ * massZ / static_cast<double>(nf);
    if (r2 < 0) r2 = 0;  // slice only just reachable
    double cmean = 0;
    for (size_t i = 0; i < n; ++i)
      if (!zero[i]) cmean += c[i];
    cmean /= static_cast<double>(nf);
    double gnorm2 = 0;
    for (size_t i = 0; i < n; ++i)
      if (!zero[i]) gnorm2 += (c[i] - cmean) * (c[i] - cmean);
    double step = gnorm2 > 1e-24 ? std::sqrt(r2 / gnorm2) : 0.0;
    double worst_neg = -1e-12;
    size_t worst_i = n;
    for (size_t i = 0; i < n; ++i) {
      if (zero[i]) {
        p[i] = 0;
        continue;
      }
      p[i] = pbar[i] + massZ / static_cast<double>(nf) + step * (c[i] - cmean);
      if (p[i] < worst_neg) {
        worst_neg = p[i];
        worst_i = i;
      }
    }
    if (worst_i < n) {
      zero[worst_i] = 1;
      continue;
    }
    // candidate feasible; verify zeroed coordinates want to stay at zero
    double lam2 = step > 0 ? 1.0 / step : 0.0;  // 2*lambda in the KKT system
    double mu = cmean - lam2 * massZ / static_cast<double>(nf);
    bool repaired = false;
    for (size_t i = 0; i < n && !repaired; ++i) {
      if (!zero[i]) continue;
      if (c[i] - mu + lam2 * pbar[i] > 1e-10) {  // positive gain re-entering
        zero[i] = 0;
        repaired = true;
      }
    }
    if (repaired) continue;
    for (size_t i = 0; i < n; ++i) p[i] = std::max(0.0, p[i]);
    out.p = p;
    out.value = 0;
    for (size_t i = 0; i < n; ++i) out.value += c[i] * p[i];
    return out;
  }
  throw SolveError("worst_case: active set failed to settle");
}

/* KKT residual for the worst-case maximizer, mirroring the projection
 * checker (multipliers reconstructed by least squares from the support). */
inline double worst_case_kkt_residual(const std::vector<double>& p, const std::vector<double>& c,
                                      const std::vector<double>& pbar, double d) {
  size_t n = p.size();
  double sum = 0;
  for (double v : p) sum += v;
  double dist = std::sqrt(detail::dist2(p, pbar));
  double worst = std::abs(sum - 1.0);
  for (double v : p) worst = std::max(worst, -v);
  worst = std::max(worst, dist - d);
  // stationarity for max: c - mu 1 - lam2 (p - pbar) + s = 0 on the support
  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (size_t i = 0; i < n; ++i) {
    if (p[i] <= 1e-12) continue;
    double g = p[i] - pbar[i];
    a11 += g * g;
    a12 += g;
    a22 += 1;
    b1 += g * c[i];
    b2 += c[i];
  }
  double det = a11 * a22 - a12 * a12;
  double lam2, mu;
  if (std::abs(det) > 1e-14 * std::max(1.0, a11 * a22)) {
    lam2 = (b1 * a22 - b2 * a12) / det;
    mu = (a11 * b2 - a12 * b1) / det;
  } else {
    lam2 = 0;
    mu = a22 > 0 ? b2 / a22 : 0;
  }
  if (lam2 < 0 || dist < d - 1e-9) {
    lam2 = 0;
    mu = a22 > 0 ? b2 / a22 : 0;
  }
  for (size_t i = 0; i < n; ++i) {
    double s = c[i] - mu - lam2 * (p[i] - pbar[i]);
    if (p[i] > 1e-12) worst = std::max(worst, std::abs(s));
    else worst = std::max(worst, s);  // re-entry would increase the objective
  }
  worst = std::max(worst, lam2 * std::max(0.0, d - dist));
  return worst;
}

}  // namespace gridhard
