#pragma once

/* Dirichlet posterior over fault scenarios plus the shrinking ambiguity
 * radius. Counts start at a flat prior; every translated observation adds
 * exactly one unit of mass split across scenarios. */

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gridhard/common.hpp"

namespace gridhard {

struct DirichletPosterior {
  std::vector<double> counts;

  DirichletPosterior() = default;
  explicit DirichletPosterior(size_t n_scen, double prior = 1.0) : counts(n_scen, prior) {
    if (prior <= 0) throw ConfigError("dirichlet prior must be positive");
  }

  double total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

  std::vector<double> mean() const {
    double tot = total();
    if (tot <= 0) throw ConfigError("dirichlet counts sum to zero");
    std::vector<double> m(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) m[i] = counts[i] / tot;
    return m;
  }
};

/* Soft count update with a distribution rather than a single category.
 * The observation must already be a probability vector. */
inline void bayes_update(DirichletPosterior& post, const std::vector<double>& o) {
  if (o.size() != post.counts.size()) throw ConfigError("bayes_update: size mismatch");
  double sum = 0;
  for (double v : o) {
    if (v < -1e-9) throw ConfigError("bayes_update: negative probability mass");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("bayes_update: observation not normalized");
  for (size_t i = 0; i < o.size(); ++i) post.counts[i] += o[i];
}

/* Per-step confidence share: sum over t >= 1 equals delta (Basel series). */
inline double per_step_confidence(long t, double delta) {
  if (t < 1) throw ConfigError("confidence schedule starts at t = 1");
  if (delta <= 0 || delta >= 1) throw ConfigError("delta must lie in (0, 1)");
  const double pi = 3.14159265358979323846;
  return 6.0 * delta / (pi * pi * static_cast<double>(t) * static_cast<double>(t));
}

/* Ball radius around the posterior mean after t observations:
 * d_t = sqrt(2 |S| ln(2 / delta_t) / t). Decreasing in t for any delta < 1. */
inline double ambiguity_radius(long t, size_t n_scen, double delta) {
  if (n_scen == 0) throw ConfigError("ambiguity_radius: no scenarios");
  double dt = per_step_confidence(t, delta);
  return std::sqrt(2.0 * static_cast<double>(n_scen) * std::log(2.0 / dt) /
                   static_cast<double>(t));
}

}  // namespace gridhard
