#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stagewise {

using Vec = std::vector<double>;

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
};

/// Axis-aligned box: one interval per coordinate.
using Box = std::vector<Interval>;

/// Sparse vector as (index, value) terms, indices strictly increasing.
using SparseVec = std::vector<std::pair<int, double>>;

namespace detail {

inline double dot(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_norm(const Vec& a) { return dot(a, a); }

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }
inline double negative_part(double x) { return x < 0.0 ? -x : 0.0; }

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

/// Decision point of the reformulated problem: s in S, theta in [0,1]^n.
struct Iterate {
  Vec s;
  Vec theta;
};

/// Result of the forward substitution pass: z plus the stage function
/// values it was built from, so z[i] = (1-theta[i])*mu[i] + theta[i]*eta[i].
struct ForwardTrace {
  Vec z;
  Vec mu;
  Vec eta;
};

/// Gradients of the substituted objective at an iterate.
/// multipliers[i] is the sensitivity of the objective to z[i]; it doubles
/// as the Lagrange multiplier of stage i when certifying bounds.
struct GradientBundle {
  Vec grad_s;
  Vec grad_theta;
  Vec multipliers;
};

/// Primal value with a certified lower bound on the convex optimum.
struct DualityCertificate {
  double primal = 0.0;
  double gap = 0.0;
  double dual = 0.0;
  double relative_gap = 0.0;
};

inline DualityCertificate make_certificate(double primal, double gap) {
  DualityCertificate cert;
  cert.primal = primal;
  cert.gap = gap;
  cert.dual = primal - gap;
  cert.relative_gap = gap / std::max(1.0, std::abs(primal));
  return cert;
}

}  // namespace stagewise
