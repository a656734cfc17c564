#pragma once

#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stagewise/types.hpp"

namespace stagewise {

/// Values of the two stage functions at a point: mu is the convex lower
/// boundary, eta the concave upper boundary of the stage constraint.
struct StageValue {
  double mu = 0.0;
  double eta = 0.0;
};

/// Gradients of one stage's boundary functions. The z-parts may only
/// reference coordinates 0..i-1; sparse so layered instances can restrict
/// each stage to its actual inputs.
struct StageGradients {
  SparseVec mu_s;
  SparseVec mu_z;
  SparseVec eta_s;
  SparseVec eta_z;

  void clear() {
    mu_s.clear();
    mu_z.clear();
    eta_s.clear();
    eta_z.clear();
  }
};

/// A stagewise convex problem:
///
///   minimize f(s, z) over s in S, z in R^n
///   subject to mu_i(s, z_{1:i-1}) <= z_i <= eta_i(s, z_{1:i-1})
///
/// with f and every mu_i convex, every eta_i concave, and S convex.
/// Implementations supply analytic gradients; nothing here differentiates
/// user code. Instances are immutable after construction and safe to share
/// across concurrent solves.
class StagewiseProblem {
 public:
  virtual ~StagewiseProblem() = default;

  /// Dimension of s.
  virtual int s_dim() const = 0;
  /// Number of stages (dimension of z and theta).
  virtual int stage_count() const = 0;

  virtual double objective(const Vec& s, const Vec& z) const = 0;
  virtual void objective_gradient(const Vec& s, const Vec& z, Vec& grad_s,
                                  Vec& grad_z) const = 0;

  /// Stage i's boundary values at (s, z_{1:i-1}). Only z[0..i-1] may be read.
  virtual StageValue stage_values(int i, const Vec& s, const Vec& z) const = 0;
  /// Same point, boundary gradients. `out` is cleared and refilled.
  virtual void stage_gradients(int i, const Vec& s, const Vec& z,
                               StageGradients& out) const = 0;

  /// Euclidean projection onto S, in place.
  virtual void project_s(Vec& s) const = 0;
  /// argmin over S of cost . s, exact. Used by duality certificates.
  virtual Vec argmin_linear_s(const Vec& cost) const = 0;

  /// Box known to contain z for every feasible solution.
  virtual const Box& z_bounds() const = 0;
};

/// Axis-aligned box domain for S; covers every shipped instance.
/// General convex S only needs a projector plus a linear minimizer, so the
/// interface above stays open to user extensions.
class BoxSet {
 public:
  BoxSet() = default;
  explicit BoxSet(Box bounds) : bounds_(std::move(bounds)) {
    for (const Interval& iv : bounds_)
      detail::require(iv.lo <= iv.hi, "BoxSet: empty interval");
  }

  int dim() const { return static_cast<int>(bounds_.size()); }
  const Box& bounds() const { return bounds_; }

  void project(Vec& x) const {
    for (std::size_t j = 0; j < bounds_.size(); ++j)
      x[j] = std::clamp(x[j], bounds_[j].lo, bounds_[j].hi);
  }

  Vec argmin_linear(const Vec& cost) const {
    Vec out(bounds_.size());
    for (std::size_t j = 0; j < bounds_.size(); ++j)
      out[j] = cost[j] > 0.0 ? bounds_[j].lo : bounds_[j].hi;
    return out;
  }

  Vec center() const {
    Vec out(bounds_.size());
    for (std::size_t j = 0; j < bounds_.size(); ++j) out[j] = bounds_[j].mid();
    return out;
  }

  double diameter() const {
    double acc = 0.0;
    for (const Interval& iv : bounds_) acc += iv.width() * iv.width();
    return std::sqrt(acc);
  }

 private:
  Box bounds_;
};

/// Bounding box of S recovered through the linear minimizer: coordinate j
/// spans [argmin e_j, argmin -e_j].
inline Box s_bounding_box(const StagewiseProblem& problem) {
  const int m = problem.s_dim();
  Box box(m);
  Vec cost(m, 0.0);
  for (int j = 0; j < m; ++j) {
    cost[j] = 1.0;
    box[j].lo = problem.argmin_linear_s(cost)[j];
    cost[j] = -1.0;
    box[j].hi = problem.argmin_linear_s(cost)[j];
    cost[j] = 0.0;
  }
  return box;
}

/// Default starting point: s at the center of S's bounding box (projected),
/// theta = 0.5 everywhere.
inline Iterate default_start(const StagewiseProblem& problem) {
  Iterate start;
  Box box = s_bounding_box(problem);
  start.s.resize(problem.s_dim());
  for (int j = 0; j < problem.s_dim(); ++j) start.s[j] = box[j].mid();
  problem.project_s(start.s);
  start.theta.assign(problem.stage_count(), 0.5);
  return start;
}

/// One empirically detected contract violation of an instance.
struct InstanceViolation {
  enum class Kind { kStageOrder, kOutOfBounds, kNonFinite };

  Kind kind = Kind::kStageOrder;
  int stage = -1;
  double amount = 0.0;
  Iterate witness;

  std::string describe() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::kStageOrder:
        os << "stage " << stage << ": eta - mu = " << amount;
        break;
      case Kind::kOutOfBounds:
        os << "stage " << stage << ": z outside bounds by " << amount;
        break;
      case Kind::kNonFinite:
        os << "stage " << stage << ": non-finite evaluator output";
        break;
    }
    return os.str();
  }
};

struct ValidationReport {
  std::vector<InstanceViolation> violations;
  int samples = 0;
  bool ok() const { return violations.empty(); }
};

}  // namespace stagewise
