#pragma once

#include "stagewise/problem.hpp"

namespace stagewise {

/// One-stage instance with a degenerate boundary: S = [-1,1], f = z_1,
/// lower boundary s^2 - 1, upper boundary 1 - s^2. The two boundaries meet
/// at s = +-1, which is exactly where spurious local minimizers can appear;
/// the global optimum is f = -1 at s = 0 with theta = 0.
class ParabolaProblem final : public StagewiseProblem {
 public:
  ParabolaProblem()
      : domain_({{-1.0, 1.0}}), z_bounds_({{-1.0, 1.0}}) {}

  int s_dim() const override { return 1; }
  int stage_count() const override { return 1; }

  double objective(const Vec&, const Vec& z) const override { return z[0]; }
  void objective_gradient(const Vec&, const Vec&, Vec& grad_s,
                          Vec& grad_z) const override {
    grad_s.assign(1, 0.0);
    grad_z.assign(1, 1.0);
  }

  StageValue stage_values(int, const Vec& s, const Vec&) const override {
    const double sq = s[0] * s[0];
    return {sq - 1.0, 1.0 - sq};
  }
  void stage_gradients(int, const Vec& s, const Vec&,
                       StageGradients& out) const override {
    out.clear();
    out.mu_s.emplace_back(0, 2.0 * s[0]);
    out.eta_s.emplace_back(0, -2.0 * s[0]);
  }

  void project_s(Vec& s) const override { domain_.project(s); }
  Vec argmin_linear_s(const Vec& cost) const override {
    return domain_.argmin_linear(cost);
  }
  const Box& z_bounds() const override { return z_bounds_; }

 private:
  BoxSet domain_;
  Box z_bounds_;
};

/// Chain of length `length` (>= 2): the first coordinate s lives in [0,1]
/// and each later coordinate is wedged between -1 and its predecessor,
/// minimizing the negated last coordinate. The optimum pushes every
/// coordinate to 1. Plain first-order methods on the original constrained
/// form need about `length` iterations to move the last coordinate; the
/// substituted form solves it in a single projected gradient step.
class ChainProblem final : public StagewiseProblem {
 public:
  explicit ChainProblem(int length)
      : stages_(length - 1), domain_({{0.0, 1.0}}) {
    detail::require(length >= 2, "ChainProblem: length must be >= 2");
    z_bounds_.assign(stages_, {-1.0, 1.0});
  }

  int s_dim() const override { return 1; }
  int stage_count() const override { return stages_; }

  double objective(const Vec&, const Vec& z) const override {
    return -z[stages_ - 1];
  }
  void objective_gradient(const Vec&, const Vec&, Vec& grad_s,
                          Vec& grad_z) const override {
    grad_s.assign(1, 0.0);
    grad_z.assign(stages_, 0.0);
    grad_z[stages_ - 1] = -1.0;
  }

  StageValue stage_values(int i, const Vec& s, const Vec& z) const override {
    return {-1.0, i == 0 ? s[0] : z[i - 1]};
  }
  void stage_gradients(int i, const Vec&, const Vec&,
                       StageGradients& out) const override {
    out.clear();
    if (i == 0)
      out.eta_s.emplace_back(0, 1.0);
    else
      out.eta_z.emplace_back(i - 1, 1.0);
  }

  void project_s(Vec& s) const override { domain_.project(s); }
  Vec argmin_linear_s(const Vec& cost) const override {
    return domain_.argmin_linear(cost);
  }
  const Box& z_bounds() const override { return z_bounds_; }

 private:
  int stages_;
  BoxSet domain_;
  Box z_bounds_;
};

}  // namespace stagewise
