#pragma once

#include <random>

#include "stagewise/engine.hpp"
#include "stagewise/problem.hpp"

namespace stagewise {

/// Samples random iterates and checks the instance's empirical contracts:
/// every stage must keep eta - mu >= -tol along forward traces, and every z
/// must land inside the declared bounds. s is drawn uniformly from the
/// bounding box of S and projected; theta uniformly from [0,1]^n.
inline ValidationReport validate_instance(const StagewiseProblem& problem,
                                          int samples, unsigned seed,
                                          double tol) {
  detail::require(samples >= 1, "validate_instance: samples must be >= 1");
  const int m = problem.s_dim();
  const int n = problem.stage_count();
  const Box s_box = s_bounding_box(problem);
  const Box& z_box = problem.z_bounds();
  detail::require(static_cast<int>(z_box.size()) == n,
                  "validate_instance: z_bounds size mismatch");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ValidationReport report;
  report.samples = samples;
  for (int k = 0; k < samples; ++k) {
    Iterate it;
    it.s.resize(m);
    for (int j = 0; j < m; ++j)
      it.s[j] = s_box[j].lo + unit(rng) * s_box[j].width();
    problem.project_s(it.s);
    it.theta.resize(n);
    for (int i = 0; i < n; ++i) it.theta[i] = unit(rng);

    ForwardTrace trace;
    trace.z.resize(n);
    trace.mu.resize(n);
    trace.eta.resize(n);
    for (int i = 0; i < n; ++i) {
      const StageValue v = problem.stage_values(i, it.s, trace.z);
      if (!std::isfinite(v.mu) || !std::isfinite(v.eta)) {
        report.violations.push_back(
            {InstanceViolation::Kind::kNonFinite, i, 0.0, it});
        break;
      }
      trace.mu[i] = v.mu;
      trace.eta[i] = v.eta;
      trace.z[i] = (1.0 - it.theta[i]) * v.mu + it.theta[i] * v.eta;
      if (v.eta - v.mu < -tol)
        report.violations.push_back(
            {InstanceViolation::Kind::kStageOrder, i, v.eta - v.mu, it});
      const double below = z_box[i].lo - trace.z[i];
      const double above = trace.z[i] - z_box[i].hi;
      if (below > tol || above > tol)
        report.violations.push_back({InstanceViolation::Kind::kOutOfBounds, i,
                                     std::max(below, above), it});
    }
  }
  return report;
}

}  // namespace stagewise
