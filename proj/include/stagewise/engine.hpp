#pragma once

#include <string>

#include "stagewise/problem.hpp"
#include "stagewise/types.hpp"

namespace stagewise {

namespace detail {

inline void check_shapes(const StagewiseProblem& problem, const Iterate& it) {
  require(static_cast<int>(it.s.size()) == problem.s_dim(),
          "iterate s dimension mismatch");
  require(static_cast<int>(it.theta.size()) == problem.stage_count(),
          "iterate theta dimension mismatch");
}

inline void check_trace(const StagewiseProblem& problem,
                        const ForwardTrace& trace) {
  const std::size_t n = static_cast<std::size_t>(problem.stage_count());
  require(trace.z.size() == n && trace.mu.size() == n && trace.eta.size() == n,
          "trace dimension mismatch");
}

}  // namespace detail

/// Forward substitution: stage by stage, z_i is the convex combination of
/// the stage boundaries at the prefix built so far,
///   z_i = (1 - theta_i) * mu_i(s, z_{1:i-1}) + theta_i * eta_i(s, z_{1:i-1}).
inline ForwardTrace forward(const StagewiseProblem& problem,
                            const Iterate& iterate) {
  detail::check_shapes(problem, iterate);
  const int n = problem.stage_count();
  ForwardTrace trace;
  trace.z.resize(n);
  trace.mu.resize(n);
  trace.eta.resize(n);
  for (int i = 0; i < n; ++i) {
    const StageValue v = problem.stage_values(i, iterate.s, trace.z);
    if (!std::isfinite(v.mu) || !std::isfinite(v.eta))
      detail::fail("forward: non-finite stage value at stage " +
                   std::to_string(i));
    const double t = iterate.theta[i];
    trace.mu[i] = v.mu;
    trace.eta[i] = v.eta;
    trace.z[i] = (1.0 - t) * v.mu + t * v.eta;
  }
  return trace;
}

/// Forward pass plus objective value.
struct Evaluation {
  ForwardTrace trace;
  double value = 0.0;
};

inline Evaluation evaluate(const StagewiseProblem& problem,
                           const Iterate& iterate) {
  Evaluation ev;
  ev.trace = forward(problem, iterate);
  ev.value = problem.objective(iterate.s, ev.trace.z);
  if (!std::isfinite(ev.value)) detail::fail("objective is non-finite");
  return ev;
}

/// Reverse sweep. Starting from the objective gradient, stage i's multiplier
/// is the accumulated sensitivity to z_i; folding it through the stage
/// boundaries weighted by theta_i propagates sensitivities to s and to
/// earlier z coordinates. The theta gradient falls out as
///   d/dtheta_i = multiplier_i * (eta_i - mu_i).
/// Stages are folded in descending order, mu terms before eta terms, so runs
/// are bit-reproducible.
inline GradientBundle backward(const StagewiseProblem& problem,
                               const Iterate& iterate,
                               const ForwardTrace& trace) {
  detail::check_shapes(problem, iterate);
  detail::check_trace(problem, trace);
  const int n = problem.stage_count();

  GradientBundle out;
  problem.objective_gradient(iterate.s, trace.z, out.grad_s, out.multipliers);
  detail::require(static_cast<int>(out.grad_s.size()) == problem.s_dim() &&
                      static_cast<int>(out.multipliers.size()) == n,
                  "objective gradient dimension mismatch");
  out.grad_theta.resize(n);

  StageGradients grads;
  for (int i = n - 1; i >= 0; --i) {
    const double y = out.multipliers[i];
    const double t = iterate.theta[i];
    out.grad_theta[i] = y * (trace.eta[i] - trace.mu[i]);
    if (y == 0.0) continue;  // nothing to propagate
    problem.stage_gradients(i, iterate.s, trace.z, grads);
    for (const auto& [j, g] : grads.mu_z) out.multipliers[j] += y * (1.0 - t) * g;
    for (const auto& [j, g] : grads.eta_z) out.multipliers[j] += y * t * g;
    for (const auto& [j, g] : grads.mu_s) out.grad_s[j] += y * (1.0 - t) * g;
    for (const auto& [j, g] : grads.eta_s) out.grad_s[j] += y * t * g;
  }
  return out;
}

/// Stage multipliers recomputed as if theta were `theta_hat` downstream,
/// with every stage function still evaluated at the original trace:
///   g_i = df/dz_i + sum_{j>i} g_j * (theta_hat_j * deta_j/dz_i
///                                    + (1 - theta_hat_j) * dmu_j/dz_i).
/// With theta_hat equal to the iterate's theta this reproduces backward's
/// multipliers exactly. One reverse sweep, same cost as backward.
inline Vec multipliers_with_override(const StagewiseProblem& problem,
                                     const Iterate& iterate,
                                     const ForwardTrace& trace,
                                     const Vec& theta_hat) {
  detail::check_shapes(problem, iterate);
  detail::check_trace(problem, trace);
  const int n = problem.stage_count();
  detail::require(static_cast<int>(theta_hat.size()) == n,
                  "theta_hat dimension mismatch");

  Vec grad_s;
  Vec acc;
  problem.objective_gradient(iterate.s, trace.z, grad_s, acc);

  StageGradients grads;
  for (int i = n - 1; i >= 0; --i) {
    const double y = acc[i];
    if (y == 0.0) continue;
    const double t = theta_hat[i];
    problem.stage_gradients(i, iterate.s, trace.z, grads);
    for (const auto& [j, g] : grads.mu_z) acc[j] += y * (1.0 - t) * g;
    for (const auto& [j, g] : grads.eta_z) acc[j] += y * t * g;
  }
  return acc;
}

}  // namespace stagewise
