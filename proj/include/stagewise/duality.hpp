#pragma once

#include "stagewise/engine.hpp"
#include "stagewise/problem.hpp"

namespace stagewise {

/// Gradients of the Lagrangian
///   L(s, z, y) = f + sum_i (y_i^+ mu_i - y_i^- eta_i - y_i z_i)
/// with y^+ = max(y, 0) and y^- = max(-y, 0), evaluated at (s, z).
/// Convex in (s, z) for any fixed y, which is what makes the linearized
/// lower bound below globally valid.
inline void lagrangian_gradients(const StagewiseProblem& problem,
                                 const Iterate& iterate,
                                 const ForwardTrace& trace,
                                 const Vec& multipliers, Vec& grad_s,
                                 Vec& grad_z) {
  detail::check_shapes(problem, iterate);
  detail::check_trace(problem, trace);
  const int n = problem.stage_count();
  detail::require(static_cast<int>(multipliers.size()) == n,
                  "multipliers dimension mismatch");
  for (double y : multipliers)
    detail::require(std::isfinite(y), "multipliers must be finite");

  problem.objective_gradient(iterate.s, trace.z, grad_s, grad_z);
  StageGradients grads;
  for (int i = n - 1; i >= 0; --i) {
    const double y = multipliers[i];
    grad_z[i] -= y;
    const double yp = detail::positive_part(y);
    const double ym = detail::negative_part(y);
    if (yp == 0.0 && ym == 0.0) continue;
    problem.stage_gradients(i, iterate.s, trace.z, grads);
    for (const auto& [j, g] : grads.mu_z) grad_z[j] += yp * g;
    for (const auto& [j, g] : grads.eta_z) grad_z[j] -= ym * g;
    for (const auto& [j, g] : grads.mu_s) grad_s[j] += yp * g;
    for (const auto& [j, g] : grads.eta_s) grad_s[j] -= ym * g;
  }
}

/// Computable duality gap at an iterate. With y taken from the reverse
/// sweep and z from the forward trace,
///
///   gap = sum_i (y_i z_i - y_i^+ mu_i + y_i^- eta_i)
///         + sup over (s', z') in S x Z of grad L . (s - s', z - z')
///
/// and primal - gap lower-bounds the convex optimum: the first term is
/// f - L, the sup dominates L minus its linearization's infimum over S x Z,
/// and L never exceeds f on feasible points. The sup splits exactly: a
/// linear minimization over S plus a per-coordinate interval minimization
/// over the z bounds box.
inline DualityCertificate duality_gap(const StagewiseProblem& problem,
                                      const Iterate& iterate,
                                      const ForwardTrace& trace,
                                      const GradientBundle& grads) {
  const int n = problem.stage_count();
  const Box& z_box = problem.z_bounds();
  detail::require(static_cast<int>(z_box.size()) == n,
                  "duality_gap: z bounds are required for a certificate");

  const Vec& y = grads.multipliers;
  double complementarity = 0.0;
  for (int i = 0; i < n; ++i) {
    complementarity += y[i] * trace.z[i] -
                       detail::positive_part(y[i]) * trace.mu[i] +
                       detail::negative_part(y[i]) * trace.eta[i];
  }

  Vec grad_l_s, grad_l_z;
  lagrangian_gradients(problem, iterate, trace, y, grad_l_s, grad_l_z);

  const Vec s_support = problem.argmin_linear_s(grad_l_s);
  double sup_s = detail::dot(grad_l_s, iterate.s) - detail::dot(grad_l_s, s_support);

  double sup_z = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = grad_l_z[i];
    const double best = g >= 0.0 ? g * z_box[i].lo : g * z_box[i].hi;
    sup_z += g * trace.z[i] - best;
  }

  const double primal = problem.objective(iterate.s, trace.z);
  return make_certificate(primal, complementarity + sup_s + sup_z);
}

}  // namespace stagewise
