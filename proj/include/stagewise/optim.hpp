#pragma once

#include <chrono>
#include <functional>
#include <limits>
#include <vector>

#include "stagewise/duality.hpp"
#include "stagewise/engine.hpp"
#include "stagewise/problem.hpp"

namespace stagewise {

struct SolveConfig {
  int max_iters = 50;
  double epsilon = 1e-6;           // absolute gap target
  double relative_epsilon = 1e-2;  // relative gap target
  double init_step = 100.0;
  double backtrack = 0.8;
  double growth = 1.5;
  double min_step = 1e-5;
  double q_init = 1.0;    // initial degeneracy-correction threshold scale
  double q_factor = 10.0; // escalation factor after a failed correction
  bool use_momentum = true;
  unsigned seed = 0;
};

inline void validate_config(const SolveConfig& config) {
  detail::require(config.max_iters >= 1, "config: max_iters must be >= 1");
  detail::require(config.epsilon >= 0.0 && config.relative_epsilon >= 0.0,
                  "config: gap targets must be nonnegative");
  detail::require(config.min_step > 0.0 && config.min_step <= config.init_step,
                  "config: need 0 < min_step <= init_step");
  detail::require(config.backtrack > 0.0 && config.backtrack < 1.0,
                  "config: backtrack must lie in (0,1)");
  detail::require(config.growth > 1.0, "config: growth must exceed 1");
  detail::require(config.q_init > 0.0 && config.q_factor > 1.0,
                  "config: need q_init > 0 and q_factor > 1");
}

enum class SolveStatus { kConverged, kIterationLimit };

struct TraceRow {
  int iter = 0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double step_size = 0.0;
  double wall_ms = 0.0;
  bool fixdeg_invoked = false;
};

struct SolveReport {
  Iterate best_iterate;
  DualityCertificate certificate;
  int iterations = 0;
  SolveStatus status = SolveStatus::kIterationLimit;
  std::vector<TraceRow> trace;
};

/// Streaming observer; invoked once per outer iteration.
using TraceCallback = std::function<void(const TraceRow&)>;

/// Projected gradient step with step size `step` (inverse smoothness
/// estimate). For box-shaped S the projection is the exact prox of the
/// quadratic model, so `delta` is the model's guaranteed decrease:
///   delta = -(grad . d + |d|^2 / (2 step)) >= 0 for the realized d.
inline std::pair<Iterate, double> pgd_step(const StagewiseProblem& problem,
                                           const Iterate& iterate,
                                           const GradientBundle& grads,
                                           double step) {
  detail::require(step > 0.0, "pgd_step: step must be positive");
  Iterate next;
  next.s.resize(iterate.s.size());
  for (std::size_t j = 0; j < iterate.s.size(); ++j)
    next.s[j] = iterate.s[j] - step * grads.grad_s[j];
  problem.project_s(next.s);
  next.theta.resize(iterate.theta.size());
  for (std::size_t i = 0; i < iterate.theta.size(); ++i)
    next.theta[i] =
        detail::clamp01(iterate.theta[i] - step * grads.grad_theta[i]);

  double linear = 0.0;
  double squared = 0.0;
  for (std::size_t j = 0; j < iterate.s.size(); ++j) {
    const double d = next.s[j] - iterate.s[j];
    linear += grads.grad_s[j] * d;
    squared += d * d;
  }
  for (std::size_t i = 0; i < iterate.theta.size(); ++i) {
    const double d = next.theta[i] - iterate.theta[i];
    linear += grads.grad_theta[i] * d;
    squared += d * d;
  }
  const double delta = -(linear + squared / (2.0 * step));
  return {std::move(next), std::max(delta, 0.0)};
}

/// How adversely stage i's multiplier sign interacts with its theta
/// placement: theta * max(y,0) + (1-theta) * max(-y,0). Zero exactly when
/// theta sits on the side its multiplier favors; this is also the weight
/// the complementarity term of the duality gap puts on eta - mu.
inline double adverse_weight(double theta, double y) {
  return theta * detail::positive_part(y) +
         (1.0 - theta) * detail::negative_part(y);
}

/// Stages whose boundaries are within `slack` of collapsing while the
/// multiplier pushes against the current theta. These are the stages that
/// can freeze a projected-gradient iterate at a spurious point.
inline std::vector<int> degenerate_stage_set(const StagewiseProblem& problem,
                                             const Iterate& iterate,
                                             const ForwardTrace& trace,
                                             const GradientBundle& grads,
                                             double slack) {
  detail::require(slack >= 0.0, "slack must be nonnegative");
  std::vector<int> out;
  for (int i = 0; i < problem.stage_count(); ++i) {
    if (trace.eta[i] - trace.mu[i] <= slack &&
        adverse_weight(iterate.theta[i], grads.multipliers[i]) > 0.0)
      out.push_back(i);
  }
  return out;
}

/// Stages whose adverse weight dominates their boundary gap at scale q;
/// the solver takes corrective action whenever this set is nonempty.
inline std::vector<int> correction_set(const StagewiseProblem& problem,
                                       const Iterate& iterate,
                                       const ForwardTrace& trace,
                                       const GradientBundle& grads, double q) {
  detail::require(q > 0.0, "q must be positive");
  std::vector<int> out;
  for (int i = 0; i < problem.stage_count(); ++i) {
    if (adverse_weight(iterate.theta[i], grads.multipliers[i]) >
        2.0 * q * (trace.eta[i] - trace.mu[i]))
      out.push_back(i);
  }
  return out;
}

/// Rewrites theta at exactly-degenerate stages so no stage keeps an adverse
/// multiplier. Works backwards: by the time stage i is inspected its
/// multiplier is already the one induced by the downstream rewrites, and
/// since flipped stages have eta == mu the trace z never changes. After the
/// sweep, Forward(s, theta_hat) == Forward(s, theta) componentwise and the
/// zero-slack degenerate set is empty.
inline Iterate escape_exact_local_min(const StagewiseProblem& problem,
                                      const Iterate& iterate,
                                      const ForwardTrace& trace) {
  detail::check_shapes(problem, iterate);
  detail::check_trace(problem, trace);
  const int n = problem.stage_count();

  Iterate out = iterate;
  Vec grad_s_scratch, acc;
  problem.objective_gradient(iterate.s, trace.z, grad_s_scratch, acc);

  StageGradients grads;
  for (int i = n - 1; i >= 0; --i) {
    const double g = acc[i];
    if (trace.eta[i] - trace.mu[i] <= 0.0 &&
        adverse_weight(iterate.theta[i], g) > 0.0) {
      // adverse_weight > 0 rules out g == 0 here
      out.theta[i] = g > 0.0 ? 0.0 : 1.0;
    }
    if (g == 0.0) continue;
    const double t = out.theta[i];
    problem.stage_gradients(i, iterate.s, trace.z, grads);
    for (const auto& [j, w] : grads.mu_z) acc[j] += g * (1.0 - t) * w;
    for (const auto& [j, w] : grads.eta_z) acc[j] += g * t * w;
  }
  return out;
}

struct CorrectionOutcome {
  Iterate candidate;
  bool success = false;
  double promised_decrease = 0.0;  // v: certified lower bound on the drop
};

/// Degeneracy correction for stages with a nonzero boundary gap. One reverse
/// sweep estimates each stage's multiplier under the rewritten downstream
/// theta (all stage functions still evaluated at the original trace), flips
/// theta where the adverse weight dominates both the boundary gap and the
/// drift `omega` the earlier flips introduced, and accumulates the promised
/// decrease v. Two guards then decide the verdict against a fresh forward
/// pass: the objective must drop by at least v, and the sweep's multiplier
/// estimates must stay within q * omega_0 of the true multipliers at the
/// rewritten point. A failed first guard returns the original iterate.
inline CorrectionOutcome fix_degenerate_stages(const StagewiseProblem& problem,
                                               const Iterate& iterate,
                                               const ForwardTrace& trace,
                                               double q) {
  detail::require(q > 0.0, "fix_degenerate_stages: q must be positive");
  detail::check_shapes(problem, iterate);
  detail::check_trace(problem, trace);
  const int n = problem.stage_count();

  Iterate candidate = iterate;
  Vec grad_s_scratch, acc;
  problem.objective_gradient(iterate.s, trace.z, grad_s_scratch, acc);
  Vec estimate(n, 0.0);

  double promised = 0.0;
  double drift = 0.0;  // sum over rewritten stages of |dtheta| * (eta - mu)
  StageGradients grads;
  for (int i = n - 1; i >= 0; --i) {
    const double g = acc[i];
    estimate[i] = g;
    const double gap_i = trace.eta[i] - trace.mu[i];
    const double p = adverse_weight(iterate.theta[i], g);
    if (p > 2.0 * q * (drift + gap_i)) {
      candidate.theta[i] = g > 0.0 ? 0.0 : 1.0;
      promised += 0.5 * p * gap_i;
      drift += std::abs(iterate.theta[i] - candidate.theta[i]) * gap_i;
    }
    if (g == 0.0) continue;
    const double t = candidate.theta[i];
    problem.stage_gradients(i, iterate.s, trace.z, grads);
    for (const auto& [j, w] : grads.mu_z) acc[j] += g * (1.0 - t) * w;
    for (const auto& [j, w] : grads.eta_z) acc[j] += g * t * w;
  }

  const double value = problem.objective(iterate.s, trace.z);
  const Evaluation rewritten = evaluate(problem, candidate);
  if (rewritten.value > value - promised)
    return {iterate, false, promised};

  const GradientBundle actual = backward(problem, candidate, rewritten.trace);
  for (int i = 0; i < n; ++i) {
    if (std::abs(estimate[i] - actual.multipliers[i]) > q * drift)
      return {candidate, false, promised};
  }
  return {candidate, true, promised};
}

/// Momentum and line-search state carried between descent steps.
struct FistaState {
  double step = 0.0;
  double momentum = 1.0;  // scalar t of the accelerated sequence
  Iterate prev;

  static FistaState init(const Iterate& start, const SolveConfig& config) {
    return {config.init_step, 1.0, start};
  }
  void reset_momentum(const Iterate& at) {
    momentum = 1.0;
    prev = at;
  }
};

struct StepOutcome {
  Iterate next;
  double delta = 0.0;          // guaranteed decrease of the PGD candidate
  double accepted_step = 0.0;
  bool backtracked = false;
  bool safeguarded = false;    // accelerated candidate rejected
};

/// One descent step: backtracking line search on the plain projected
/// gradient candidate until the quadratic model majorizes the objective
/// there, then an accelerated (extrapolated) candidate at the accepted step.
/// The accelerated candidate is taken only if its objective does not exceed
/// the PGD candidate's; otherwise momentum restarts. Guarantees
///   value(next) <= value(x) - delta,
/// i.e. at least the progress plain PGD would make. The step size grows by
/// `growth` after a clean acceptance and never drops below `min_step`; if
/// the model never majorizes at `min_step` the candidate is accepted anyway
/// and the outer loop relies on certificates or the iteration limit.
inline StepOutcome fista_step(const StagewiseProblem& problem,
                              const Iterate& x, double value_x,
                              const GradientBundle& grads_x, FistaState& state,
                              const SolveConfig& config) {
  StepOutcome out;
  double step = state.step;

  Iterate pgd_candidate;
  double pgd_value = 0.0;
  while (true) {
    auto [candidate, delta] = pgd_step(problem, x, grads_x, step);
    pgd_value = evaluate(problem, candidate).value;
    pgd_candidate = std::move(candidate);
    out.delta = delta;
    if (pgd_value <= value_x - delta) break;
    if (step <= config.min_step) break;  // accept; progress not guaranteed
    step = std::max(step * config.backtrack, config.min_step);
    out.backtracked = true;
  }
  out.accepted_step = step;
  state.step = out.backtracked ? step : step * config.growth;

  if (!config.use_momentum) {
    state.prev = x;
    out.next = std::move(pgd_candidate);
    return out;
  }

  const double t = state.momentum;
  const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
  const double beta = (t - 1.0) / t_next;

  Iterate probe;
  probe.s.resize(x.s.size());
  for (std::size_t j = 0; j < x.s.size(); ++j)
    probe.s[j] = x.s[j] + beta * (x.s[j] - state.prev.s[j]);
  problem.project_s(probe.s);
  probe.theta.resize(x.theta.size());
  for (std::size_t i = 0; i < x.theta.size(); ++i)
    probe.theta[i] =
        detail::clamp01(x.theta[i] + beta * (x.theta[i] - state.prev.theta[i]));

  const GradientBundle grads_probe =
      backward(problem, probe, forward(problem, probe));
  auto [accel, accel_delta] = pgd_step(problem, probe, grads_probe, step);
  (void)accel_delta;
  const double accel_value = evaluate(problem, accel).value;

  state.prev = x;
  if (accel_value <= pgd_value) {
    state.momentum = t_next;
    out.next = std::move(accel);
  } else {
    state.momentum = 1.0;  // landscape shifted; restart
    out.safeguarded = true;
    out.next = std::move(pgd_candidate);
  }
  return out;
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

template <bool WithCorrection>
SolveReport solve_loop(const StagewiseProblem& problem, const Iterate& start,
                       const SolveConfig& config,
                       const TraceCallback& callback) {
  validate_config(config);
  check_shapes(problem, start);
  for (double t : start.theta)
    require(t >= 0.0 && t <= 1.0, "start theta must lie in [0,1]");

  const auto t0 = std::chrono::steady_clock::now();
  Iterate x = start;
  problem.project_s(x.s);
  FistaState state = FistaState::init(x, config);
  double q = config.q_init;

  SolveReport report;
  report.best_iterate = x;
  double best_primal = std::numeric_limits<double>::infinity();
  double best_dual = -std::numeric_limits<double>::infinity();

  for (int iter = 1;; ++iter) {
    Evaluation ev = evaluate(problem, x);
    GradientBundle grads = backward(problem, x, ev.trace);

    bool corrected = false;
    if constexpr (WithCorrection) {
      if (!correction_set(problem, x, ev.trace, grads, q).empty()) {
        corrected = true;
        CorrectionOutcome fix =
            fix_degenerate_stages(problem, x, ev.trace, q);
        if (!fix.success) q *= config.q_factor;
        if (fix.candidate.theta != x.theta) {
          x = fix.candidate;
          ev = evaluate(problem, x);
          grads = backward(problem, x, ev.trace);
          state.reset_momentum(x);
        }
      }
    }

    const DualityCertificate cert = duality_gap(problem, x, ev.trace, grads);
    if (cert.primal < best_primal) {
      best_primal = cert.primal;
      report.best_iterate = x;
    }
    best_dual = std::max(best_dual, cert.dual);

    TraceRow row{iter,      cert.primal,      cert.dual, cert.gap,
                 state.step, elapsed_ms(t0),  corrected};
    report.trace.push_back(row);
    if (callback) callback(row);
    report.iterations = iter;

    if (cert.gap <= config.epsilon ||
        cert.relative_gap <= config.relative_epsilon) {
      report.status = SolveStatus::kConverged;
      break;
    }
    if (iter >= config.max_iters) {
      report.status = SolveStatus::kIterationLimit;
      break;
    }

    StepOutcome step = fista_step(problem, x, ev.value, grads, state, config);
    if (step.safeguarded) state.reset_momentum(step.next);
    x = std::move(step.next);
  }

  report.certificate = make_certificate(best_primal, best_primal - best_dual);
  return report;
}

}  // namespace detail

/// Certificate-driven descent: terminate as soon as the duality gap meets
/// either target, otherwise take a step at least as good as plain PGD.
/// Expects a nondegenerate landscape; see solve_safe otherwise.
inline SolveReport solve_simple(const StagewiseProblem& problem,
                                const Iterate& start,
                                const SolveConfig& config = {},
                                const TraceCallback& callback = {}) {
  return detail::solve_loop<false>(problem, start, config, callback);
}

/// solve_simple plus degeneracy correction: whenever the correction set is
/// nonempty the theta rewrite runs first (escalating q after a failed
/// attempt), the certificate is computed at the rewritten point, and the
/// descent step starts there. Converges to the global optimum without
/// nondegeneracy assumptions.
inline SolveReport solve_safe(const StagewiseProblem& problem,
                              const Iterate& start,
                              const SolveConfig& config = {},
                              const TraceCallback& callback = {}) {
  return detail::solve_loop<true>(problem, start, config, callback);
}

}  // namespace stagewise
