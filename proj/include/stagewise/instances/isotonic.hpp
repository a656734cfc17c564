#pragma once

#include <utility>
#include <vector>

#include "stagewise/problem.hpp"

namespace stagewise {

/// Generalized isotonic regression input: fit z to data y under precedence
/// constraints z_j <= z_i for each pair (j, i) in `order`, with every z_i in
/// [lo, hi]. Pairs must be index-increasing (j < i), which any DAG order can
/// be renumbered to satisfy. `temperature` controls the smoothing of the
/// max in the lower stage boundary.
struct IsotonicSpec {
  Vec y;
  std::vector<std::pair<int, int>> order;  // (j, i) meaning z_j <= z_i
  double lo = 0.0;
  double hi = 1.0;
  double temperature = 1e-2;
};

/// Stagewise encoding of isotonic regression. Stage i's lower boundary is a
/// smoothed max over {lo} and the predecessors of i,
///   mu_i = T * log(sum exp(v / T)),
/// which is convex, smooth, and within T * log(count) above the true max;
/// the upper boundary is the constant hi. There is no genuine s, so S is a
/// frozen one-point box. The objective is the squared residual sum.
class IsotonicProblem final : public StagewiseProblem {
 public:
  explicit IsotonicProblem(IsotonicSpec spec) : spec_(std::move(spec)) {
    const int n = static_cast<int>(spec_.y.size());
    detail::require(n >= 1, "IsotonicProblem: empty data");
    detail::require(spec_.lo <= spec_.hi, "IsotonicProblem: lo > hi");
    detail::require(spec_.temperature > 0.0,
                    "IsotonicProblem: temperature must be positive");
    predecessors_.resize(n);
    for (const auto& [j, i] : spec_.order) {
      detail::require(0 <= j && j < i && i < n,
                      "IsotonicProblem: order pairs must satisfy 0 <= j < i "
                      "(cycles are impossible in an index-increasing order)");
      predecessors_[i].push_back(j);
    }
    for (auto& preds : predecessors_) {
      std::sort(preds.begin(), preds.end());
      preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
    }
    // worst case count in the smoothed max is n predecessors plus lo
    const double slack =
        spec_.temperature * std::log(static_cast<double>(n) + 1.0);
    z_bounds_.assign(n, {spec_.lo, spec_.hi + slack});
    domain_ = BoxSet({{0.0, 0.0}});
  }

  const IsotonicSpec& spec() const { return spec_; }

  int s_dim() const override { return 1; }
  int stage_count() const override { return static_cast<int>(spec_.y.size()); }

  double objective(const Vec&, const Vec& z) const override {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double r = z[i] - spec_.y[i];
      acc += r * r;
    }
    return acc;
  }
  void objective_gradient(const Vec&, const Vec& z, Vec& grad_s,
                          Vec& grad_z) const override {
    grad_s.assign(1, 0.0);
    grad_z.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      grad_z[i] = 2.0 * (z[i] - spec_.y[i]);
  }

  StageValue stage_values(int i, const Vec&, const Vec& z) const override {
    return {smoothed_max(i, z, nullptr), spec_.hi};
  }
  void stage_gradients(int i, const Vec&, const Vec& z,
                       StageGradients& out) const override {
    out.clear();
    smoothed_max(i, z, &out.mu_z);
  }

  void project_s(Vec& s) const override { domain_.project(s); }
  Vec argmin_linear_s(const Vec& cost) const override {
    return domain_.argmin_linear(cost);
  }
  const Box& z_bounds() const override { return z_bounds_; }

 private:
  // log-sum-exp over {lo} + predecessors, shifted for stability; weights
  // (softmax) become the gradient with respect to the predecessor entries
  double smoothed_max(int i, const Vec& z, SparseVec* grad) const {
    const double T = spec_.temperature;
    const std::vector<int>& preds = predecessors_[i];
    double peak = spec_.lo;
    for (int j : preds) peak = std::max(peak, z[j]);
    double total = std::exp((spec_.lo - peak) / T);
    for (int j : preds) total += std::exp((z[j] - peak) / T);
    if (grad) {
      for (int j : preds)
        grad->emplace_back(j, std::exp((z[j] - peak) / T) / total);
    }
    return peak + T * std::log(total);
  }

  IsotonicSpec spec_;
  std::vector<std::vector<int>> predecessors_;
  BoxSet domain_;
  Box z_bounds_;
};

}  // namespace stagewise
