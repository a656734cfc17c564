#pragma once

// Shared test fixtures: a configurable stage-list problem, generators for
// random networks and random exactly-degenerate instances, and the crafted
// instance whose correction threshold must escalate before it succeeds.

#include <memory>
#include <random>
#include <vector>

#include "stagewise/instances/network.hpp"
#include "stagewise/problem.hpp"

namespace testing_support {

using stagewise::Activation;
using stagewise::Box;
using stagewise::BoxSet;
using stagewise::DenseLayer;
using stagewise::Interval;
using stagewise::Iterate;
using stagewise::NetworkSpec;
using stagewise::SparseVec;
using stagewise::StageGradients;
using stagewise::StageValue;
using stagewise::StagewiseProblem;
using stagewise::Vec;

/// Test problem assembled from a list of hand-specified stages with a
/// linear objective. Stage kinds:
///   kBand        mu = center - halfwidth, eta = center + halfwidth
///   kAffineEq    mu = eta = bias + s_coeffs . s + z_coeffs . z  (degenerate)
///   kSquareChord mu = scale * z_parent^2, eta = scale * reach^2; the
///                boundaries touch exactly when |z_parent| = reach
///   kReluHull    relu lower / chord upper of an affine pre-activation
struct TestStage {
  enum class Kind { kBand, kAffineEq, kSquareChord, kReluHull };
  Kind kind = Kind::kBand;

  double center = 0.0, halfwidth = 0.0;          // kBand
  double bias = 0.0;                             // kAffineEq, kReluHull
  SparseVec s_coeffs, z_coeffs;                  // kAffineEq, kReluHull
  double lo = 0.0, hi = 0.0;                     // kReluHull interval
  int parent = -1;                               // kSquareChord
  double reach = 0.0, scale = 1.0;               // kSquareChord
};

class StageListProblem final : public StagewiseProblem {
 public:
  StageListProblem(Box s_box, Vec objective_coeffs,
                   std::vector<TestStage> stages)
      : domain_(std::move(s_box)),
        coeffs_(std::move(objective_coeffs)),
        stages_(std::move(stages)) {
    z_bounds_.resize(stages_.size());
    for (std::size_t i = 0; i < stages_.size(); ++i)
      z_bounds_[i] = stage_interval(stages_[i]);
  }

  int s_dim() const override { return domain_.dim(); }
  int stage_count() const override { return static_cast<int>(stages_.size()); }

  double objective(const Vec&, const Vec& z) const override {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += coeffs_[i] * z[i];
    return acc;
  }
  void objective_gradient(const Vec&, const Vec&, Vec& grad_s,
                          Vec& grad_z) const override {
    grad_s.assign(domain_.dim(), 0.0);
    grad_z = coeffs_;
  }

  StageValue stage_values(int i, const Vec& s, const Vec& z) const override {
    const TestStage& st = stages_[i];
    switch (st.kind) {
      case TestStage::Kind::kBand:
        return {st.center - st.halfwidth, st.center + st.halfwidth};
      case TestStage::Kind::kAffineEq: {
        const double v = affine(st, s, z);
        return {v, v};
      }
      case TestStage::Kind::kSquareChord:
        return {st.scale * z[st.parent] * z[st.parent],
                st.scale * st.reach * st.reach};
      case TestStage::Kind::kReluHull: {
        const stagewise::HullPoint h =
            stagewise::relu_hull(affine(st, s, z), st.lo, st.hi);
        return {h.mu, h.eta};
      }
    }
    return {};
  }

  void stage_gradients(int i, const Vec& s, const Vec& z,
                       StageGradients& out) const override {
    out.clear();
    const TestStage& st = stages_[i];
    switch (st.kind) {
      case TestStage::Kind::kBand:
        break;
      case TestStage::Kind::kAffineEq:
        out.mu_s = out.eta_s = st.s_coeffs;
        out.mu_z = out.eta_z = st.z_coeffs;
        break;
      case TestStage::Kind::kSquareChord:
        out.mu_z.emplace_back(st.parent, 2.0 * st.scale * z[st.parent]);
        break;
      case TestStage::Kind::kReluHull: {
        const stagewise::HullPoint h =
            stagewise::relu_hull(affine(st, s, z), st.lo, st.hi);
        for (const auto& [j, c] : st.s_coeffs) {
          if (h.dmu_da != 0.0) out.mu_s.emplace_back(j, h.dmu_da * c);
          if (h.deta_da != 0.0) out.eta_s.emplace_back(j, h.deta_da * c);
        }
        for (const auto& [j, c] : st.z_coeffs) {
          if (h.dmu_da != 0.0) out.mu_z.emplace_back(j, h.dmu_da * c);
          if (h.deta_da != 0.0) out.eta_z.emplace_back(j, h.deta_da * c);
        }
        break;
      }
    }
  }

  void project_s(Vec& s) const override { domain_.project(s); }
  Vec argmin_linear_s(const Vec& cost) const override {
    return domain_.argmin_linear(cost);
  }
  const Box& z_bounds() const override { return z_bounds_; }

 private:
  static double affine(const TestStage& st, const Vec& s, const Vec& z) {
    double v = st.bias;
    for (const auto& [j, c] : st.s_coeffs) v += c * s[j];
    for (const auto& [j, c] : st.z_coeffs) v += c * z[j];
    return v;
  }

  Interval stage_interval(const TestStage& st) const {
    switch (st.kind) {
      case TestStage::Kind::kBand:
        return {st.center - st.halfwidth, st.center + st.halfwidth};
      case TestStage::Kind::kAffineEq: {
        Interval iv{st.bias, st.bias};
        for (const auto& [j, c] : st.s_coeffs) {
          const Interval& r = domain_.bounds()[j];
          iv.lo += c >= 0.0 ? c * r.lo : c * r.hi;
          iv.hi += c >= 0.0 ? c * r.hi : c * r.lo;
        }
        for (const auto& [j, c] : st.z_coeffs) {
          const Interval& r = z_bounds_[j];
          iv.lo += c >= 0.0 ? c * r.lo : c * r.hi;
          iv.hi += c >= 0.0 ? c * r.hi : c * r.lo;
        }
        return iv;
      }
      case TestStage::Kind::kSquareChord:
        return {0.0, st.scale * st.reach * st.reach};
      case TestStage::Kind::kReluHull:
        return {st.lo > 0.0 ? st.lo : 0.0, st.hi > 0.0 ? st.hi : 0.0};
    }
    return {};
  }

  BoxSet domain_;
  Vec coeffs_;
  std::vector<TestStage> stages_;
  Box z_bounds_;
};

/// Instance on which the degeneracy correction must escalate its threshold:
/// the iterate below is a projected-gradient fixed point, the correction
/// set stays nonempty, and the first sweeps promise more decrease than the
/// rewrite delivers. At q = 1 and q = 10 the sweep flips the band stage and
/// fails its progress guard; at q = 100 only the tangent stage flips, which
/// leaves z unchanged and succeeds.
struct StuckFixture {
  std::shared_ptr<StageListProblem> problem;
  Iterate start;
};

inline StuckFixture make_stuck_fixture() {
  std::vector<TestStage> stages(2);
  stages[0].kind = TestStage::Kind::kBand;
  stages[0].center = 0.0;
  stages[0].halfwidth = 0.25;
  stages[1].kind = TestStage::Kind::kSquareChord;
  stages[1].parent = 0;
  stages[1].reach = 0.25;
  stages[1].scale = 1.0;

  StuckFixture fx;
  fx.problem = std::make_shared<StageListProblem>(
      Box{{0.0, 0.0}}, Vec{1.0, 40.0}, std::move(stages));
  fx.start.s = {0.0};
  fx.start.theta = {0.0, 0.95};
  return fx;
}

/// Uniform iterate: s uniform over the bounding box of S (projected),
/// theta uniform over [0,1]^n.
inline Iterate random_iterate(const StagewiseProblem& problem,
                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box box = stagewise::s_bounding_box(problem);
  Iterate it;
  it.s.resize(problem.s_dim());
  for (int j = 0; j < problem.s_dim(); ++j)
    it.s[j] = box[j].lo + unit(rng) * box[j].width();
  problem.project_s(it.s);
  it.theta.resize(problem.stage_count());
  for (int i = 0; i < problem.stage_count(); ++i) it.theta[i] = unit(rng);
  return it;
}

/// Random dense network with the given hidden sizes; weights scaled by
/// fan-in so activations stay in a moderate range.
inline NetworkSpec random_network(std::mt19937_64& rng, int input_dim,
                                  const std::vector<int>& hidden, int classes,
                                  Activation activation) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  NetworkSpec net;
  net.input_dim = input_dim;
  int fan_in = input_dim;
  std::vector<int> sizes = hidden;
  sizes.push_back(classes);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    DenseLayer layer;
    const bool last = k + 1 == sizes.size();
    layer.activation = last ? Activation::kNone : activation;
    const double scale = 1.5 / std::sqrt(static_cast<double>(fan_in));
    layer.bias.resize(sizes[k]);
    layer.weights.resize(sizes[k]);
    for (int r = 0; r < sizes[k]; ++r) {
      layer.bias[r] = 0.2 * unit(rng);
      layer.weights[r].resize(fan_in);
      for (int j = 0; j < fan_in; ++j) layer.weights[r][j] = scale * unit(rng);
    }
    fan_in = sizes[k];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

/// Random instance with exactly-degenerate stages plus an iterate pinned so
/// the degeneracies are active: equal-affine stages are degenerate
/// everywhere, and each tangent stage's parent theta is forced to an
/// endpoint so the square touches its chord. Constants are dyadic, so
/// degeneracy tests see exact zeros.
struct DegenerateFixture {
  std::shared_ptr<StageListProblem> problem;
  Iterate iterate;
};

inline DegenerateFixture random_degenerate_fixture(std::mt19937_64& rng) {
  auto dyadic = [&rng](double lo, double hi, double grid) {
    std::uniform_int_distribution<int> pick(
        0, static_cast<int>(std::round((hi - lo) / grid)));
    return lo + grid * pick(rng);
  };
  std::uniform_int_distribution<int> coin(0, 1);

  const int n = 3 + static_cast<int>(rng() % 5);
  std::vector<TestStage> stages(n);
  std::vector<int> band_indices;
  Iterate it;
  it.s = {dyadic(-1.0, 1.0, 0.25)};
  it.theta.resize(n);
  for (int i = 0; i < n; ++i) it.theta[i] = dyadic(0.0, 1.0, 0.125);

  for (int i = 0; i < n; ++i) {
    TestStage& st = stages[i];
    const int kind = static_cast<int>(rng() % 3);
    if (kind == 0 || (kind == 2 && band_indices.empty())) {
      st.kind = TestStage::Kind::kBand;
      st.center = dyadic(-0.5, 0.5, 0.25);
      st.halfwidth = dyadic(0.25, 0.5, 0.25);
      band_indices.push_back(i);
    } else if (kind == 1) {
      st.kind = TestStage::Kind::kAffineEq;
      st.bias = dyadic(-0.5, 0.5, 0.25);
      st.s_coeffs.emplace_back(0, dyadic(-1.0, 1.0, 0.5));
      if (i > 0 && coin(rng))
        st.z_coeffs.emplace_back(static_cast<int>(rng() % i),
                                 dyadic(-1.0, 1.0, 0.5));
    } else {
      st.kind = TestStage::Kind::kSquareChord;
      st.parent = band_indices[rng() % band_indices.size()];
      const TestStage& parent = stages[st.parent];
      // reach = farthest |z_parent| over the band; force theta_parent to the
      // endpoint achieving it so the boundaries touch exactly
      const double at_lo = std::abs(parent.center - parent.halfwidth);
      const double at_hi = std::abs(parent.center + parent.halfwidth);
      st.reach = std::max(at_lo, at_hi);
      st.scale = dyadic(0.5, 1.0, 0.25);
      it.theta[st.parent] = at_hi >= at_lo ? 1.0 : 0.0;
    }
  }

  Vec coeffs(n);
  for (int i = 0; i < n; ++i) {
    coeffs[i] = dyadic(0.25, 2.0, 0.25) * (coin(rng) ? 1.0 : -1.0);
  }

  DegenerateFixture fx;
  fx.problem = std::make_shared<StageListProblem>(Box{{-1.0, 1.0}},
                                                  std::move(coeffs),
                                                  std::move(stages));
  fx.iterate = std::move(it);
  return fx;
}

}  // namespace testing_support
