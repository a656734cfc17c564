#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stagewise/problem.hpp"

namespace stagewise {

enum class Activation { kRelu, kSoftplus, kNone };

struct DenseLayer {
  std::vector<Vec> weights;  // weights[r] is row r, length = fan-in
  Vec bias;
  Activation activation = Activation::kRelu;

  int out_dim() const { return static_cast<int>(bias.size()); }
};

/// Feedforward network of dense layers. The final layer is the classifier
/// head and normally carries no activation.
struct NetworkSpec {
  int input_dim = 0;
  std::vector<DenseLayer> layers;
  double softplus_beta = 1.0;

  int output_dim() const { return layers.back().out_dim(); }
  int unit_count() const {
    int total = 0;
    for (const DenseLayer& l : layers) total += l.out_dim();
    return total;
  }

  void validate() const {
    detail::require(input_dim >= 1, "network: input_dim must be positive");
    detail::require(!layers.empty(), "network: no layers");
    detail::require(softplus_beta > 0.0, "network: softplus_beta must be > 0");
    int fan_in = input_dim;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const DenseLayer& layer = layers[k];
      detail::require(layer.out_dim() >= 1, "network: empty layer");
      detail::require(static_cast<int>(layer.weights.size()) ==
                          layer.out_dim(),
                      "network: weights/bias row count mismatch");
      for (const Vec& row : layer.weights) {
        detail::require(static_cast<int>(row.size()) == fan_in,
                        "network: layer " + std::to_string(k) +
                            " fan-in mismatch");
        for (double w : row)
          detail::require(std::isfinite(w), "network: non-finite weight");
      }
      for (double b : layer.bias)
        detail::require(std::isfinite(b), "network: non-finite bias");
      fan_in = layer.out_dim();
    }
  }

  /// Exact forward pass of the real network (not the relaxation).
  Vec forward(const Vec& input) const {
    Vec x = input;
    for (const DenseLayer& layer : layers) {
      Vec next(layer.out_dim());
      for (int r = 0; r < layer.out_dim(); ++r) {
        double a = layer.bias[r];
        for (std::size_t j = 0; j < x.size(); ++j)
          a += layer.weights[r][j] * x[j];
        next[r] = activate(layer.activation, a, softplus_beta);
      }
      x = std::move(next);
    }
    return x;
  }

  static double activate(Activation act, double a, double beta) {
    switch (act) {
      case Activation::kRelu: return a > 0.0 ? a : 0.0;
      case Activation::kSoftplus: return softplus(beta * a) / beta;
      case Activation::kNone: return a;
    }
    return a;
  }

  static double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  static double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }
};

/// Robustness query: certify that no input within the infinity-norm ball of
/// radius epsilon around `center` (optionally intersected with a global
/// coordinate clamp) makes class `target_label` beat `true_label`.
struct VerificationQuery {
  Vec center;
  double epsilon = 0.0;
  int true_label = 0;
  int target_label = -1;  // -1 means: every other class
  bool has_clamp = false;
  Interval clamp{0.0, 1.0};

  Box input_box() const {
    detail::require(epsilon >= 0.0, "query: epsilon must be nonnegative");
    Box box(center.size());
    for (std::size_t j = 0; j < center.size(); ++j) {
      box[j] = {center[j] - epsilon, center[j] + epsilon};
      if (has_clamp) {
        box[j].lo = std::max(box[j].lo, clamp.lo);
        box[j].hi = std::min(box[j].hi, clamp.hi);
      }
      detail::require(box[j].lo <= box[j].hi, "query: empty input region");
    }
    return box;
  }
};

/// Pre-activation interval per unit, layer-major.
struct StageBounds {
  Vec lo;
  Vec hi;
};

/// Interval bound propagation: pushes the input box through each affine
/// layer (splitting weights into positive and negative parts) and through
/// the monotone activation, recording every unit's pre-activation interval.
inline StageBounds ibp(const NetworkSpec& network, const Box& input_box) {
  network.validate();
  detail::require(static_cast<int>(input_box.size()) == network.input_dim,
                  "ibp: input box dimension mismatch");
  StageBounds bounds;
  Vec lo(network.input_dim), hi(network.input_dim);
  for (int j = 0; j < network.input_dim; ++j) {
    lo[j] = input_box[j].lo;
    hi[j] = input_box[j].hi;
  }
  for (const DenseLayer& layer : network.layers) {
    Vec next_lo(layer.out_dim()), next_hi(layer.out_dim());
    for (int r = 0; r < layer.out_dim(); ++r) {
      double a_lo = layer.bias[r];
      double a_hi = layer.bias[r];
      for (std::size_t j = 0; j < lo.size(); ++j) {
        const double w = layer.weights[r][j];
        if (w >= 0.0) {
          a_lo += w * lo[j];
          a_hi += w * hi[j];
        } else {
          a_lo += w * hi[j];
          a_hi += w * lo[j];
        }
      }
      bounds.lo.push_back(a_lo);
      bounds.hi.push_back(a_hi);
      next_lo[r] =
          NetworkSpec::activate(layer.activation, a_lo, network.softplus_beta);
      next_hi[r] =
          NetworkSpec::activate(layer.activation, a_hi, network.softplus_beta);
    }
    lo = std::move(next_lo);
    hi = std::move(next_hi);
  }
  return bounds;
}

/// Value and slope of the two hull boundaries of one unit, as functions of
/// the pre-activation a with interval [lo, hi].
struct HullPoint {
  double mu = 0.0;
  double eta = 0.0;
  double dmu_da = 0.0;
  double deta_da = 0.0;
};

/// ReLU hull: the function itself below, and above either zero (inactive
/// interval), identity (active interval), or the chord of slope
/// hi / (hi - lo) when the interval straddles zero. The subgradient at the
/// kink is taken as 0.
inline HullPoint relu_hull(double a, double lo, double hi) {
  detail::require(lo <= hi, "relu_hull: lo > hi");
  HullPoint h;
  h.mu = a > 0.0 ? a : 0.0;
  h.dmu_da = a > 0.0 ? 1.0 : 0.0;
  if (hi <= 0.0) {
    h.eta = 0.0;
    h.deta_da = 0.0;
  } else if (lo >= 0.0) {
    h.eta = a;
    h.deta_da = 1.0;
  } else {
    const double slope = hi / (hi - lo);
    h.eta = slope * (a - lo);
    h.deta_da = slope;
  }
  return h;
}

/// SoftPlus hull: the function below, the chord through the interval
/// endpoints above. A collapsed interval degenerates the chord to the
/// constant softplus(lo).
inline HullPoint softplus_hull(double a, double lo, double hi, double beta) {
  detail::require(lo <= hi, "softplus_hull: lo > hi");
  detail::require(beta > 0.0, "softplus_hull: beta must be positive");
  HullPoint h;
  h.mu = NetworkSpec::softplus(beta * a) / beta;
  h.dmu_da = NetworkSpec::sigmoid(beta * a);
  const double sp_lo = NetworkSpec::softplus(beta * lo) / beta;
  if (hi == lo) {
    h.eta = sp_lo;
    h.deta_da = 0.0;
  } else {
    const double sp_hi = NetworkSpec::softplus(beta * hi) / beta;
    const double slope = (sp_hi - sp_lo) / (hi - lo);
    h.eta = sp_lo + slope * (a - lo);
    h.deta_da = slope;
  }
  return h;
}

/// Stagewise relaxation of one verification query against one target class.
/// Stages are the network's units in layer-major order; z_i is unit i's
/// activation value. Each stage is sandwiched by the hull of its activation
/// over the IBP pre-activation interval, the objective is the margin
/// (true minus target) read off the final layer's stages, and S is the
/// query's input box. A positive optimum certifies that the target class
/// never wins inside S; the relaxation is one-sided, so a nonpositive bound
/// proves nothing.
class VerificationProblem final : public StagewiseProblem {
 public:
  VerificationProblem(NetworkSpec network, const VerificationQuery& query,
                      int target_label)
      : network_(std::move(network)) {
    network_.validate();
    detail::require(static_cast<int>(query.center.size()) ==
                        network_.input_dim,
                    "verification: center dimension mismatch");
    detail::require(query.true_label >= 0 &&
                        query.true_label < network_.output_dim(),
                    "verification: true_label out of range");
    detail::require(target_label >= 0 &&
                        target_label < network_.output_dim() &&
                        target_label != query.true_label,
                    "verification: bad target label");

    domain_ = BoxSet(query.input_box());
    bounds_ = ibp(network_, domain_.bounds());

    const int n = network_.unit_count();
    stage_layer_.resize(n);
    stage_unit_.resize(n);
    z_bounds_.resize(n);
    layer_offset_.assign(network_.layers.size() + 1, 0);
    int i = 0;
    for (std::size_t k = 0; k < network_.layers.size(); ++k) {
      const DenseLayer& layer = network_.layers[k];
      layer_offset_[k + 1] = layer_offset_[k] + layer.out_dim();
      for (int r = 0; r < layer.out_dim(); ++r, ++i) {
        stage_layer_[i] = static_cast<int>(k);
        stage_unit_[i] = r;
        z_bounds_[i] = {NetworkSpec::activate(layer.activation, bounds_.lo[i],
                                              network_.softplus_beta),
                        NetworkSpec::activate(layer.activation, bounds_.hi[i],
                                              network_.softplus_beta)};
      }
    }

    margin_.assign(n, 0.0);
    const int out_base = layer_offset_[network_.layers.size() - 1];
    margin_[out_base + query.true_label] = 1.0;
    margin_[out_base + target_label] = -1.0;
    first_output_stage_ = out_base;
  }

  const NetworkSpec& network() const { return network_; }
  const StageBounds& stage_bounds() const { return bounds_; }
  const Box& input_box() const { return domain_.bounds(); }
  int first_output_stage() const { return first_output_stage_; }

  int s_dim() const override { return network_.input_dim; }
  int stage_count() const override { return static_cast<int>(margin_.size()); }

  double objective(const Vec&, const Vec& z) const override {
    double acc = 0.0;
    for (std::size_t i = first_output_stage_; i < z.size(); ++i)
      acc += margin_[i] * z[i];
    return acc;
  }
  void objective_gradient(const Vec&, const Vec&, Vec& grad_s,
                          Vec& grad_z) const override {
    grad_s.assign(network_.input_dim, 0.0);
    grad_z = margin_;
  }

  StageValue stage_values(int i, const Vec& s, const Vec& z) const override {
    const HullPoint h = hull_at(i, pre_activation(i, s, z));
    return {h.mu, h.eta};
  }
  void stage_gradients(int i, const Vec& s, const Vec& z,
                       StageGradients& out) const override {
    out.clear();
    const int k = stage_layer_[i];
    const Vec& row = network_.layers[k].weights[stage_unit_[i]];
    const HullPoint h = hull_at(i, pre_activation(i, s, z));
    if (k == 0) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] == 0.0) continue;
        if (h.dmu_da != 0.0)
          out.mu_s.emplace_back(static_cast<int>(j), h.dmu_da * row[j]);
        if (h.deta_da != 0.0)
          out.eta_s.emplace_back(static_cast<int>(j), h.deta_da * row[j]);
      }
    } else {
      const int base = layer_offset_[k - 1];
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] == 0.0) continue;
        if (h.dmu_da != 0.0)
          out.mu_z.emplace_back(base + static_cast<int>(j), h.dmu_da * row[j]);
        if (h.deta_da != 0.0)
          out.eta_z.emplace_back(base + static_cast<int>(j),
                                 h.deta_da * row[j]);
      }
    }
  }

  void project_s(Vec& s) const override { domain_.project(s); }
  Vec argmin_linear_s(const Vec& cost) const override {
    return domain_.argmin_linear(cost);
  }
  const Box& z_bounds() const override { return z_bounds_; }

  /// Pre-activation of stage i at (s, z-prefix); exposed for tests that
  /// steer clear of ReLU kinks.
  double pre_activation(int i, const Vec& s, const Vec& z) const {
    const int k = stage_layer_[i];
    const DenseLayer& layer = network_.layers[k];
    const Vec& row = layer.weights[stage_unit_[i]];
    double a = layer.bias[stage_unit_[i]];
    if (k == 0) {
      for (std::size_t j = 0; j < row.size(); ++j) a += row[j] * s[j];
    } else {
      const int base = layer_offset_[k - 1];
      for (std::size_t j = 0; j < row.size(); ++j) a += row[j] * z[base + j];
    }
    return a;
  }

 private:
  HullPoint hull_at(int i, double a) const {
    switch (network_.layers[stage_layer_[i]].activation) {
      case Activation::kRelu:
        return relu_hull(a, bounds_.lo[i], bounds_.hi[i]);
      case Activation::kSoftplus:
        return softplus_hull(a, bounds_.lo[i], bounds_.hi[i],
                             network_.softplus_beta);
      case Activation::kNone: {
        HullPoint h;
        h.mu = h.eta = a;
        h.dmu_da = h.deta_da = 1.0;
        return h;
      }
    }
    return {};
  }

  NetworkSpec network_;
  BoxSet domain_;
  StageBounds bounds_;
  std::vector<int> stage_layer_;
  std::vector<int> stage_unit_;
  std::vector<int> layer_offset_;
  Vec margin_;
  Box z_bounds_;
  int first_output_stage_ = 0;
};

inline VerificationProblem build_verification_problem(
    const NetworkSpec& network, const VerificationQuery& query,
    int target_label) {
  return VerificationProblem(network, query, target_label);
}

}  // namespace stagewise
