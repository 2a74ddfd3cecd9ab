#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fiadd/linalg.hpp"

namespace fiadd {

// Which training objective drives the projection head.
//   Add        plain density discrimination, no focal weighting
//   AddFoc     focal-weighted density discrimination
//   AddInfFoc  focal-weighted, with the implied-meaning term in the numerator
//   AceOnly    class-weighted cross-entropy alone
enum class Variant { Add, AddFoc, AddInfFoc, AceOnly };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);  // "add", "add-foc", "add-inf-foc", "ace"

struct ObjectiveConfig {
  double alpha = 1.0;     // separation margin
  double gamma = 2.0;     // focal exponent
  double beta = 0.5;      // weight of the cross-entropy term
  double epsilon = 1e-7;  // probability clamp [eps, 1 - eps]
  Variant variant = Variant::AddInfFoc;
  std::vector<double> class_weights;  // empty: uniform

  void check(int num_classes) const;  // throws InvalidInput
};

constexpr double kVarianceFloor = 1e-12;

// Projected points of one neighbourhood batch, grouped by subcluster.
struct PointBatch {
  Matrix points;                           // T x d
  std::vector<std::size_t> group;          // T, group of each point
  std::vector<int> group_class;            // G, class of each group
  Matrix implied;                          // U x d, implied projections
  std::vector<std::size_t> implied_owner;  // U, owning row of `points`

  std::size_t num_groups() const { return group_class.size(); }
};

struct BatchStats {
  Matrix mu;                      // G x d, per-group mean of sampled points
  std::vector<char> has_implied;  // G
  Matrix mu_tilde;                // G x d, valid where has_implied
  double sigma2 = 0.0;
  double sigma2_tilde = 0.0;
  bool sigma2_floored = false;
  bool sigma2_tilde_floored = false;
  bool tilde_fallback = false;  // sigma2_tilde borrowed from sigma2
};

// Means per group; pooled variance of points about their own group mean with
// normalizer T - 1 (floored at kVarianceFloor); the implied analogue over
// implied points, falling back to sigma2 when an implicit group has fewer
// than two implied points.
BatchStats batch_stats(const PointBatch& batch);

// exp(-|r - own|^2 / 2s2 - alpha) / sum_o exp(-|r - mu_o|^2 / 2s2), the sum
// over cluster means of other classes. Unclamped; may exceed 1.
double p_add(std::span<const double> r, std::span<const double> own_mean,
             const std::vector<Vec>& imposter_means, double sigma2, double alpha);

// p_add with a second numerator term exp(-|r - implied|^2 / 2s2~ - alpha).
// Without an implied mean this is p_add exactly.
double p_add_inf(std::span<const double> r, std::span<const double> own_mean,
                 std::optional<std::span<const double>> implied_mean, double sigma2,
                 double sigma2_tilde, const std::vector<Vec>& imposter_means, double alpha);

struct AddLoss {
  double loss = 0.0;
  std::vector<double> per_point;  // focal loss of each point
  std::vector<double> p;          // unclamped probability of each point
  Matrix grad_points;             // dloss / dpoints
  Matrix grad_implied;            // dloss / dimplied
};

// Mean over all T sampled points of (1 - p^)^gamma * -log p^, p^ the clamped
// probability from the configured variant. Gradients reach every sampled and
// implied point through p, the group means and both variances.
AddLoss add_loss(const PointBatch& batch, const BatchStats& stats, const ObjectiveConfig& cfg);

struct LossGrad {
  double loss = 0.0;
  Matrix grad;
};

// Mean over rows of w_y * -log softmax(logits)_y. Weights are renormalized
// to mean 1; empty weights mean uniform.
LossGrad ace_loss(const Matrix& logits, std::span<const int> labels, std::span<const double> class_weights);

// w_c = N / (C * N_c), renormalized to mean 1. Empty classes get weight 1
// before renormalization.
std::vector<double> inverse_frequency_weights(std::span<const std::size_t> class_counts);

struct ScalarGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// beta * ce + (1 - beta) * add, gradients combined the same way.
ScalarGrad combined_loss(const ScalarGrad& ce, const ScalarGrad& add, double beta);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using GradFn = std::function<ScalarGrad(std::span<const double>)>;

// Central differences against the analytic gradient of fn at `inputs`.
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const GradFn& fn, std::span<const double> inputs, double step);

}  // namespace fiadd
