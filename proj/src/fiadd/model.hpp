#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fiadd/cluster.hpp"
#include "fiadd/config.hpp"
#include "fiadd/dataset.hpp"
#include "fiadd/linalg.hpp"
#include "fiadd/metrics.hpp"
#include "fiadd/objective.hpp"

namespace fiadd {

enum class Activation { Identity, Tanh };
std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

// r = act(W x + b). W is stored d_proj x d_in, row-major.
struct ProjectionHead {
  Matrix weight;
  Vec bias;
  Activation activation = Activation::Identity;

  std::size_t d_in() const { return weight.cols(); }
  std::size_t d_proj() const { return weight.rows(); }
  bool operator==(const ProjectionHead&) const = default;
};

// logits = V r + c. V is stored C x d_proj, row-major.
struct ClassificationHead {
  Matrix weight;
  Vec bias;

  std::size_t num_classes() const { return weight.rows(); }
  bool operator==(const ClassificationHead&) const = default;
};

// Both heads. The flat layout, used by the optimizer and gradient checks, is
// projection weight, projection bias, classifier weight, classifier bias.
struct Params {
  ProjectionHead projection;
  ClassificationHead classifier;

  std::size_t size() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool operator==(const Params&) const = default;
};

// Xavier-uniform weights, zero biases.
Params init_params(std::size_t d_in, std::size_t d_proj, int num_classes, Activation act, std::uint64_t seed);

Vec project(const ProjectionHead& head, std::span<const double> x);
Vec classify(const ClassificationHead& head, std::span<const double> r);

// Rows of x projected; also returns the pre-activations when asked.
Matrix project_rows(const ProjectionHead& head, const Matrix& x, Matrix* pre = nullptr);

enum class OptimizerKind { Sgd, SgdMomentum };

struct TrainConfig {
  int epochs = 5000;
  int K = 3;
  int M = 2;
  int D = 0;  // 0: min(8, smallest selected cluster), at least 2
  int d_proj = 128;
  Activation activation = Activation::Identity;
  OptimizerKind optimizer = OptimizerKind::SgdMomentum;
  double momentum = 0.9;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  int eval_every = 25;
  int warmup_epochs = -1;  // -1: 10% of epochs
  int kmeans_iters = 100;
  int minority_class = -1;  // -1: the first implicit label, else class 1
  ObjectiveConfig objective;

  void check() const;  // throws InvalidInput
  int effective_warmup() const { return warmup_epochs >= 0 ? warmup_epochs : epochs / 10; }
  int nominal_D() const { return D > 0 ? D : 8; }
};

// Reads the `train` and `objective` sections over the defaults.
TrainConfig train_config_from(const Config& cfg);
// Key/value echo matching the config file keys.
std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& cfg);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double momentum);
  void step(std::vector<double>& params, std::span<const double> grad);

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_;
  std::vector<double> velocity_;
};

// Raw inputs of one training batch: original points in group order plus
// the implied vectors of implicit points.
struct BatchInputs {
  Matrix x;                                // T x d_in
  std::vector<int> labels;                 // T
  std::vector<std::size_t> group;          // T
  std::vector<int> group_class;            // G
  Matrix x_implied;                        // U x d_in
  std::vector<std::size_t> implied_owner;  // U
};

BatchInputs gather_batch(const NeighborhoodBatch& batch, const Dataset& train);

struct StepResult {
  ScalarGrad total;  // over Params::flatten() coordinates
  double ce = 0.0;
  double add = 0.0;
  std::vector<double> per_point_add;
};

// The full objective of one batch with its gradient over all parameters:
// class-weighted cross-entropy on the original points, the density
// discrimination loss on their projections (and implied projections), mixed
// by beta. AceOnly uses the cross-entropy alone.
StepResult batch_objective(const Params& params, const BatchInputs& batch, const ObjectiveConfig& cfg);

// Parameters plus the subcluster index built on their training projections.
struct Model {
  Params params;
  ClusterIndex index;
};

int predict(const Model& model, std::span<const double> x);
std::vector<int> predict_all(const Model& model, const Dataset& ds);
int predict_nearest_cluster(const Model& model, const ClusterIndex& index, std::span<const double> x);

enum class InferenceMode { Classifier, NearestCluster };
InferenceMode parse_inference_mode(const std::string& text);

struct Evaluation {
  Metrics metrics;
  std::optional<Metrics> merged;
  std::vector<int> predictions;
};

Evaluation evaluate(const Model& model, const Dataset& ds, InferenceMode mode = InferenceMode::Classifier,
                    const std::optional<LabelMerge>& merge = std::nullopt);

struct HistoryRecord {
  int epoch = 0;
  std::vector<double> class_f1;
  double macro_f1 = 0.0;
  double ce_loss = 0.0;
  double add_loss = 0.0;
};

struct TrainStats {
  std::size_t steps = 0;
  std::size_t index_builds = 0;
  std::size_t sampled_batches = 0;
};

struct TrainedModel {
  std::vector<std::string> class_names;
  std::set<int> implicit_labels;
  std::size_t d_in = 0;
  TrainConfig config;
  Model final_model;
  Model best;  // parameters at the best test macro-F1
  int best_epoch = 0;
  double best_macro_f1 = 0.0;
  int minority_class = 0;
  double highest_minority_f1 = 0.0;
  int highest_minority_epoch = 0;
  std::vector<HistoryRecord> history;
  TrainStats stats;
  bool diverged = false;
  std::string divergence;

  const Model& weights(bool use_best) const { return use_best ? best : final_model; }
};

// Epoch loop: project, re-cluster, sample neighbourhoods, step on the
// combined objective; evaluate on the test split every eval_every epochs.
// A non-finite loss stops training and keeps the last finite parameters
// (`diverged` set). Deterministic in cfg.seed.
TrainedModel train(const SplitPair& data, const TrainConfig& cfg);

}  // namespace fiadd
