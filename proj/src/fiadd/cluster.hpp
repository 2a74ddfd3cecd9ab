#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fiadd/dataset.hpp"
#include "fiadd/linalg.hpp"
#include "fiadd/rng.hpp"

namespace fiadd {

struct KMeansResult {
  std::vector<int> assignments;  // one per point, in [0, centroids.rows())
  Matrix centroids;              // at most K rows; empty clusters are dropped
  int iterations = 0;
  bool converged = false;
  // Within-cluster sum of squares after every assignment and update step.
  std::vector<double> inertia_trace;
};

// Lloyd's algorithm from a seeded k-means++ start. Stops when no assignment
// changes or after max_iter update/reassign rounds. With fewer points than K
// every point becomes its own cluster. Centroids are always the means of the
// returned assignment.
KMeansResult kmeans(const Matrix& points, int K, int max_iter, std::uint64_t seed);

double within_cluster_ss(const Matrix& points, std::span<const int> assignments, const Matrix& centroids);

// (class, subcluster) pair; ordering is the global tie-break order.
struct ClusterRef {
  int cls = 0;
  int sub = 0;
  auto operator<=>(const ClusterRef&) const = default;
};

struct Subcluster {
  ClusterRef ref;
  Vec centroid;
  std::vector<std::size_t> members;  // positions in the training set
  double loss_stat = 1.0;
};

// Per-class subclusters over the projected training set.
struct ClusterIndex {
  std::vector<Subcluster> clusters;     // sorted by ref
  std::vector<std::string> ids;         // training ids by position
  std::vector<std::size_t> assignment;  // training position -> clusters slot
  std::uint64_t generation = 0;

  std::size_t slot(ClusterRef ref) const;  // throws InvalidInput if absent
  const Subcluster& at(ClusterRef ref) const { return clusters[slot(ref)]; }
  std::optional<ClusterRef> assignment_of(const std::string& id) const;
  std::size_t total_size() const;

 private:
  mutable std::unordered_map<std::string, std::size_t> by_id_;
};

// Runs kmeans independently per class on the projected training points.
// Every class in [0, num_classes) needs at least one sample. Loss statistics
// start uniform (1.0).
ClusterIndex build_index(std::span<const std::string> ids, const Matrix& projected,
                         std::span<const int> labels, int num_classes, int K, int max_iter,
                         std::uint64_t seed, std::uint64_t generation = 0);


// Warmup: uniform over subclusters. Afterwards: the class with the highest
// mean loss statistic (lowest class id on ties), then one of its subclusters
// with probability proportional to its statistic.
ClusterRef select_seed(const ClusterIndex& index, int epoch, int warmup_epochs, Rng& rng);

// The M subclusters of other classes whose centroids are nearest the seed
// centroid (squared L2), ties by ascending ref.
std::vector<ClusterRef> select_imposters(const ClusterIndex& index, ClusterRef seed, int M);

struct BatchGroup {
  ClusterRef ref;
  std::vector<std::size_t> members;  // training positions, D entries
};

struct NeighborhoodBatch {
  ClusterRef seed;
  std::vector<ClusterRef> imposters;
  std::vector<BatchGroup> groups;  // seed first, then imposters in order
  // One entry per sampled point that is implicit and carries an implied
  // vector: (group, slot within group).
  std::vector<std::pair<std::size_t, std::size_t>> implied;

  std::size_t total_points() const;
};

// D points per selected cluster, without replacement when the cluster holds
// at least D members and with replacement otherwise.
NeighborhoodBatch sample_batch(const ClusterIndex& index, ClusterRef seed,
                               std::span<const ClusterRef> imposters, int D, Rng& rng,
                               const Dataset& train);

// Each cluster sampled in the batch takes the mean loss of its points there
// as its statistic; clusters not sampled since the build keep 1.0.
void record_batch_losses(ClusterIndex& index, const NeighborhoodBatch& batch, std::span<const double> per_point);

// Class of the nearest centroid (squared L2), ties by ascending ref.
int nearest_cluster_class(const ClusterIndex& index, std::span<const double> r);

}  // namespace fiadd
