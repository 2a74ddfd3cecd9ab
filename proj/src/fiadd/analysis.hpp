#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fiadd/cluster.hpp"
#include "fiadd/dataset.hpp"
#include "fiadd/linalg.hpp"
#include "fiadd/model.hpp"

namespace fiadd {

enum class Metric { L1, L2, SquaredL2 };
std::string to_string(Metric m);
Metric parse_metric(const std::string& text);  // "l1", "l2", "sq-l2"
double distance(Metric m, std::span<const double> a, std::span<const double> b);

struct LabeledPoint {
  std::string id;
  Vec vector;
  int group = 0;
};

struct LabeledPointSet {
  std::vector<LabeledPoint> points;
  Metric metric = Metric::L2;

  std::vector<int> groups() const;  // distinct group ids, ascending
};

enum class Center { Mean, Median };  // median is coordinate-wise
Center parse_center(const std::string& text);

// Throws InvalidInput for a group with no points.
Vec group_center(const LabeledPointSet& set, int group, Center center);

// Distance between the two group centers.
double acld(const LabeledPointSet& set, int a, int b, Center center = Center::Mean);
// Mean distance over all cross-group pairs.
double ald(const LabeledPointSet& set, int a, int b);

// Mean of s_i = (q_i - p_i) / max(p_i, q_i) with p_i the mean distance to the
// rest of i's group and q_i the smallest mean distance to another group.
// Points alone in their group contribute 0. Needs at least two groups.
double silhouette(const LabeledPointSet& set);

// d_exp / (d_exp + d_non) with each term the mean L1 distance from the point
// to the given centers; 0.5 when both are zero.
double relative_explicit_distance(std::span<const double> point, const Matrix& nonhate_centers,
                                  const Matrix& explicit_centers);
std::vector<double> relative_explicit_distance(const Matrix& points, const Matrix& nonhate_centers,
                                               const Matrix& explicit_centers);

// Which class ids play non-hate, explicit and implicit.
struct Taxonomy {
  int non_hate = 0;
  int explicit_hate = 1;
  int implicit_hate = 2;

  void check(int num_classes) const;
};

// Vectors of the dataset grouped by class; projected through `head` when
// given. Implied vectors are not included.
LabeledPointSet class_point_set(const Dataset& ds, Metric metric, const ProjectionHead* head = nullptr);

struct MotivationReport {
  double ald_ne = 0.0;
  double ald_ni = 0.0;
  double acld_ne = 0.0;
  double acld_ni = 0.0;

  static std::vector<std::string> columns();  // "ALD N-E", "ALD N-I", "ACLD N-E", "ACLD N-I"
  std::vector<double> values() const;
};

// L1 inter-class distances between non-hate and the two hate classes, on raw
// vectors or on projections when `head` is given.
MotivationReport motivation_report(const Dataset& ds, const Taxonomy& tax, const ProjectionHead* head = nullptr,
                                   Center center = Center::Mean, Metric metric = Metric::L1);

// Silhouette of implicit points (group 0) against their implied partners
// (group 1) in the projected space. Empty when the dataset has no implied
// vectors.
std::optional<double> implied_silhouette(const Dataset& ds, const ProjectionHead& head, Metric metric = Metric::L2);

// Per class: silhouette over that class's projected points grouped by
// subcluster; empty when the class has fewer than two subclusters.
std::vector<std::optional<double>> subcluster_silhouettes(const Dataset& ds, const Model& model,
                                                          Metric metric = Metric::L2);

// Subcluster of a sample: its index assignment when the id was in the index
// under the same class, else its nearest own-class centroid; -1 when the
// class has no subclusters.
int subcluster_of(const ClusterIndex& index, const std::string& id, int label, std::span<const double> r);

struct ErrorAnalysis {
  std::vector<std::string> ids;  // implicit samples
  std::vector<double> scores;
  double mean = 0.0;
  double closer_to_explicit = 0.0;  // fraction of scores below 0.5
};

// Implicit projections scored against K-means centers (K per class) of the
// non-hate and explicit projections.
ErrorAnalysis error_analysis(const Dataset& ds, const ProjectionHead& head, const Taxonomy& tax, int K,
                             std::uint64_t seed, int max_iter = 100);

struct LatentRecord {
  std::string id;
  int label = 0;
  int subcluster = -1;
  Vec r;
  std::optional<Vec> r_implied;
};

std::vector<LatentRecord> latent_records(const Model& model, const Dataset& ds);
void write_latent(std::ostream& out, const std::vector<LatentRecord>& records);
std::vector<LatentRecord> read_latent(std::istream& in);

}  // namespace fiadd
