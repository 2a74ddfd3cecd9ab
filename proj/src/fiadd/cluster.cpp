#include "fiadd/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "fiadd/error.hpp"

namespace fiadd {
namespace {

int nearest_row(const Matrix& centroids, std::span<const double> p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_l2(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

void recompute_means(const Matrix& points, std::span<const int> assignments, Matrix& centroids) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  Matrix sums(k, points.cols());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto c = static_cast<std::size_t>(assignments[i]);
    axpy(1.0, points.row(i), sums.row(c));
    ++counts[c];
  }
  // An emptied cluster keeps its previous centroid.
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    auto out = centroids.row(c);
    const auto in = sums.row(c);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = in[j] / static_cast<double>(counts[c]);
  }
}

Matrix kmeanspp_init(const Matrix& points, int K, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centers;
  std::vector<char> chosen(n, 0);
  std::size_t first = rng.below(n);
  centers.append_row(points.row(first));
  chosen[first] = 1;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_l2(points.row(i), centers.row(0));
  while (centers.rows() < static_cast<std::size_t>(K)) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t next;
    if (total > 0.0) {
      next = rng.weighted(d2);
    } else {
      // Every remaining point coincides with a center.
      next = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
    }
    chosen[next] = 1;
    centers.append_row(points.row(next));
    const auto c = centers.row(centers.rows() - 1);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_l2(points.row(i), c));
  }
  return centers;
}

}  // namespace

double within_cluster_ss(const Matrix& points, std::span<const int> assignments, const Matrix& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i)
    s += squared_l2(points.row(i), centroids.row(static_cast<std::size_t>(assignments[i])));
  return s;
}

KMeansResult kmeans(const Matrix& points, int K, int max_iter, std::uint64_t seed) {
  if (points.rows() == 0) throw InvalidInput("kmeans: no points");
  if (K < 1) throw InvalidInput("kmeans: K must be positive");
  if (max_iter < 1) throw InvalidInput("kmeans: max_iter must be positive");

  KMeansResult out;
  const std::size_t n = points.rows();
  if (n <= static_cast<std::size_t>(K)) {
    out.centroids = points;
    out.assignments.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.assignments[i] = static_cast<int>(i);
    out.converged = true;
    out.inertia_trace.push_back(0.0);
    return out;
  }

  Rng rng(seed);
  Matrix centroids = kmeanspp_init(points, K, rng);
  std::vector<int> assign(n);
  for (std::size_t i = 0; i < n; ++i) assign[i] = nearest_row(centroids, points.row(i));
  out.inertia_trace.push_back(within_cluster_ss(points, assign, centroids));

  bool stale = true;  // centroids not yet the means of `assign`
  for (int it = 0; it < max_iter; ++it) {
    recompute_means(points, assign, centroids);
    stale = false;
    out.inertia_trace.push_back(within_cluster_ss(points, assign, centroids));
    ++out.iterations;

    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int best = nearest_row(centroids, points.row(i));
      // Keep the incumbent on exact ties so a round only moves points that
      // strictly improve.
      if (best != assign[i] &&
          squared_l2(points.row(i), centroids.row(static_cast<std::size_t>(best))) <
              squared_l2(points.row(i), centroids.row(static_cast<std::size_t>(assign[i])))) {
        assign[i] = best;
        ++changed;
      }
    }
    out.inertia_trace.push_back(within_cluster_ss(points, assign, centroids));
    if (changed == 0) {
      out.converged = true;
      break;
    }
    stale = true;
  }
  if (stale) recompute_means(points, assign, centroids);

  // Drop empty clusters and renumber the rest densely, keeping their order.
  std::vector<int> remap(centroids.rows(), -1);
  Matrix kept;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    if (std::find(assign.begin(), assign.end(), static_cast<int>(c)) == assign.end()) continue;
    remap[c] = static_cast<int>(kept.rows());
    kept.append_row(centroids.row(c));
  }
  for (auto& a : assign) a = remap[static_cast<std::size_t>(a)];
  out.assignments = std::move(assign);
  out.centroids = std::move(kept);
  return out;
}

std::size_t ClusterIndex::slot(ClusterRef ref) const {
  auto it = std::lower_bound(clusters.begin(), clusters.end(), ref,
                             [](const Subcluster& s, ClusterRef r) { return s.ref < r; });
  if (it == clusters.end() || it->ref != ref)
    throw InvalidInput("no subcluster (" + std::to_string(ref.cls) + ", " + std::to_string(ref.sub) + ")");
  return static_cast<std::size_t>(it - clusters.begin());
}

std::optional<ClusterRef> ClusterIndex::assignment_of(const std::string& id) const {
  if (by_id_.size() != ids.size()) {
    by_id_.clear();
    for (std::size_t i = 0; i < ids.size(); ++i) by_id_.emplace(ids[i], i);
  }
  auto it = by_id_.find(id);
  if (it == by_id_.end() || it->second >= assignment.size()) return std::nullopt;
  return clusters[assignment[it->second]].ref;
}

std::size_t ClusterIndex::total_size() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.members.size();
  return n;
}

ClusterIndex build_index(std::span<const std::string> ids, const Matrix& projected,
                         std::span<const int> labels, int num_classes, int K, int max_iter,
                         std::uint64_t seed, std::uint64_t generation) {
  const std::size_t n = projected.rows();
  if (ids.size() != n || labels.size() != n) throw InvalidInput("build_index: ids, labels and points differ in length");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw InvalidInput("build_index: label out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }

  ClusterIndex index;
  index.ids.assign(ids.begin(), ids.end());
  index.assignment.assign(n, 0);
  index.generation = generation;
  for (int c = 0; c < num_classes; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) throw InvalidInput("build_index: class " + std::to_string(c) + " has no training samples");
    Matrix pts(members.size(), projected.cols());
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto src = projected.row(members[k]);
      std::copy(src.begin(), src.end(), pts.row(k).begin());
    }
    const KMeansResult km = kmeans(pts, K, max_iter, mix_seed(seed, static_cast<std::uint64_t>(c)));
    const std::size_t base = index.clusters.size();
    for (std::size_t s = 0; s < km.centroids.rows(); ++s) {
      Subcluster sc;
      sc.ref = {c, static_cast<int>(s)};
      sc.centroid = to_vec(km.centroids.row(s));
      index.clusters.push_back(std::move(sc));
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::size_t slot = base + static_cast<std::size_t>(km.assignments[k]);
      index.clusters[slot].members.push_back(members[k]);
      index.assignment[members[k]] = slot;
    }
  }
  return index;
}

void record_batch_losses(ClusterIndex& index, const NeighborhoodBatch& batch, std::span<const double> per_point) {
  if (per_point.size() != batch.total_points()) throw InvalidInput("record_batch_losses: one loss per batch point expected");
  std::size_t i = 0;
  for (const auto& g : batch.groups) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.members.size(); ++k) s += per_point[i++];
    if (!g.members.empty()) index.clusters[index.slot(g.ref)].loss_stat = s / static_cast<double>(g.members.size());
  }
}

ClusterRef select_seed(const ClusterIndex& index, int epoch, int warmup_epochs, Rng& rng) {
  if (index.clusters.empty()) throw InvalidInput("select_seed: empty index");
  if (epoch < warmup_epochs) return index.clusters[rng.below(index.clusters.size())].ref;

  std::map<int, std::pair<double, std::size_t>> per_class;
  for (const auto& c : index.clusters) {
    auto& [sum, count] = per_class[c.ref.cls];
    sum += c.loss_stat;
    ++count;
  }
  int best_class = per_class.begin()->first;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (const auto& [cls, acc] : per_class) {
    const double mean = acc.first / static_cast<double>(acc.second);
    if (mean > best_mean) {
      best_mean = mean;
      best_class = cls;
    }
  }
  std::vector<ClusterRef> refs;
  std::vector<double> weights;
  for (const auto& c : index.clusters) {
    if (c.ref.cls != best_class) continue;
    refs.push_back(c.ref);
    weights.push_back(std::max(c.loss_stat, 0.0));
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total)) return refs[rng.below(refs.size())];
  return refs[rng.weighted(weights)];
}

std::vector<ClusterRef> select_imposters(const ClusterIndex& index, ClusterRef seed, int M) {
  const auto& centre = index.at(seed).centroid;
  std::vector<std::pair<double, ClusterRef>> candidates;
  for (const auto& c : index.clusters) {
    if (c.ref.cls == seed.cls) continue;
    candidates.emplace_back(squared_l2(centre, c.centroid), c.ref);
  }
  if (M < 0 || candidates.size() < static_cast<std::size_t>(M))
    throw InvalidInput("select_imposters: need " + std::to_string(M) + " clusters from other classes, only " +
                       std::to_string(candidates.size()) + " available");
  std::sort(candidates.begin(), candidates.end());
  std::vector<ClusterRef> out;
  for (int i = 0; i < M; ++i) out.push_back(candidates[static_cast<std::size_t>(i)].second);
  return out;
}

std::size_t NeighborhoodBatch::total_points() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.members.size();
  return n;
}

NeighborhoodBatch sample_batch(const ClusterIndex& index, ClusterRef seed,
                               std::span<const ClusterRef> imposters, int D, Rng& rng,
                               const Dataset& train) {
  if (D < 1) throw InvalidInput("sample_batch: D must be positive");
  NeighborhoodBatch batch;
  batch.seed = seed;
  batch.imposters.assign(imposters.begin(), imposters.end());

  std::vector<ClusterRef> order{seed};
  order.insert(order.end(), imposters.begin(), imposters.end());
  for (const ClusterRef ref : order) {
    const auto& members = index.at(ref).members;
    if (members.empty()) throw InvalidInput("sample_batch: selected cluster is empty");
    BatchGroup g;
    g.ref = ref;
    const auto want = static_cast<std::size_t>(D);
    if (members.size() >= want) {
      std::vector<std::size_t> pool = members;
      for (std::size_t k = 0; k < want; ++k) {
        const std::size_t j = k + rng.below(pool.size() - k);
        std::swap(pool[k], pool[j]);
        g.members.push_back(pool[k]);
      }
    } else {
      for (std::size_t k = 0; k < want; ++k) g.members.push_back(members[rng.below(members.size())]);
    }
    batch.groups.push_back(std::move(g));
  }
  for (std::size_t gi = 0; gi < batch.groups.size(); ++gi) {
    const auto& g = batch.groups[gi];
    for (std::size_t k = 0; k < g.members.size(); ++k) {
      const auto& s = train.samples[g.members[k]];
      if (train.is_implicit(s.label) && s.implied) batch.implied.emplace_back(gi, k);
    }
  }
  return batch;
}

int nearest_cluster_class(const ClusterIndex& index, std::span<const double> r) {
  if (index.clusters.empty()) throw InvalidInput("nearest-cluster inference needs a non-empty index");
  double best = std::numeric_limits<double>::infinity();
  int cls = index.clusters.front().ref.cls;
  for (const auto& c : index.clusters) {
    const double d = squared_l2(r, c.centroid);
    if (d < best) {
      best = d;
      cls = c.ref.cls;
    }
  }
  return cls;
}

}  // namespace fiadd
