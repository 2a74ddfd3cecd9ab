#include <doctest.h>

#include <map>
#include <numeric>

#include "fiadd/cluster.hpp"
#include "fiadd/error.hpp"
#include "oracle.hpp"

using namespace fiadd;

namespace {

Matrix rows(std::initializer_list<Vec> vs) {
  Matrix m;
  for (const auto& v : vs) m.append_row(v);
  return m;
}

// Index with one cluster per given (class, centroid); loss stats default.
ClusterIndex hand_index(const std::vector<std::pair<ClusterRef, Vec>>& cs) {
  ClusterIndex idx;
  for (const auto& [ref, c] : cs) {
    Subcluster s;
    s.ref = ref;
    s.centroid = c;
    s.members = {idx.clusters.size()};
    idx.clusters.push_back(s);
  }
  return idx;
}

}  // namespace

TEST_CASE("kmeans on duplicated points is exact") {
  const Matrix pts = rows({{0, 0}, {0, 0}, {10, 10}, {10, 10}});
  const KMeansResult r = kmeans(pts, 2, 100, 1);
  REQUIRE(r.centroids.rows() == 2);
  std::set<std::pair<double, double>> cs;
  for (std::size_t i = 0; i < 2; ++i) cs.insert({r.centroids(i, 0), r.centroids(i, 1)});
  CHECK(cs == std::set<std::pair<double, double>>{{0, 0}, {10, 10}});
  CHECK(within_cluster_ss(pts, r.assignments, r.centroids) == 0.0);
}

TEST_CASE("kmeans with K=1 returns the mean") {
  Rng rng(4);
  Matrix pts(17, 3);
  for (double& x : pts.data()) x = rng.normal();
  const KMeansResult r = kmeans(pts, 1, 10, 2);
  REQUIRE(r.centroids.rows() == 1);
  for (std::size_t k = 0; k < 3; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < 17; ++i) s += pts(i, k);
    CHECK(r.centroids(0, k) == doctest::Approx(s / 17).epsilon(1e-12));
  }
}

TEST_CASE("kmeans separates two far blobs") {
  Rng rng(8);
  Matrix pts;
  std::vector<int> blob;
  for (int i = 0; i < 40; ++i) {
    const double cx = i < 20 ? 0.0 : 100.0;
    pts.append_row(Vec{cx + rng.normal(), rng.normal()});
    blob.push_back(i < 20 ? 0 : 1);
  }
  const KMeansResult r = kmeans(pts, 2, 100, 3);
  REQUIRE(r.centroids.rows() == 2);
  for (int i = 0; i < 40; ++i) {
    // brute force: nearest generating mean
    const double d0 = oracle::sqdist({pts(i, 0), pts(i, 1)}, {0, 0});
    const double d1 = oracle::sqdist({pts(i, 0), pts(i, 1)}, {100, 0});
    CHECK((d0 < d1) == (blob[i] == 0));
    CHECK(r.assignments[i] == r.assignments[blob[i] == 0 ? 0 : 39]);
  }
  CHECK(r.assignments[0] != r.assignments[39]);
}

TEST_CASE("kmeans inertia never increases and centroids are assignment means") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    Matrix pts(30, 2);
    for (double& x : pts.data()) x = 3 * rng.normal();
    const KMeansResult r = kmeans(pts, 4, 50, seed);
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
      CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
    for (std::size_t c = 0; c < r.centroids.rows(); ++c) {
      std::vector<oracle::V> members;
      for (std::size_t i = 0; i < 30; ++i)
        if (r.assignments[i] == int(c)) members.push_back({pts(i, 0), pts(i, 1)});
      REQUIRE_FALSE(members.empty());
      const auto m = oracle::mean_of(members);
      CHECK(r.centroids(c, 0) == doctest::Approx(m[0]).epsilon(1e-12));
      CHECK(r.centroids(c, 1) == doctest::Approx(m[1]).epsilon(1e-12));
    }
    CHECK(kmeans(pts, 4, 50, seed).assignments == r.assignments);
  }
}

TEST_CASE("build_index over separable classes") {
  Rng rng(2);
  Matrix pts;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 30; ++i) {
      pts.append_row(Vec{50.0 * c + (i % 3) * 10 + 0.1 * rng.normal(), 0.1 * rng.normal()});
      labels.push_back(c);
      ids.push_back("p" + std::to_string(c * 30 + i));
    }
  const ClusterIndex idx = build_index(ids, pts, labels, 3, 3, 100, 9, 4);
  CHECK(idx.clusters.size() == 9);
  CHECK(idx.total_size() == 90);
  CHECK(idx.generation == 4);
  for (std::size_t i = 0; i < 90; ++i) {
    const auto a = idx.assignment_of(ids[i]);
    REQUIRE(a.has_value());
    CHECK(a->cls == labels[i]);
    CHECK(idx.clusters[idx.assignment[i]].ref == *a);
  }
  for (const auto& c : idx.clusters) CHECK(c.loss_stat == 1.0);
  CHECK(std::is_sorted(idx.clusters.begin(), idx.clusters.end(),
                       [](const Subcluster& a, const Subcluster& b) { return a.ref < b.ref; }));
}

TEST_CASE("class with two samples gets two singletons") {
  const Matrix pts = rows({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {9, 9}, {8, 8}});
  const std::vector<int> labels = {0, 0, 0, 0, 1, 1};
  const std::vector<std::string> ids = {"a", "b", "c", "d", "e", "f"};
  const ClusterIndex idx = build_index(ids, pts, labels, 2, 3, 100, 1);
  int class1 = 0;
  for (const auto& c : idx.clusters)
    if (c.ref.cls == 1) {
      class1++;
      CHECK(c.members.size() == 1);
    }
  CHECK(class1 == 2);
  CHECK_THROWS_AS(build_index(ids, pts, labels, 3, 3, 100, 1), InvalidInput);
}

TEST_CASE("seed selection during warmup is reproducible") {
  const ClusterIndex idx = hand_index({{{0, 0}, {0, 0}}, {{0, 1}, {1, 0}}, {{1, 0}, {5, 0}}, {{2, 0}, {9, 0}}});
  Rng a(3), b(3);
  for (int i = 0; i < 50; ++i) CHECK(select_seed(idx, 0, 5, a) == select_seed(idx, 0, 5, b));
}

TEST_CASE("seed selection after warmup follows loss statistics") {
  ClusterIndex idx = hand_index({{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {2, 0}}, {{1, 2}, {3, 0}}, {{2, 0}, {4, 0}}});
  idx.clusters[0].loss_stat = 0.1;
  idx.clusters[1].loss_stat = 0.9;
  idx.clusters[2].loss_stat = 0.9;
  idx.clusters[3].loss_stat = 0.9;
  idx.clusters[4].loss_stat = 0.3;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(select_seed(idx, 10, 5, rng).cls == 1);

  idx.clusters[2].loss_stat = 0.0;
  idx.clusters[3].loss_stat = 0.0;
  idx.clusters[4].loss_stat = 0.2;
  int hits = 0;
  for (int i = 0; i < 1000; ++i) hits += select_seed(idx, 10, 5, rng) == ClusterRef{1, 0};
  CHECK(hits == 1000);

  // equal class means: the lower class id wins
  idx.clusters[4].loss_stat = 0.3;
  idx.clusters[1].loss_stat = 0.3;
  idx.clusters[2].loss_stat = 0.3;
  idx.clusters[3].loss_stat = 0.3;
  CHECK(select_seed(idx, 10, 5, rng).cls == 1);
}

TEST_CASE("seed weights are proportional to loss statistics") {
  ClusterIndex idx = hand_index({{{0, 0}, {0, 0}}, {{0, 1}, {1, 0}}, {{1, 0}, {5, 0}}});
  idx.clusters[0].loss_stat = 3.0;
  idx.clusters[1].loss_stat = 1.0;
  idx.clusters[2].loss_stat = 0.1;
  Rng rng(6);
  int first = 0;
  for (int i = 0; i < 4000; ++i) first += select_seed(idx, 1, 0, rng) == ClusterRef{0, 0};
  CHECK(first / 4000.0 == doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("imposters are the nearest other-class centroids") {
  const ClusterIndex idx = hand_index({{{0, 0}, {0, 0}}, {{0, 1}, {0.5, 0}}, {{1, 0}, {5, 0}}, {{1, 1}, {0, 1}}, {{2, 0}, {0, 2}}});
  CHECK(select_imposters(idx, {0, 0}, 2) == std::vector<ClusterRef>{{1, 1}, {2, 0}});
  CHECK(select_imposters(idx, {0, 0}, 3) == std::vector<ClusterRef>{{1, 1}, {2, 0}, {1, 0}});
  CHECK_THROWS_WITH_AS(select_imposters(idx, {0, 0}, 4), doctest::Contains("only 3"), InvalidInput);

  const ClusterIndex tie = hand_index({{{0, 0}, {0, 0}}, {{1, 0}, {0, 1}}, {{2, 0}, {1, 0}}});
  CHECK(select_imposters(tie, {0, 0}, 1) == std::vector<ClusterRef>{{1, 0}});
}

TEST_CASE("batch sampling sizes and implied pairing") {
  Dataset train;
  train.d_in = 1;
  train.class_names = {"N", "E", "I"};
  train.implicit_labels = {2};
  Matrix pts;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < (c == 2 ? 2 : 10); ++i) {
      EmbeddedSample s{"x" + std::to_string(train.size()), c, {double(10 * c + i)}, {}};
      if (c == 2) s.implied = Vec{0.0};
      train.samples.push_back(s);
      pts.append_row(s.vector);
      labels.push_back(c);
      ids.push_back(s.id);
    }
  const ClusterIndex idx = build_index(ids, pts, labels, 3, 1, 10, 1);
  Rng rng(2);
  const auto imps = select_imposters(idx, {0, 0}, 2);
  const NeighborhoodBatch nb = sample_batch(idx, {0, 0}, imps, 4, rng, train);
  CHECK(nb.total_points() == 12);
  std::set<std::size_t> seed_members(nb.groups[0].members.begin(), nb.groups[0].members.end());
  CHECK(seed_members.size() == 4);  // without replacement

  const NeighborhoodBatch ib = sample_batch(idx, {2, 0}, select_imposters(idx, {2, 0}, 2), 4, rng, train);
  CHECK(ib.groups[0].members.size() == 4);
  for (std::size_t m : ib.groups[0].members) CHECK(train.samples[m].label == 2);
  std::size_t seed_implied = 0;
  for (const auto& [g, k] : ib.implied) seed_implied += g == 0;
  CHECK(seed_implied == 4);

  std::vector<double> losses(ib.total_points(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) losses[i] = 2.0 + i;
  ClusterIndex mut = idx;
  record_batch_losses(mut, ib, losses);
  CHECK(mut.at({2, 0}).loss_stat == doctest::Approx(3.5));
  CHECK(mut.at(ib.groups[1].ref).loss_stat == 0.0);
  CHECK_THROWS_AS(record_batch_losses(mut, ib, std::vector<double>(3)), InvalidInput);
}

TEST_CASE("nearest cluster class matches brute force") {
  Rng rng(12);
  ClusterIndex idx;
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < 3; ++s) {
      Subcluster sc;
      sc.ref = {c, s};
      sc.centroid = {3 * rng.normal(), 3 * rng.normal()};
      idx.clusters.push_back(sc);
    }
  for (int i = 0; i < 50; ++i) {
    const Vec r = {4 * rng.normal(), 4 * rng.normal()};
    double best = 1e300;
    int cls = -1;
    for (const auto& c : idx.clusters) {
      const double d = oracle::sqdist(r, c.centroid);
      if (d < best) best = d, cls = c.ref.cls;
    }
    CHECK(nearest_cluster_class(idx, r) == cls);
  }
  CHECK(nearest_cluster_class(idx, idx.clusters[4].centroid) == 1);
  CHECK(nearest_cluster_class(hand_index({{{0, 0}, {-1, 0}}, {{1, 0}, {1, 0}}}), Vec{0, 0}) == 0);
}
