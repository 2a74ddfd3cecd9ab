#include "fiadd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "fiadd/error.hpp"

namespace fiadd {

std::string to_string(Metric m) {
  switch (m) {
    case Metric::L1: return "l1";
    case Metric::L2: return "l2";
    case Metric::SquaredL2: return "sq-l2";
  }
  return "?";
}

Metric parse_metric(const std::string& text) {
  if (text == "l1" || text == "L1") return Metric::L1;
  if (text == "l2" || text == "L2") return Metric::L2;
  if (text == "sq-l2" || text == "squared-l2") return Metric::SquaredL2;
  throw InvalidInput("unknown metric '" + text + "' (l1, l2, sq-l2)");
}

double distance(Metric m, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("distance: dimension mismatch");
  switch (m) {
    case Metric::L1: return l1(a, b);
    case Metric::L2: return std::sqrt(squared_l2(a, b));
    case Metric::SquaredL2: return squared_l2(a, b);
  }
  return 0.0;
}

std::vector<int> LabeledPointSet::groups() const {
  std::set<int> g;
  for (const auto& p : points) g.insert(p.group);
  return {g.begin(), g.end()};
}

Center parse_center(const std::string& text) {
  if (text == "mean") return Center::Mean;
  if (text == "median") return Center::Median;
  throw InvalidInput("unknown center '" + text + "' (mean, median)");
}

namespace {

std::vector<const LabeledPoint*> members(const LabeledPointSet& set, int group) {
  std::vector<const LabeledPoint*> out;
  for (const auto& p : set.points)
    if (p.group == group) out.push_back(&p);
  if (out.empty()) throw InvalidInput("unknown or empty group " + std::to_string(group));
  return out;
}

}  // namespace

Vec group_center(const LabeledPointSet& set, int group, Center center) {
  const auto pts = members(set, group);
  const std::size_t d = pts.front()->vector.size();
  Vec c(d, 0.0);
  if (center == Center::Mean) {
    for (const auto* p : pts) axpy(1.0, p->vector, c);
    for (double& x : c) x /= static_cast<double>(pts.size());
    return c;
  }
  std::vector<double> col(pts.size());
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < pts.size(); ++i) col[i] = pts[i]->vector[k];
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    c[k] = n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return c;
}

double acld(const LabeledPointSet& set, int a, int b, Center center) {
  return distance(set.metric, group_center(set, a, center), group_center(set, b, center));
}

double ald(const LabeledPointSet& set, int a, int b) {
  const auto pa = members(set, a);
  const auto pb = members(set, b);
  double sum = 0.0;
  for (const auto* x : pa)
    for (const auto* y : pb) sum += distance(set.metric, x->vector, y->vector);
  return sum / (static_cast<double>(pa.size()) * static_cast<double>(pb.size()));
}

double silhouette(const LabeledPointSet& set) {
  const auto groups = set.groups();
  if (groups.size() < 2) throw InvalidInput("silhouette needs at least two groups");
  const std::size_t n = set.points.size();
  std::map<int, std::size_t> slot;
  for (std::size_t g = 0; g < groups.size(); ++g) slot[groups[g]] = g;
  std::vector<std::size_t> size(groups.size(), 0);
  for (const auto& p : set.points) ++size[slot[p.group]];

  double total = 0.0;
  std::vector<double> sums(groups.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = slot[set.points[i].group];
    if (size[own] < 2) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[slot[set.points[j].group]] += distance(set.metric, set.points[i].vector, set.points[j].vector);
    }
    const double p = sums[own] / static_cast<double>(size[own] - 1);
    double q = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (g != own) q = std::min(q, sums[g] / static_cast<double>(size[g]));
    const double m = std::max(p, q);
    if (m > 0.0) total += (q - p) / m;
  }
  return total / static_cast<double>(n);
}

double relative_explicit_distance(std::span<const double> point, const Matrix& nonhate_centers,
                                  const Matrix& explicit_centers) {
  if (nonhate_centers.rows() == 0 || explicit_centers.rows() == 0)
    throw InvalidInput("relative_explicit_distance: center sets must be non-empty");
  auto mean_l1 = [&](const Matrix& centers) {
    double s = 0.0;
    for (std::size_t k = 0; k < centers.rows(); ++k) s += distance(Metric::L1, point, centers.row(k));
    return s / static_cast<double>(centers.rows());
  };
  const double d_exp = mean_l1(explicit_centers);
  const double d_non = mean_l1(nonhate_centers);
  const double sum = d_exp + d_non;
  return sum > 0.0 ? d_exp / sum : 0.5;
}

std::vector<double> relative_explicit_distance(const Matrix& points, const Matrix& nonhate_centers,
                                               const Matrix& explicit_centers) {
  std::vector<double> out;
  out.reserve(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i)
    out.push_back(relative_explicit_distance(points.row(i), nonhate_centers, explicit_centers));
  return out;
}

void Taxonomy::check(int num_classes) const {
  for (int c : {non_hate, explicit_hate, implicit_hate})
    if (c < 0 || c >= num_classes)
      throw InvalidInput("taxonomy class id " + std::to_string(c) + " outside the dataset's " +
                         std::to_string(num_classes) + " classes");
  if (non_hate == explicit_hate || non_hate == implicit_hate || explicit_hate == implicit_hate)
    throw InvalidInput("taxonomy class ids must be distinct");
}

LabeledPointSet class_point_set(const Dataset& ds, Metric metric, const ProjectionHead* head) {
  LabeledPointSet set;
  set.metric = metric;
  for (const auto& s : ds.samples)
    set.points.push_back({s.id, head ? project(*head, s.vector) : s.vector, s.label});
  return set;
}

std::vector<std::string> MotivationReport::columns() { return {"ALD N-E", "ALD N-I", "ACLD N-E", "ACLD N-I"}; }

std::vector<double> MotivationReport::values() const { return {ald_ne, ald_ni, acld_ne, acld_ni}; }

MotivationReport motivation_report(const Dataset& ds, const Taxonomy& tax, const ProjectionHead* head, Center center,
                                   Metric metric) {
  tax.check(ds.num_classes());
  const auto counts = ds.class_counts();
  for (int c : {tax.non_hate, tax.explicit_hate, tax.implicit_hate})
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw InvalidInput("motivation report: class " + ds.class_names[static_cast<std::size_t>(c)] + " has no samples");
  const LabeledPointSet set = class_point_set(ds, metric, head);
  MotivationReport r;
  r.ald_ne = ald(set, tax.non_hate, tax.explicit_hate);
  r.ald_ni = ald(set, tax.non_hate, tax.implicit_hate);
  r.acld_ne = acld(set, tax.non_hate, tax.explicit_hate, center);
  r.acld_ni = acld(set, tax.non_hate, tax.implicit_hate, center);
  return r;
}

std::optional<double> implied_silhouette(const Dataset& ds, const ProjectionHead& head, Metric metric) {
  LabeledPointSet set;
  set.metric = metric;
  for (const auto& s : ds.samples) {
    if (!s.implied) continue;
    set.points.push_back({s.id, project(head, s.vector), 0});
    set.points.push_back({s.id, project(head, *s.implied), 1});
  }
  if (set.points.empty()) return std::nullopt;
  return silhouette(set);
}

int subcluster_of(const ClusterIndex& index, const std::string& id, int label, std::span<const double> r) {
  if (auto ref = index.assignment_of(id); ref && ref->cls == label) return ref->sub;
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& c : index.clusters) {
    if (c.ref.cls != label) continue;
    const double d = squared_l2(r, c.centroid);
    if (d < best_d) {
      best_d = d;
      best = c.ref.sub;
    }
  }
  return best;
}

std::vector<std::optional<double>> subcluster_silhouettes(const Dataset& ds, const Model& model, Metric metric) {
  std::vector<LabeledPointSet> per_class(static_cast<std::size_t>(ds.num_classes()));
  for (auto& s : per_class) s.metric = metric;
  for (const auto& s : ds.samples) {
    Vec r = project(model.params.projection, s.vector);
    const int sub = subcluster_of(model.index, s.id, s.label, r);
    per_class[static_cast<std::size_t>(s.label)].points.push_back({s.id, std::move(r), sub});
  }
  std::vector<std::optional<double>> out;
  for (const auto& set : per_class) {
    if (set.groups().size() < 2) out.emplace_back();
    else out.emplace_back(silhouette(set));
  }
  return out;
}

ErrorAnalysis error_analysis(const Dataset& ds, const ProjectionHead& head, const Taxonomy& tax, int K,
                             std::uint64_t seed, int max_iter) {
  tax.check(ds.num_classes());
  Matrix non, exp, imp;
  ErrorAnalysis out;
  for (const auto& s : ds.samples) {
    const Vec r = project(head, s.vector);
    if (s.label == tax.non_hate) non.append_row(r);
    else if (s.label == tax.explicit_hate) exp.append_row(r);
    else if (s.label == tax.implicit_hate) {
      imp.append_row(r);
      out.ids.push_back(s.id);
    }
  }
  if (non.rows() == 0 || exp.rows() == 0)
    throw InvalidInput("error analysis needs non-hate and explicit samples");
  const Matrix non_centers = kmeans(non, K, max_iter, mix_seed(seed, static_cast<std::uint64_t>(tax.non_hate))).centroids;
  const Matrix exp_centers =
      kmeans(exp, K, max_iter, mix_seed(seed, static_cast<std::uint64_t>(tax.explicit_hate))).centroids;
  out.scores = relative_explicit_distance(imp, non_centers, exp_centers);
  if (!out.scores.empty()) {
    std::size_t closer = 0;
    for (double s : out.scores) {
      out.mean += s;
      closer += s < 0.5;
    }
    out.mean /= static_cast<double>(out.scores.size());
    out.closer_to_explicit = static_cast<double>(closer) / static_cast<double>(out.scores.size());
  }
  return out;
}

std::vector<LatentRecord> latent_records(const Model& model, const Dataset& ds) {
  if (ds.d_in != model.params.projection.d_in()) throw InvalidInput("latent dump: dataset/model dimension mismatch");
  std::vector<LatentRecord> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) {
    LatentRecord rec;
    rec.id = s.id;
    rec.label = s.label;
    rec.r = project(model.params.projection, s.vector);
    rec.subcluster = subcluster_of(model.index, s.id, s.label, rec.r);
    if (s.implied) rec.r_implied = project(model.params.projection, *s.implied);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_latent(std::ostream& out, const std::vector<LatentRecord>& records) {
  for (const auto& rec : records) {
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["label"] = rec.label;
    j["subcluster"] = rec.subcluster;
    j["r"] = rec.r;
    if (rec.r_implied) j["r_implied"] = *rec.r_implied;
    out << j.dump() << '\n';
  }
}

std::vector<LatentRecord> read_latent(std::istream& in) {
  std::vector<LatentRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LatentRecord rec;
      rec.id = j.at("id").get<std::string>();
      rec.label = j.at("label").get<int>();
      rec.subcluster = j.at("subcluster").get<int>();
      rec.r = j.at("r").get<Vec>();
      if (j.contains("r_implied")) rec.r_implied = j.at("r_implied").get<Vec>();
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput("latent line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace fiadd
