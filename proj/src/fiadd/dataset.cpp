#include "fiadd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "fiadd/error.hpp"
#include "fiadd/rng.hpp"

namespace fiadd {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& s : samples)
    if (s.label >= 0 && s.label < num_classes()) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

Dataset Dataset::empty_like() const {
  Dataset out;
  out.d_in = d_in;
  out.class_names = class_names;
  out.implicit_labels = implicit_labels;
  return out;
}

namespace {

constexpr std::size_t kHeaderIndex = std::numeric_limits<std::size_t>::max();

std::string line_error(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

Vec read_vector(const json& j, const char* field, std::size_t line_no) {
  const auto& arr = j.at(field);
  if (!arr.is_array()) throw InvalidInput(line_error(line_no, std::string(field) + " must be an array"));
  Vec v;
  v.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number())
      throw InvalidInput(line_error(line_no, std::string(field) + " must contain only numbers"));
    v.push_back(x.get<double>());
  }
  return v;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

Dataset read_dataset(std::istream& in, std::vector<std::size_t>* record_lines) {
  Dataset ds;
  if (record_lines) record_lines->clear();
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InvalidInput(line_error(line_no, std::string("malformed record: ") + e.what()));
    }
    if (!j.is_object()) throw InvalidInput(line_error(line_no, "record must be an object"));
    try {
      if (!have_header) {
        const auto d = j.at("d_in");
        if (!d.is_number_integer() || d.get<std::int64_t>() <= 0)
          throw InvalidInput(line_error(line_no, "header d_in must be a positive integer"));
        ds.d_in = d.get<std::size_t>();
        ds.class_names = j.at("class_names").get<std::vector<std::string>>();
        for (int label : j.value("implicit_labels", std::vector<int>{})) ds.implicit_labels.insert(label);
        have_header = true;
        continue;
      }
      EmbeddedSample s;
      s.id = j.at("id").get<std::string>();
      const auto& label = j.at("label");
      if (!label.is_number_integer()) throw InvalidInput(line_error(line_no, "label must be an integer"));
      s.label = label.get<int>();
      s.vector = read_vector(j, "vector", line_no);
      if (j.contains("implied_vector") && !j.at("implied_vector").is_null())
        s.implied = read_vector(j, "implied_vector", line_no);
      ds.samples.push_back(std::move(s));
      if (record_lines) record_lines->push_back(line_no);
    } catch (const json::exception& e) {
      throw InvalidInput(line_error(line_no, std::string("malformed record: ") + e.what()));
    }
  }
  if (!have_header || ds.samples.empty()) throw InvalidInput("empty dataset");
  return ds;
}

std::vector<Violation> validate(const Dataset& ds, std::optional<std::size_t> expected_dim) {
  std::vector<Violation> out;
  auto header = [&](std::string kind, std::string msg) {
    out.push_back({kHeaderIndex, "", std::move(kind), std::move(msg)});
  };
  if (ds.d_in == 0) header("header", "d_in must be positive");
  if (expected_dim && ds.d_in != *expected_dim)
    header("dimension", "dataset d_in " + std::to_string(ds.d_in) + " does not match expected " +
                            std::to_string(*expected_dim));
  if (ds.class_names.empty()) header("header", "class_names is empty");
  for (int label : ds.implicit_labels)
    if (label < 0 || label >= ds.num_classes())
      header("header", "implicit label " + std::to_string(label) + " is not a declared class");

  const std::size_t want = expected_dim.value_or(ds.d_in);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    auto add = [&](std::string kind, std::string msg) {
      out.push_back({i, s.id, std::move(kind), std::move(msg)});
    };
    if (!seen.insert(s.id).second) add("duplicate-id", "duplicate id '" + s.id + "'");
    if (s.label < 0 || s.label >= ds.num_classes())
      add("label-range", "label " + std::to_string(s.label) + " outside [0, " +
                             std::to_string(ds.num_classes()) + ")");
    if (s.vector.size() != want)
      add("dimension", "vector has dimension " + std::to_string(s.vector.size()) + ", expected " +
                           std::to_string(want));
    if (s.implied) {
      if (s.implied->size() != s.vector.size())
        add("implied-dimension", "implied_vector has dimension " + std::to_string(s.implied->size()) +
                                     ", vector has " + std::to_string(s.vector.size()));
      if (!ds.is_implicit(s.label))
        add("implied-on-non-implicit",
            "implied_vector on sample with non-implicit label " + std::to_string(s.label));
    }
    auto finite = [](const Vec& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(s.vector) || (s.implied && !finite(*s.implied))) add("non-finite", "non-finite coordinate");
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::vector<std::size_t> lines;
  Dataset ds = read_dataset(in, &lines);
  const auto violations = validate(ds, expected_dim);
  if (!violations.empty()) {
    const auto& v = violations.front();
    const std::size_t line = v.index == kHeaderIndex ? 1 : lines[v.index];
    throw InvalidInput(path.string() + ": " + line_error(line, v.message));
  }
  return ds;
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  ordered_json header;
  header["d_in"] = ds.d_in;
  header["class_names"] = ds.class_names;
  header["implicit_labels"] = std::vector<int>(ds.implicit_labels.begin(), ds.implicit_labels.end());
  out << header.dump() << '\n';
  for (const auto& s : ds.samples) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["label"] = s.label;
    rec["vector"] = s.vector;
    if (s.implied) rec["implied_vector"] = *s.implied;
    out << rec.dump() << '\n';
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  write_dataset(ds, out);
  if (!out) throw IoError("write failed for " + path.string());
}

SplitPair split(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidInput("split ratio must lie in (0, 1)");
  if (ds.size() < 2) throw InvalidInput("split needs at least two samples");

  SplitPair out;
  out.seed = seed;
  out.ratio = ratio;
  const int C = ds.num_classes();
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(C));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int label = ds.samples[i].label;
    if (label < 0 || label >= C) throw InvalidInput("split: sample '" + ds.samples[i].id + "' has invalid label");
    members[static_cast<std::size_t>(label)].push_back(i);
  }

  // Per-class train counts: floor of the exact share, clamped so both sides
  // are non-empty, then largest-remainder correction toward round(ratio*N).
  std::vector<std::int64_t> take(members.size(), 0);
  std::vector<double> exact(members.size(), 0.0);
  std::int64_t fixed = 0;
  std::int64_t assigned = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto n = static_cast<std::int64_t>(members[c].size());
    if (n == 0) continue;
    if (n < 2) {
      take[c] = n;
      fixed += n;
      out.warnings.push_back("class " + std::to_string(c) + " (" + ds.class_names[c] + ") has " +
                             std::to_string(n) + " sample; placed wholly in train");
      continue;
    }
    exact[c] = ratio * static_cast<double>(n);
    take[c] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(exact[c])), 1, n - 1);
    assigned += take[c];
  }
  const std::int64_t target = std::llround(ratio * static_cast<double>(ds.size())) - fixed;
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < members.size(); ++c)
    if (members[c].size() >= 2) order.push_back(c);
  auto frac = [&](std::size_t c) { return exact[c] - std::floor(exact[c]); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac(a) > frac(b); });
  for (std::size_t c : order) {
    if (assigned >= target) break;
    const auto n = static_cast<std::int64_t>(members[c].size());
    if (take[c] + 1 <= n - 1 && static_cast<double>(take[c] + 1) <= exact[c] + 1.0) {
      ++take[c];
      ++assigned;
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (assigned <= target) break;
    const std::size_t c = *it;
    if (take[c] - 1 >= 1 && static_cast<double>(take[c] - 1) >= exact[c] - 1.0) {
      --take[c];
      --assigned;
    }
  }

  Rng rng(mix_seed(seed, 0x5b1175eedULL));
  std::vector<char> in_train(ds.size(), 0);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto shuffled = members[c];
    rng.shuffle(shuffled);
    for (std::int64_t k = 0; k < take[c]; ++k) in_train[shuffled[static_cast<std::size_t>(k)]] = 1;
  }

  out.train = ds.empty_like();
  out.test = ds.empty_like();
  for (std::size_t i = 0; i < ds.size(); ++i)
    (in_train[i] ? out.train : out.test).samples.push_back(ds.samples[i]);
  return out;
}

SyntheticSpec default_synthetic_spec() {
  SyntheticSpec spec;
  spec.classes = {
      {"N-Hate", 50, {0.0, 0.0}, {1.0, 1.0}},
      {"EXP", 50, {8.0, 0.0}, {1.0, 1.0}},
      {"IMP", 50, {2.0, 0.0}, {1.0, 1.0}},
  };
  spec.implicit_class = 2;
  spec.implied_mean = {7.0, 1.0};
  spec.implied_cov = {1.0, 1.0};
  return spec;
}

SyntheticSpec synthetic_spec_from(const Config& cfg) {
  const SyntheticSpec defaults = default_synthetic_spec();
  std::map<std::string, SyntheticClass> known;
  for (const auto& c : defaults.classes) known[c.name] = c;

  SyntheticSpec spec;
  std::vector<std::string> names;
  for (const auto& c : defaults.classes) names.push_back(c.name);
  names = cfg.get_strings("synth.classes", names);
  if (names.empty()) throw InvalidInput("synth.classes is empty");

  const bool global_count = cfg.has("synth.count");
  const std::int64_t count_all = cfg.get_int("synth.count", 0);
  for (const auto& name : names) {
    SyntheticClass c;
    c.name = name;
    auto it = known.find(name);
    if (it != known.end()) c = it->second;
    else c.count = 50;
    const std::string prefix = "synth." + name + ".";
    if (global_count) c.count = count_all;
    c.count = cfg.get_int(prefix + "count", c.count);
    c.mean = cfg.get_doubles(prefix + "mean", c.mean);
    if (c.mean.empty()) throw InvalidInput(prefix + "mean is required for class '" + name + "'");
    if (c.cov.empty()) c.cov.assign(c.mean.size(), 1.0);
    c.cov = cfg.get_doubles(prefix + "cov", c.cov);
    spec.classes.push_back(std::move(c));
  }

  const std::string default_implicit =
      defaults.implicit_class >= 0 ? defaults.classes[static_cast<std::size_t>(defaults.implicit_class)].name : "";
  const std::string implicit = cfg.get_string("synth.implicit", default_implicit);
  spec.implicit_class = -1;
  for (std::size_t i = 0; i < spec.classes.size(); ++i)
    if (spec.classes[i].name == implicit) spec.implicit_class = static_cast<int>(i);
  if (!implicit.empty() && implicit != "none" && spec.implicit_class < 0)
    throw InvalidInput("synth.implicit names unknown class '" + implicit + "'");

  spec.implied_mean = cfg.get_doubles("synth.implied_mean", defaults.implied_mean);
  spec.implied_cov = cfg.get_doubles("synth.implied_cov", defaults.implied_cov);
  const auto noise = cfg.get_int("synth.noise_dims", static_cast<std::int64_t>(defaults.noise_dims));
  if (noise < 0) throw InvalidInput("synth.noise_dims must be non-negative");
  spec.noise_dims = static_cast<std::size_t>(noise);
  spec.noise_scale = cfg.get_double("synth.noise_scale", defaults.noise_scale);
  return spec;
}

namespace {

// Lower-triangular factor L with L L^T = cov. Semi-definite input is allowed
// (zero pivots give zero columns); negative pivots beyond round-off reject.
Matrix cholesky_factor(const std::vector<double>& cov, std::size_t d, const std::string& what) {
  Matrix full(d, d);
  if (cov.size() == d) {
    for (std::size_t i = 0; i < d; ++i) full(i, i) = cov[i];
  } else if (cov.size() == d * d) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) full(i, j) = cov[i * d + j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(full(i, j) - full(j, i)) > 1e-12 * (1.0 + std::abs(full(i, j))))
          throw InvalidInput(what + " covariance is not symmetric");
  } else {
    throw InvalidInput(what + " covariance needs " + std::to_string(d) + " (diagonal) or " +
                       std::to_string(d * d) + " (full) entries, got " + std::to_string(cov.size()));
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(full(i, i)));
  const double tol = 1e-12 * std::max(scale, 1.0);

  Matrix L(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    double pivot = full(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
    if (pivot < -tol) throw InvalidInput(what + " covariance is not positive semi-definite");
    if (pivot <= tol) {
      for (std::size_t i = j + 1; i < d; ++i) {
        double off = full(i, j);
        for (std::size_t k = 0; k < j; ++k) off -= L(i, k) * L(j, k);
        if (std::abs(off) > 1e-9 * std::max(scale, 1.0))
          throw InvalidInput(what + " covariance is not positive semi-definite");
      }
      continue;
    }
    const double root = std::sqrt(pivot);
    L(j, j) = root;
    for (std::size_t i = j + 1; i < d; ++i) {
      double off = full(i, j);
      for (std::size_t k = 0; k < j; ++k) off -= L(i, k) * L(j, k);
      L(i, j) = off / root;
    }
  }
  return L;
}

Vec draw(const Vec& mean, const Matrix& L, std::size_t noise_dims, double noise_scale, Rng& rng) {
  const std::size_t d = mean.size();
  Vec z(d);
  for (auto& x : z) x = rng.normal();
  Vec out(mean);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k <= i; ++k) out[i] += L(i, k) * z[k];
  for (std::size_t k = 0; k < noise_dims; ++k) out.push_back(noise_scale * rng.normal());
  return out;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.classes.empty()) throw InvalidInput("synthetic spec declares no classes");
  const std::size_t d = spec.classes.front().mean.size();
  if (d == 0) throw InvalidInput("synthetic class means must be non-empty");
  if (!(spec.noise_scale >= 0.0)) throw InvalidInput("synth.noise_scale must be non-negative");

  std::vector<Matrix> factors;
  for (const auto& c : spec.classes) {
    if (c.count <= 0)
      throw InvalidInput("class '" + c.name + "' count must be positive, got " + std::to_string(c.count));
    if (c.mean.size() != d)
      throw InvalidInput("class '" + c.name + "' mean has dimension " + std::to_string(c.mean.size()) +
                         ", expected " + std::to_string(d));
    factors.push_back(cholesky_factor(c.cov, d, "class '" + c.name + "'"));
  }
  Matrix implied_factor;
  if (spec.implicit_class >= 0) {
    if (static_cast<std::size_t>(spec.implicit_class) >= spec.classes.size())
      throw InvalidInput("implicit class index out of range");
    if (spec.implied_mean.size() != d)
      throw InvalidInput("implied_mean has dimension " + std::to_string(spec.implied_mean.size()) +
                         ", expected " + std::to_string(d));
    implied_factor = cholesky_factor(spec.implied_cov, d, "implied");
  }

  Dataset ds;
  ds.d_in = d + spec.noise_dims;
  for (const auto& c : spec.classes) ds.class_names.push_back(c.name);
  if (spec.implicit_class >= 0) ds.implicit_labels.insert(spec.implicit_class);

  Rng rng(mix_seed(seed, 0x5e7e71c0ULL));
  for (std::size_t label = 0; label < spec.classes.size(); ++label) {
    const auto& c = spec.classes[label];
    const bool implicit = static_cast<int>(label) == spec.implicit_class;
    for (std::int64_t k = 0; k < c.count; ++k) {
      EmbeddedSample s;
      std::ostringstream id;
      id << 'c' << label << '-' << std::setw(4) << std::setfill('0') << k;
      s.id = id.str();
      s.label = static_cast<int>(label);
      s.vector = draw(c.mean, factors[label], spec.noise_dims, spec.noise_scale, rng);
      if (implicit) s.implied = draw(spec.implied_mean, implied_factor, spec.noise_dims, spec.noise_scale, rng);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace fiadd
