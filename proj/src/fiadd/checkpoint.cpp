#include "fiadd/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fiadd/error.hpp"

namespace fiadd {

using ordered_json = nlohmann::ordered_json;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "fiadd-checkpoint";
constexpr int kVersion = 1;

ordered_json array_line(const std::string& name, std::size_t rows, std::size_t cols, const std::vector<double>& data) {
  ordered_json j;
  j["name"] = name;
  j["shape"] = {rows, cols};
  j["data"] = data;
  return j;
}

void write_params(std::ostream& out, const std::string& prefix, const Params& p) {
  const auto& W = p.projection.weight;
  const auto& V = p.classifier.weight;
  out << array_line(prefix + ".projection.weight", W.rows(), W.cols(), W.data()).dump() << '\n';
  out << array_line(prefix + ".projection.bias", 1, p.projection.bias.size(), p.projection.bias).dump() << '\n';
  out << array_line(prefix + ".classifier.weight", V.rows(), V.cols(), V.data()).dump() << '\n';
  out << array_line(prefix + ".classifier.bias", 1, p.classifier.bias.size(), p.classifier.bias).dump() << '\n';
}

ordered_json index_json(const std::string& name, const ClusterIndex& index) {
  ordered_json j;
  j["name"] = name;
  j["generation"] = index.generation;
  ordered_json clusters = ordered_json::array();
  for (const auto& c : index.clusters) {
    ordered_json cj;
    cj["class"] = c.ref.cls;
    cj["sub"] = c.ref.sub;
    cj["centroid"] = c.centroid;
    cj["members"] = c.members;
    clusters.push_back(std::move(cj));
  }
  j["clusters"] = std::move(clusters);
  j["ids"] = index.ids;
  return j;
}

ClusterIndex index_from(const json& j) {
  ClusterIndex index;
  index.generation = j.at("generation").get<std::uint64_t>();
  index.ids = j.at("ids").get<std::vector<std::string>>();
  index.assignment.assign(index.ids.size(), 0);
  for (const auto& cj : j.at("clusters")) {
    Subcluster c;
    c.ref = {cj.at("class").get<int>(), cj.at("sub").get<int>()};
    c.centroid = cj.at("centroid").get<Vec>();
    c.members = cj.at("members").get<std::vector<std::size_t>>();
    for (std::size_t m : c.members) {
      if (m >= index.assignment.size()) throw InvalidInput("checkpoint: cluster member out of range");
      index.assignment[m] = index.clusters.size();
    }
    index.clusters.push_back(std::move(c));
  }
  return index;
}

struct Array {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
};

Matrix to_matrix(const Array& a) {
  Matrix m(a.rows, a.cols);
  m.data() = a.data;
  return m;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TrainedModel& model) {
  const auto& p = model.final_model.params;
  ordered_json h;
  h["format"] = kFormat;
  h["version"] = kVersion;
  h["d_in"] = model.d_in;
  h["d_proj"] = p.projection.d_proj();
  h["num_classes"] = p.classifier.num_classes();
  h["activation"] = to_string(p.projection.activation);
  h["class_names"] = model.class_names;
  h["implicit_labels"] = model.implicit_labels;
  h["minority_class"] = model.minority_class;
  h["best_epoch"] = model.best_epoch;
  h["best_macro_f1"] = model.best_macro_f1;
  h["highest_minority_f1"] = model.highest_minority_f1;
  h["highest_minority_epoch"] = model.highest_minority_epoch;
  h["diverged"] = model.diverged;
  ordered_json cfg;
  for (const auto& [k, v] : describe(model.config)) cfg[k] = v;
  h["config"] = std::move(cfg);
  out << h.dump() << '\n';
  write_params(out, "final", model.final_model.params);
  write_params(out, "best", model.best.params);
  out << index_json("final.index", model.final_model.index).dump() << '\n';
  out << index_json("best.index", model.best.index).dump() << '\n';
}

void save_checkpoint(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  write_checkpoint(out, model);
  if (!out) throw IoError("error writing checkpoint " + path);
}

TrainedModel read_checkpoint(std::istream& in) {
  TrainedModel m;
  std::map<std::string, Array> arrays;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false, have_final_index = false, have_best_index = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != kFormat) throw InvalidInput("not a checkpoint file");
        if (j.at("version").get<int>() != kVersion)
          throw InvalidInput("unsupported checkpoint version " + j.at("version").dump());
        m.d_in = j.at("d_in").get<std::size_t>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        m.implicit_labels = j.at("implicit_labels").get<std::set<int>>();
        m.minority_class = j.at("minority_class").get<int>();
        m.best_epoch = j.at("best_epoch").get<int>();
        m.best_macro_f1 = j.at("best_macro_f1").get<double>();
        m.highest_minority_f1 = j.at("highest_minority_f1").get<double>();
        m.highest_minority_epoch = j.at("highest_minority_epoch").get<int>();
        m.diverged = j.at("diverged").get<bool>();
        Config cfg;
        for (const auto& [k, v] : j.at("config").items()) cfg.set(k, v.get<std::string>());
        m.config = train_config_from(cfg);
        have_header = true;
        continue;
      }
      const std::string name = j.at("name").get<std::string>();
      if (name == "final.index") {
        m.final_model.index = index_from(j);
        have_final_index = true;
      } else if (name == "best.index") {
        m.best.index = index_from(j);
        have_best_index = true;
      } else {
        Array a;
        a.rows = j.at("shape").at(0).get<std::size_t>();
        a.cols = j.at("shape").at(1).get<std::size_t>();
        a.data = j.at("data").get<std::vector<double>>();
        if (a.data.size() != a.rows * a.cols) throw InvalidInput("array " + name + " does not match its shape");
        arrays[name] = std::move(a);
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput("checkpoint line " + std::to_string(line_no) + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw InvalidInput("checkpoint line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw InvalidInput("empty checkpoint");
  if (!have_final_index || !have_best_index) throw InvalidInput("checkpoint is truncated: cluster index missing");

  auto take = [&](const std::string& name) -> Array& {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw InvalidInput("checkpoint lacks array " + name);
    return it->second;
  };
  auto params = [&](const std::string& prefix) {
    Params p;
    p.projection.weight = to_matrix(take(prefix + ".projection.weight"));
    p.projection.bias = take(prefix + ".projection.bias").data;
    p.projection.activation = m.config.activation;
    p.classifier.weight = to_matrix(take(prefix + ".classifier.weight"));
    p.classifier.bias = take(prefix + ".classifier.bias").data;
    if (p.projection.d_in() != m.d_in || p.projection.bias.size() != p.projection.d_proj() ||
        p.classifier.weight.cols() != p.projection.d_proj() ||
        p.classifier.num_classes() != m.class_names.size() || p.classifier.bias.size() != m.class_names.size())
      throw InvalidInput("checkpoint arrays have inconsistent shapes");
    return p;
  };
  m.final_model.params = params("final");
  m.best.params = params("best");
  return m;
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  try {
    return read_checkpoint(in);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

void write_history(std::ostream& out, const TrainedModel& model) {
  for (const auto& h : model.history) {
    ordered_json j;
    j["epoch"] = h.epoch;
    ordered_json f1;
    for (std::size_t c = 0; c < h.class_f1.size(); ++c) f1[model.class_names[c]] = h.class_f1[c];
    j["class_f1"] = std::move(f1);
    j["macro_f1"] = h.macro_f1;
    j["ce_loss"] = h.ce_loss;
    j["add_loss"] = h.add_loss;
    out << j.dump() << '\n';
  }
}

void write_index(std::ostream& out, const ClusterIndex& index) {
  for (const auto& c : index.clusters) {
    ordered_json j;
    j["class"] = c.ref.cls;
    j["sub"] = c.ref.sub;
    j["size"] = c.members.size();
    j["loss_stat"] = c.loss_stat;
    j["centroid"] = c.centroid;
    out << j.dump() << '\n';
  }
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    const auto& ref = index.clusters[index.assignment[i]].ref;
    ordered_json j;
    j["id"] = index.ids[i];
    j["class"] = ref.cls;
    j["sub"] = ref.sub;
    out << j.dump() << '\n';
  }
}

}  // namespace fiadd
