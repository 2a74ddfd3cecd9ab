#include "fiadd/fiadd.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fiadd/analysis.hpp"
#include "fiadd/checkpoint.hpp"
#include "fiadd/config.hpp"
#include "fiadd/dataset.hpp"
#include "fiadd/error.hpp"
#include "fiadd/gradcheck.hpp"
#include "fiadd/model.hpp"

struct fiadd_config {
  fiadd::Config cfg;
};

struct fiadd_dataset {
  fiadd::Dataset ds;
};

struct fiadd_model {
  fiadd::TrainedModel m;
};

using ordered_json = nlohmann::ordered_json;

namespace {

thread_local std::string g_last_error;

fiadd_status fail(fiadd_status code, const std::string& what) {
  g_last_error = what;
  return code;
}

// Runs f, translating exceptions into status codes.
template <class F>
fiadd_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const fiadd::InvalidInput& e) {
    return fail(FIADD_ERR_INVALID, e.what());
  } catch (const fiadd::IoError& e) {
    return fail(FIADD_ERR_IO, e.what());
  } catch (const fiadd::Diverged& e) {
    return fail(FIADD_ERR_DIVERGED, e.what());
  } catch (const std::bad_alloc&) {
    return fail(FIADD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FIADD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FIADD_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw fiadd::InvalidInput(what);
}

ordered_json metrics_json(const fiadd::Metrics& m) {
  ordered_json j;
  j["n"] = m.n;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  ordered_json classes = ordered_json::array();
  for (const auto& c : m.classes) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["precision"] = c.precision;
    cj["recall"] = c.recall;
    cj["f1"] = c.f1;
    cj["support"] = c.support;
    cj["absent"] = c.absent;
    classes.push_back(std::move(cj));
  }
  j["classes"] = std::move(classes);
  return j;
}

bool use_best_weights(const fiadd::Config& cfg, const char* key) {
  const std::string w = cfg.get_string(key, "best");
  if (w == "best") return true;
  if (w == "final") return false;
  throw fiadd::InvalidInput(std::string(key) + " must be 'best' or 'final', got '" + w + "'");
}

int class_id(const std::string& token, const std::vector<std::string>& names) {
  for (std::size_t c = 0; c < names.size(); ++c)
    if (names[c] == token) return static_cast<int>(c);
  return static_cast<int>(fiadd::parse_int(token, "analyze.taxonomy"));
}

fiadd::Taxonomy taxonomy_from(const fiadd::Config& cfg, const fiadd::Dataset& ds) {
  fiadd::Taxonomy tax;
  if (auto v = cfg.find("analyze.taxonomy")) {
    const auto parts = fiadd::split_list(*v);
    if (parts.size() != 3)
      throw fiadd::InvalidInput("analyze.taxonomy needs three classes: non-hate, explicit, implicit");
    tax.non_hate = class_id(parts[0], ds.class_names);
    tax.explicit_hate = class_id(parts[1], ds.class_names);
    tax.implicit_hate = class_id(parts[2], ds.class_names);
  }
  tax.check(ds.num_classes());
  return tax;
}

ordered_json motivation_json(const fiadd::MotivationReport& r, const std::string& source) {
  ordered_json j;
  j["source"] = source;
  j["columns"] = fiadd::MotivationReport::columns();
  j["values"] = r.values();
  return j;
}

void check_model_data(const fiadd::TrainedModel& m, const fiadd::Dataset& ds) {
  if (ds.d_in != m.d_in)
    throw fiadd::InvalidInput("dimension mismatch: checkpoint expects d_in=" + std::to_string(m.d_in) +
                              ", dataset has d_in=" + std::to_string(ds.d_in));
  if (ds.class_names.size() != m.class_names.size())
    throw fiadd::InvalidInput("class mismatch: checkpoint has " + std::to_string(m.class_names.size()) +
                              " classes, dataset declares " + std::to_string(ds.class_names.size()));
}

}  // namespace

extern "C" {

const char* fiadd_version(void) { return "1.0.0"; }

const char* fiadd_last_error(void) { return g_last_error.c_str(); }

void fiadd_free_string(char* s) { std::free(s); }

fiadd_status fiadd_config_create(fiadd_config** out) {
  return guarded([&] {
    require(out, "out is null");
    *out = new fiadd_config{};
    return FIADD_OK;
  });
}

fiadd_status fiadd_config_load(const char* path, fiadd_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new fiadd_config{fiadd::Config::load(path)};
    return FIADD_OK;
  });
}

fiadd_status fiadd_config_parse(const char* text, fiadd_config** out) {
  return guarded([&] {
    require(text && out, "null argument");
    *out = new fiadd_config{fiadd::Config::parse(text)};
    return FIADD_OK;
  });
}

fiadd_status fiadd_config_set(fiadd_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "null argument");
    require(*key != '\0', "empty config key");
    cfg->cfg.set(key, value);
    return FIADD_OK;
  });
}

fiadd_status fiadd_config_get(const fiadd_config* cfg, const char* key, char** out_value) {
  return guarded([&] {
    require(cfg && key && out_value, "null argument");
    auto v = cfg->cfg.find(key);
    *out_value = v ? dup_string(*v) : nullptr;
    return FIADD_OK;
  });
}

fiadd_status fiadd_config_clone(const fiadd_config* cfg, fiadd_config** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = new fiadd_config{cfg->cfg};
    return FIADD_OK;
  });
}

void fiadd_config_destroy(fiadd_config* cfg) { delete cfg; }

fiadd_status fiadd_dataset_load(const char* path, size_t expected_dim, fiadd_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    std::optional<std::size_t> dim;
    if (expected_dim) dim = expected_dim;
    *out = new fiadd_dataset{fiadd::load_dataset(path, dim)};
    return FIADD_OK;
  });
}

fiadd_status fiadd_dataset_save(const fiadd_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds && path, "null argument");
    fiadd::save_dataset(ds->ds, path);
    return FIADD_OK;
  });
}

fiadd_status fiadd_dataset_synthesize(const fiadd_config* cfg, uint64_t seed, fiadd_dataset** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = new fiadd_dataset{fiadd::generate_synthetic(fiadd::synthetic_spec_from(cfg->cfg), seed)};
    return FIADD_OK;
  });
}

fiadd_status fiadd_dataset_validate_file(const char* path, size_t expected_dim, char** report, size_t* violations) {
  return guarded([&] {
    require(path && report && violations, "null argument");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fiadd::IoError(std::string("cannot open dataset ") + path);
    std::ostringstream out;
    std::size_t count = 0;
    try {
      std::vector<std::size_t> lines;
      const fiadd::Dataset ds = fiadd::read_dataset(in, &lines);
      std::optional<std::size_t> dim;
      if (expected_dim) dim = expected_dim;
      for (const auto& v : fiadd::validate(ds, dim)) {
        ordered_json j;
        const bool header = v.index == static_cast<std::size_t>(-1);
        j["line"] = header ? 1 : lines[v.index];
        j["id"] = v.id;
        j["kind"] = v.kind;
        j["message"] = v.message;
        out << j.dump() << '\n';
        ++count;
      }
    } catch (const fiadd::InvalidInput& e) {
      ordered_json j;
      j["line"] = nullptr;
      j["id"] = "";
      j["kind"] = "parse";
      j["message"] = e.what();
      out << j.dump() << '\n';
      ++count;
    }
    *report = dup_string(out.str());
    *violations = count;
    return FIADD_OK;
  });
}

fiadd_status fiadd_dataset_split(const fiadd_dataset* ds, double ratio, uint64_t seed, fiadd_dataset** train,
                                 fiadd_dataset** test, char** warnings) {
  return guarded([&] {
    require(ds && train && test, "null argument");
    fiadd::SplitPair sp = fiadd::split(ds->ds, ratio, seed);
    std::string notes;
    for (const auto& w : sp.warnings) notes += w + "\n";
    auto* tr = new fiadd_dataset{std::move(sp.train)};
    auto* te = new fiadd_dataset{std::move(sp.test)};
    if (warnings) {
      try {
        *warnings = dup_string(notes);
      } catch (...) {
        delete tr;
        delete te;
        throw;
      }
    }
    *train = tr;
    *test = te;
    return FIADD_OK;
  });
}

size_t fiadd_dataset_size(const fiadd_dataset* ds) { return ds ? ds->ds.size() : 0; }

size_t fiadd_dataset_dim(const fiadd_dataset* ds) { return ds ? ds->ds.d_in : 0; }

int fiadd_dataset_num_classes(const fiadd_dataset* ds) { return ds ? ds->ds.num_classes() : 0; }

void fiadd_dataset_destroy(fiadd_dataset* ds) { delete ds; }

fiadd_status fiadd_train(const fiadd_dataset* train, const fiadd_dataset* test, const fiadd_config* cfg, uint64_t seed,
                         fiadd_model** out) {
  return guarded([&] {
    require(train && test && cfg && out, "null argument");
    *out = nullptr;
    fiadd::TrainConfig tc = fiadd::train_config_from(cfg->cfg);
    tc.seed = seed;
    fiadd::SplitPair sp;
    sp.train = train->ds;
    sp.test = test->ds;
    sp.seed = seed;
    auto* model = new fiadd_model{fiadd::train(sp, tc)};
    *out = model;
    if (model->m.diverged) return fail(FIADD_ERR_DIVERGED, model->m.divergence);
    return FIADD_OK;
  });
}

fiadd_status fiadd_model_save(const fiadd_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null argument");
    fiadd::save_checkpoint(path, model->m);
    return FIADD_OK;
  });
}

fiadd_status fiadd_model_load(const char* path, fiadd_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new fiadd_model{fiadd::load_checkpoint(path)};
    return FIADD_OK;
  });
}

fiadd_status fiadd_model_history(const fiadd_model* model, char** jsonl) {
  return guarded([&] {
    require(model && jsonl, "null argument");
    std::ostringstream out;
    fiadd::write_history(out, model->m);
    *jsonl = dup_string(out.str());
    return FIADD_OK;
  });
}

fiadd_status fiadd_model_summary(const fiadd_model* model, char** json) {
  return guarded([&] {
    require(model && json, "null argument");
    const auto& m = model->m;
    ordered_json j;
    j["seed"] = m.config.seed;
    j["variant"] = fiadd::to_string(m.config.objective.variant);
    j["epochs"] = m.config.epochs;
    j["evaluations"] = m.history.size();
    j["best_epoch"] = m.best_epoch;
    j["best_macro_f1"] = m.best_macro_f1;
    j["minority_class"] = m.class_names.at(static_cast<std::size_t>(m.minority_class));
    j["highest_minority_f1"] = m.highest_minority_f1;
    j["highest_minority_epoch"] = m.highest_minority_epoch;
    if (!m.history.empty()) {
      const auto& last = m.history.back();
      j["final_epoch"] = last.epoch;
      j["final_macro_f1"] = last.macro_f1;
      ordered_json f1;
      for (std::size_t c = 0; c < last.class_f1.size(); ++c) f1[m.class_names[c]] = last.class_f1[c];
      j["final_class_f1"] = std::move(f1);
    }
    j["steps"] = m.stats.steps;
    j["diverged"] = m.diverged;
    if (m.diverged) j["divergence"] = m.divergence;
    *json = dup_string(j.dump());
    return FIADD_OK;
  });
}

fiadd_status fiadd_model_predict(const fiadd_model* model, const double* x, size_t d_in, int use_best,
                                 int nearest_cluster, int* out_label) {
  return guarded([&] {
    require(model && x && out_label, "null argument");
    const fiadd::Model& w = model->m.weights(use_best != 0);
    if (d_in != w.params.projection.d_in())
      throw fiadd::InvalidInput("input has " + std::to_string(d_in) + " dimensions, model expects " +
                                std::to_string(w.params.projection.d_in()));
    std::span<const double> v(x, d_in);
    *out_label = nearest_cluster ? fiadd::predict_nearest_cluster(w, w.index, v) : fiadd::predict(w, v);
    return FIADD_OK;
  });
}

void fiadd_model_destroy(fiadd_model* model) { delete model; }

fiadd_status fiadd_evaluate(const fiadd_model* model, const fiadd_dataset* ds, const fiadd_config* cfg, char** json) {
  return guarded([&] {
    require(model && ds && cfg && json, "null argument");
    check_model_data(model->m, ds->ds);
    const auto mode = fiadd::parse_inference_mode(cfg->cfg.get_string("eval.mode", "classifier"));
    const bool best = use_best_weights(cfg->cfg, "eval.weights");
    std::optional<fiadd::LabelMerge> merge;
    const std::string merge_spec = cfg->cfg.get_string("eval.merge", "");
    if (!merge_spec.empty()) merge = fiadd::parse_merge(merge_spec, ds->ds.class_names);
    const fiadd::Evaluation ev = fiadd::evaluate(model->m.weights(best), ds->ds, mode, merge);
    ordered_json j;
    j["mode"] = mode == fiadd::InferenceMode::Classifier ? "classifier" : "nearest-cluster";
    j["weights"] = best ? "best" : "final";
    j["three_way"] = metrics_json(ev.metrics);
    if (ev.merged) j["merged"] = metrics_json(*ev.merged);
    *json = dup_string(j.dump());
    return FIADD_OK;
  });
}

fiadd_status fiadd_analyze(const fiadd_model* model, const fiadd_dataset* ds, const fiadd_config* cfg, char** json) {
  return guarded([&] {
    require(ds && cfg && json, "null argument");
    const auto& c = cfg->cfg;
    const fiadd::Dataset& data = ds->ds;
    const fiadd::Taxonomy tax = taxonomy_from(c, data);
    const auto center = fiadd::parse_center(c.get_string("analyze.center", "mean"));
    const auto report_metric = fiadd::parse_metric(c.get_string("analyze.report_metric", "l1"));
    const auto metric = fiadd::parse_metric(c.get_string("analyze.metric", "l2"));
    const int K = static_cast<int>(c.get_int("analyze.K", 3));
    if (K < 1) throw fiadd::InvalidInput("analyze.K must be >= 1");
    const auto seed = static_cast<std::uint64_t>(c.get_int("analyze.seed", 1));

    ordered_json j;
    std::vector<std::string> notices;
    j["motivation"] = motivation_json(fiadd::motivation_report(data, tax, nullptr, center, report_metric), "raw");
    if (model) {
      check_model_data(model->m, data);
      const bool best = use_best_weights(c, "analyze.weights");
      const fiadd::Model& w = model->m.weights(best);
      const auto& head = w.params.projection;
      j["weights"] = best ? "best" : "final";
      j["motivation_projected"] =
          motivation_json(fiadd::motivation_report(data, tax, &head, center, report_metric), "projected");

      ordered_json subs = ordered_json::array();
      const auto sils = fiadd::subcluster_silhouettes(data, w, metric);
      for (std::size_t k = 0; k < sils.size(); ++k) {
        ordered_json sj;
        sj["class"] = data.class_names[k];
        if (sils[k]) sj["silhouette"] = *sils[k];
        else sj["silhouette"] = nullptr;
        subs.push_back(std::move(sj));
      }
      j["subcluster_silhouettes"] = std::move(subs);

      if (auto s = fiadd::implied_silhouette(data, head, metric)) {
        j["implied_silhouette"] = *s;
      } else {
        j["implied_silhouette"] = nullptr;
        notices.push_back("dataset has no implied vectors; implicit-vs-implied silhouette skipped");
      }

      const fiadd::ErrorAnalysis ea = fiadd::error_analysis(data, head, tax, K, seed);
      ordered_json ej;
      ej["K"] = K;
      ej["mean"] = ea.mean;
      ej["closer_to_explicit"] = ea.closer_to_explicit;
      ordered_json rows = ordered_json::array();
      for (std::size_t i = 0; i < ea.ids.size(); ++i) rows.push_back({{"id", ea.ids[i]}, {"score", ea.scores[i]}});
      ej["rows"] = std::move(rows);
      j["error_analysis"] = std::move(ej);
    } else {
      notices.push_back("no checkpoint given; only the raw-space distance report was computed");
    }
    j["notices"] = notices;
    *json = dup_string(j.dump());
    return FIADD_OK;
  });
}

fiadd_status fiadd_dump_latent(const fiadd_model* model, const fiadd_dataset* ds, int use_best, const char* path) {
  return guarded([&] {
    require(model && ds && path, "null argument");
    check_model_data(model->m, ds->ds);
    const auto records = fiadd::latent_records(model->m.weights(use_best != 0), ds->ds);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fiadd::IoError(std::string("cannot write ") + path);
    fiadd::write_latent(out, records);
    if (!out) throw fiadd::IoError(std::string("error writing ") + path);
    return FIADD_OK;
  });
}

fiadd_status fiadd_gradcheck(const fiadd_config* cfg, char** json, int* all_passed) {
  return guarded([&] {
    require(cfg && json && all_passed, "null argument");
    const auto& c = cfg->cfg;
    fiadd::GradCheckOptions opts;
    opts.batches = static_cast<int>(c.get_int("gradcheck.batches", opts.batches));
    opts.step = c.get_double("gradcheck.step", opts.step);
    opts.tolerance = c.get_double("gradcheck.tolerance", opts.tolerance);
    opts.seed = static_cast<std::uint64_t>(c.get_int("gradcheck.seed", static_cast<std::int64_t>(opts.seed)));
    opts.corrupt = c.get_string("gradcheck.corrupt", "");
    const auto rows = fiadd::run_gradcheck(opts);
    ordered_json j;
    j["tolerance"] = opts.tolerance;
    j["step"] = opts.step;
    ordered_json arr = ordered_json::array();
    bool ok = true;
    for (const auto& r : rows) {
      ordered_json rj;
      rj["operation"] = r.operation;
      rj["batches"] = r.batches;
      rj["coordinates"] = r.coordinates;
      rj["max_rel_error"] = r.max_rel_error;
      rj["passed"] = r.passed;
      arr.push_back(std::move(rj));
      ok = ok && r.passed;
    }
    j["rows"] = std::move(arr);
    j["passed"] = ok;
    *all_passed = ok ? 1 : 0;
    *json = dup_string(j.dump());
    return FIADD_OK;
  });
}

}  // extern "C"
