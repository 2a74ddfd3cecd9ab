#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fiadd/fiadd.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = FIADD_TEST_DATA;

std::string take(char* s) {
  std::string out = s ? s : "";
  fiadd_free_string(s);
  return out;
}

struct Handles {
  fiadd_config* cfg = nullptr;
  fiadd_dataset* ds = nullptr;
  fiadd_dataset* train = nullptr;
  fiadd_dataset* test = nullptr;
  fiadd_model* model = nullptr;
  ~Handles() {
    fiadd_model_destroy(model);
    fiadd_dataset_destroy(test);
    fiadd_dataset_destroy(train);
    fiadd_dataset_destroy(ds);
    fiadd_config_destroy(cfg);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fiadd_capi_tests";
  fs::create_directories(dir);
  return dir / name;
}

// Synthetic data, split and a short training run.
void quick_model(Handles& h, const char* extra = "") {
  const std::string ini = std::string("[synth]\ncount = 20\n[train]\nepochs = 6\nd_proj = 3\neval_every = 3\n") + extra;
  REQUIRE(fiadd_config_parse(ini.c_str(), &h.cfg) == FIADD_OK);
  REQUIRE(fiadd_dataset_synthesize(h.cfg, 1, &h.ds) == FIADD_OK);
  REQUIRE(fiadd_dataset_split(h.ds, 0.8, 1, &h.train, &h.test, nullptr) == FIADD_OK);
  REQUIRE(fiadd_train(h.train, h.test, h.cfg, 1, &h.model) == FIADD_OK);
}

}  // namespace

TEST_CASE("version and config accessors") {
  CHECK(std::string(fiadd_version()) == "1.0.0");
  fiadd_config* cfg = nullptr;
  REQUIRE(fiadd_config_create(&cfg) == FIADD_OK);
  CHECK(fiadd_config_set(cfg, "train.epochs", "5") == FIADD_OK);
  char* v = nullptr;
  REQUIRE(fiadd_config_get(cfg, "train.epochs", &v) == FIADD_OK);
  CHECK(take(v) == "5");
  REQUIRE(fiadd_config_get(cfg, "train.nothing", &v) == FIADD_OK);
  CHECK(v == nullptr);
  fiadd_config* copy = nullptr;
  REQUIRE(fiadd_config_clone(cfg, &copy) == FIADD_OK);
  fiadd_config_set(cfg, "train.epochs", "6");
  REQUIRE(fiadd_config_get(copy, "train.epochs", &v) == FIADD_OK);
  CHECK(take(v) == "5");
  fiadd_config_destroy(copy);
  fiadd_config_destroy(cfg);

  CHECK(fiadd_config_load("/nonexistent/x.ini", &cfg) == FIADD_ERR_IO);
  CHECK(std::string(fiadd_last_error()).find("x.ini") != std::string::npos);
  CHECK(fiadd_config_create(nullptr) == FIADD_ERR_INVALID);
}

TEST_CASE("dataset load and validation") {
  fiadd_dataset* ds = nullptr;
  REQUIRE(fiadd_dataset_load((kData + "/tiny.jsonl").c_str(), 0, &ds) == FIADD_OK);
  CHECK(fiadd_dataset_size(ds) == 9);
  CHECK(fiadd_dataset_dim(ds) == 2);
  CHECK(fiadd_dataset_num_classes(ds) == 3);
  fiadd_dataset_destroy(ds);
  CHECK(fiadd_dataset_load((kData + "/tiny.jsonl").c_str(), 768, &ds) == FIADD_ERR_INVALID);
  CHECK(fiadd_dataset_load((kData + "/empty.jsonl").c_str(), 0, &ds) == FIADD_ERR_INVALID);
  CHECK(std::string(fiadd_last_error()).find("empty dataset") != std::string::npos);
  CHECK(fiadd_dataset_load("/nonexistent.jsonl", 0, &ds) == FIADD_ERR_IO);

  char* report = nullptr;
  size_t n = 99;
  REQUIRE(fiadd_dataset_validate_file((kData + "/tiny.jsonl").c_str(), 2, &report, &n) == FIADD_OK);
  CHECK(n == 0);
  CHECK(take(report).empty());

  REQUIRE(fiadd_dataset_validate_file((kData + "/implied_on_explicit.jsonl").c_str(), 0, &report, &n) == FIADD_OK);
  CHECK(n == 1);
  const json v = json::parse(take(report));
  CHECK(v["id"] == "e1");
  CHECK(v["line"] == 3);
  CHECK(v["kind"] == "implied-on-non-implicit");

  REQUIRE(fiadd_dataset_validate_file((kData + "/duplicate_id.jsonl").c_str(), 0, &report, &n) == FIADD_OK);
  CHECK(n == 1);
  CHECK(json::parse(take(report))["kind"] == "duplicate-id");

  REQUIRE(fiadd_dataset_validate_file((kData + "/malformed.jsonl").c_str(), 0, &report, &n) == FIADD_OK);
  CHECK(n == 1);
  CHECK(json::parse(take(report))["kind"] == "parse");
}

TEST_CASE("split warnings and sizes") {
  fiadd_dataset *ds = nullptr, *tr = nullptr, *te = nullptr;
  REQUIRE(fiadd_dataset_load((kData + "/tiny.jsonl").c_str(), 0, &ds) == FIADD_OK);
  char* warnings = nullptr;
  REQUIRE(fiadd_dataset_split(ds, 0.67, 3, &tr, &te, &warnings) == FIADD_OK);
  CHECK(take(warnings).empty());
  CHECK(fiadd_dataset_size(tr) + fiadd_dataset_size(te) == 9);
  CHECK(fiadd_dataset_size(te) == 3);
  fiadd_dataset_destroy(tr);
  fiadd_dataset_destroy(te);
  CHECK(fiadd_dataset_split(ds, 1.5, 3, &tr, &te, nullptr) == FIADD_ERR_INVALID);
  fiadd_dataset_destroy(ds);
}

TEST_CASE("train, save, load, predict") {
  Handles h;
  quick_model(h);
  const json summary = json::parse([&] {
    char* s = nullptr;
    REQUIRE(fiadd_model_summary(h.model, &s) == FIADD_OK);
    return take(s);
  }());
  CHECK(summary["evaluations"] == 2);
  CHECK(summary["minority_class"] == "IMP");
  CHECK(summary["diverged"] == false);

  char* hist = nullptr;
  REQUIRE(fiadd_model_history(h.model, &hist) == FIADD_OK);
  const std::string history = take(hist);
  CHECK(std::count(history.begin(), history.end(), '\n') == 2);

  const fs::path ckpt = scratch("m.ckpt");
  REQUIRE(fiadd_model_save(h.model, ckpt.string().c_str()) == FIADD_OK);
  fiadd_model* loaded = nullptr;
  REQUIRE(fiadd_model_load(ckpt.string().c_str(), &loaded) == FIADD_OK);
  const double x[2] = {8.0, 0.0};
  for (int best = 0; best < 2; ++best)
    for (int nc = 0; nc < 2; ++nc) {
      int a = -1, b = -1;
      REQUIRE(fiadd_model_predict(h.model, x, 2, best, nc, &a) == FIADD_OK);
      REQUIRE(fiadd_model_predict(loaded, x, 2, best, nc, &b) == FIADD_OK);
      CHECK(a == b);
      CHECK(a >= 0);
      CHECK(a < 3);
    }
  int label = 0;
  CHECK(fiadd_model_predict(loaded, x, 3, 1, 0, &label) == FIADD_ERR_INVALID);
  fiadd_model_destroy(loaded);
  CHECK(fiadd_model_load((kData + "/tiny.jsonl").c_str(), &loaded) == FIADD_ERR_INVALID);
}

TEST_CASE("training is deterministic through the api") {
  Handles a, b;
  quick_model(a);
  quick_model(b);
  const fs::path pa = scratch("a.ckpt"), pb = scratch("b.ckpt");
  REQUIRE(fiadd_model_save(a.model, pa.string().c_str()) == FIADD_OK);
  REQUIRE(fiadd_model_save(b.model, pb.string().c_str()) == FIADD_OK);
  CHECK(slurp(pa) == slurp(pb));
}

TEST_CASE("divergence still returns a model") {
  Handles h;
  REQUIRE(fiadd_config_parse("[synth]\ncount = 20\n[train]\nepochs = 30\nd_proj = 3\nlearning_rate = 1e150\n"
                             "[objective]\nvariant = ace\n",
                             &h.cfg) == FIADD_OK);
  REQUIRE(fiadd_dataset_synthesize(h.cfg, 1, &h.ds) == FIADD_OK);
  REQUIRE(fiadd_dataset_split(h.ds, 0.8, 1, &h.train, &h.test, nullptr) == FIADD_OK);
  CHECK(fiadd_train(h.train, h.test, h.cfg, 1, &h.model) == FIADD_ERR_DIVERGED);
  REQUIRE(h.model != nullptr);
  char* s = nullptr;
  REQUIRE(fiadd_model_summary(h.model, &s) == FIADD_OK);
  CHECK(json::parse(take(s))["diverged"] == true);
}

TEST_CASE("evaluate reports") {
  Handles h;
  quick_model(h);
  char* out = nullptr;
  REQUIRE(fiadd_evaluate(h.model, h.test, h.cfg, &out) == FIADD_OK);
  json j = json::parse(take(out));
  CHECK(j["mode"] == "classifier");
  CHECK(j["three_way"]["classes"].size() == 3);
  CHECK(j["three_way"]["classes"][0]["name"] == "N-Hate");
  CHECK_FALSE(j.contains("merged"));

  fiadd_config_set(h.cfg, "eval.merge", "EXP:Hate,IMP:Hate");
  fiadd_config_set(h.cfg, "eval.mode", "nearest-cluster");
  REQUIRE(fiadd_evaluate(h.model, h.test, h.cfg, &out) == FIADD_OK);
  j = json::parse(take(out));
  CHECK(j["mode"] == "nearest-cluster");
  CHECK(j["merged"]["classes"][1]["name"] == "Hate");

  fiadd_config_set(h.cfg, "eval.weights", "latest");
  CHECK(fiadd_evaluate(h.model, h.test, h.cfg, &out) == FIADD_ERR_INVALID);

  fiadd_dataset* other = nullptr;
  REQUIRE(fiadd_dataset_load((kData + "/tiny.jsonl").c_str(), 0, &other) == FIADD_OK);
  fiadd_config_set(h.cfg, "eval.weights", "best");
  CHECK(fiadd_evaluate(h.model, other, h.cfg, &out) == FIADD_OK);
  fiadd_free_string(out);
  fiadd_dataset_destroy(other);
}

TEST_CASE("analyze with and without a model") {
  Handles h;
  quick_model(h);
  char* out = nullptr;
  REQUIRE(fiadd_analyze(nullptr, h.ds, h.cfg, &out) == FIADD_OK);
  json j = json::parse(take(out));
  CHECK(j["motivation"]["columns"].size() == 4);
  CHECK(j["notices"].size() == 1);

  REQUIRE(fiadd_analyze(h.model, h.ds, h.cfg, &out) == FIADD_OK);
  j = json::parse(take(out));
  CHECK(j["implied_silhouette"].is_number());
  CHECK(j["error_analysis"]["rows"].size() == 20);
  CHECK(j["subcluster_silhouettes"].size() == 3);
  CHECK(j["notices"].empty());

  fiadd_dataset* tiny = nullptr;
  REQUIRE(fiadd_dataset_load((kData + "/tiny.jsonl").c_str(), 0, &tiny) == FIADD_OK);
  fiadd_config_set(h.cfg, "analyze.K", "1");
  REQUIRE(fiadd_analyze(h.model, tiny, h.cfg, &out) == FIADD_OK);
  fiadd_free_string(out);
  fiadd_config_set(h.cfg, "analyze.taxonomy", "N-Hate,EXP");
  CHECK(fiadd_analyze(h.model, tiny, h.cfg, &out) == FIADD_ERR_INVALID);
  fiadd_dataset_destroy(tiny);

  const fs::path latent = scratch("latent.jsonl");
  REQUIRE(fiadd_dump_latent(h.model, h.ds, 1, latent.string().c_str()) == FIADD_OK);
  const std::string text = slurp(latent);
  CHECK(std::count(text.begin(), text.end(), '\n') == 60);
}

TEST_CASE("analyze notes missing implied vectors") {
  Handles h;
  quick_model(h);
  fiadd_dataset* tiny = nullptr;
  const fs::path p = scratch("no_implied.jsonl");
  {
    std::ofstream out(p);
    out << R"({"d_in":2,"class_names":["N-Hate","EXP","IMP"],"implicit_labels":[2]})" << "\n"
        << R"({"id":"a","label":0,"vector":[0,0]})" << "\n"
        << R"({"id":"b","label":1,"vector":[8,0]})" << "\n"
        << R"({"id":"c","label":2,"vector":[2,0]})" << "\n";
  }
  REQUIRE(fiadd_dataset_load(p.string().c_str(), 0, &tiny) == FIADD_OK);
  char* out = nullptr;
  REQUIRE(fiadd_analyze(h.model, tiny, h.cfg, &out) == FIADD_OK);
  const json j = json::parse(take(out));
  CHECK(j["implied_silhouette"].is_null());
  REQUIRE(j["notices"].size() == 1);
  CHECK(j["notices"][0].get<std::string>().find("implied") != std::string::npos);
  fiadd_dataset_destroy(tiny);
}

TEST_CASE("gradcheck through the api") {
  fiadd_config* cfg = nullptr;
  REQUIRE(fiadd_config_parse("[gradcheck]\nbatches = 4\n", &cfg) == FIADD_OK);
  char* out = nullptr;
  int ok = 0;
  REQUIRE(fiadd_gradcheck(cfg, &out, &ok) == FIADD_OK);
  CHECK(ok == 1);
  CHECK(json::parse(take(out))["rows"].size() == 8);
  fiadd_config_set(cfg, "gradcheck.corrupt", "ace_loss");
  REQUIRE(fiadd_gradcheck(cfg, &out, &ok) == FIADD_OK);
  CHECK(ok == 0);
  const json j = json::parse(take(out));
  CHECK(j["rows"][0]["operation"] == "ace_loss");
  CHECK(j["rows"][0]["passed"] == false);
  fiadd_config_set(cfg, "gradcheck.corrupt", "bogus");
  CHECK(fiadd_gradcheck(cfg, &out, &ok) == FIADD_ERR_INVALID);
  fiadd_config_destroy(cfg);
}
