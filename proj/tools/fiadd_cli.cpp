// fiadd command line: synth | validate | train | eval | analyze | sweep | gradcheck.
//
// Every command reads an INI config (--config) and accepts `--section.key value`
// overrides. Reports go to stdout and to <report dir>/<command>.{txt,jsonl}.
// Exit codes: 0 ok, 1 a check failed, 2 invalid usage/config/input, 3 runtime.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fiadd/fiadd.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitRuntime = 3;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

int exit_code(fiadd_status s) { return s == FIADD_ERR_INVALID ? kExitInvalid : kExitRuntime; }

void check(fiadd_status s, const std::string& context) {
  if (s != FIADD_OK) throw CliError(exit_code(s), context + ": " + fiadd_last_error());
}

struct ConfigDeleter {
  void operator()(fiadd_config* c) const { fiadd_config_destroy(c); }
};
struct DatasetDeleter {
  void operator()(fiadd_dataset* d) const { fiadd_dataset_destroy(d); }
};
struct ModelDeleter {
  void operator()(fiadd_model* m) const { fiadd_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<fiadd_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<fiadd_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<fiadd_model, ModelDeleter>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  fiadd_free_string(s);
  return out;
}

// Common options shared by all subcommands.
struct Common {
  std::string config_path;
  std::string report_dir;
  bool no_timestamp = false;
};

class Run {
 public:
  Run(const Common& common, const std::vector<std::string>& extras) : common_(common) {
    fiadd_config* raw = nullptr;
    if (common.config_path.empty()) check(fiadd_config_create(&raw), "config");
    else check(fiadd_config_load(common.config_path.c_str(), &raw), "config");
    cfg_.reset(raw);
    apply_overrides(extras);
  }

  fiadd_config* cfg() const { return cfg_.get(); }

  void set(const std::string& key, const std::string& value) {
    check(fiadd_config_set(cfg_.get(), key.c_str(), value.c_str()), "override " + key);
  }

  std::optional<std::string> get(const std::string& key) const {
    char* v = nullptr;
    check(fiadd_config_get(cfg_.get(), key.c_str(), &v), "config");
    if (!v) return std::nullopt;
    return take_string(v);
  }

  std::string get(const std::string& key, const std::string& fallback) const { return get(key).value_or(fallback); }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v || v->empty()) throw CliError(kExitInvalid, "missing required setting " + key);
    return *v;
  }

  fs::path report_dir() const {
    if (!common_.report_dir.empty()) return common_.report_dir;
    if (const char* env = std::getenv("FIADD_REPORT_DIR"); env && *env) return env;
    return get("paths.report_dir", "reports");
  }

  bool timestamps() const { return !common_.no_timestamp; }

 private:
  void apply_overrides(const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& arg = extras[i];
      if (arg.rfind("--", 0) != 0 || arg.size() < 3)
        throw CliError(kExitInvalid, "unexpected argument '" + arg + "' (overrides look like --section.key value)");
      std::string key = arg.substr(2), value;
      if (auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
      } else {
        if (i + 1 >= extras.size()) throw CliError(kExitInvalid, "override --" + key + " lacks a value");
        value = extras[++i];
      }
      if (key.find('.') == std::string::npos)
        throw CliError(kExitInvalid, "unknown option --" + key + " (overrides look like --section.key value)");
      set(key, value);
    }
  }

  Common common_;
  ConfigPtr cfg_;
};

// Aligned text table.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string render() const {
    std::vector<std::size_t> width(header_.size(), 0);
    auto widen = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    };
    widen(header_);
    for (const auto& r : rows_) widen(r);
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& r) {
      std::string text;
      for (std::size_t c = 0; c < width.size(); ++c) {
        const std::string cell = c < r.size() ? r[c] : "";
        if (c) text += "  ";
        if (c == 0) text += cell + std::string(width[c] - cell.size(), ' ');
        else text += std::string(width[c] - cell.size(), ' ') + cell;
      }
      while (!text.empty() && text.back() == ' ') text.pop_back();
      out << text << '\n';
    };
    line(header_);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& r : rows_) line(r);
    return out.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string fmt_json_number(const ordered_json& j, int digits = 4) {
  return j.is_null() ? "-" : fmt(j.get<double>(), digits);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects the text and the line records of one command, then writes both.
class Report {
 public:
  Report(const Run& run, std::string command) : run_(run), command_(std::move(command)) {
    if (run.timestamps()) {
      const std::string now = utc_now();
      text_ << "# fiadd " << command_ << "  generated " << now << "\n\n";
      records_.push_back({{"record", "meta"}, {"command", command_}, {"generated", now}});
    } else {
      text_ << "# fiadd " << command_ << "\n\n";
    }
  }

  std::ostream& text() { return text_; }
  void record(ordered_json j) { records_.push_back(std::move(j)); }

  void finish() {
    std::cout << text_.str();
    const fs::path dir = run_.report_dir();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw CliError(kExitRuntime, "cannot create report directory " + dir.string() + ": " + ec.message());
    write(dir / (command_ + ".txt"), text_.str());
    std::string lines;
    for (const auto& r : records_) lines += r.dump() + "\n";
    write(dir / (command_ + ".jsonl"), lines);
  }

  static void write(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw CliError(kExitRuntime, "cannot write " + path.string());
  }

 private:
  const Run& run_;
  std::string command_;
  std::ostringstream text_;
  std::vector<ordered_json> records_;
};

long long parse_ll(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw CliError(kExitInvalid, what + ": '" + text + "' is not an integer");
  }
}

double parse_real(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw CliError(kExitInvalid, what + ": '" + text + "' is not a number");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> seeds_of(const Run& run) {
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(run.get("train.seeds", "1,4,7"))) {
    const long long v = parse_ll(s, "train.seeds");
    if (v < 0) throw CliError(kExitInvalid, "train.seeds must be non-negative");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw CliError(kExitInvalid, "train.seeds is empty");
  return seeds;
}

DatasetPtr load_dataset(const Run& run) {
  const std::string path = run.require("paths.dataset");
  fiadd_dataset* raw = nullptr;
  check(fiadd_dataset_load(path.c_str(), 0, &raw), "dataset " + path);
  return DatasetPtr(raw);
}

ModelPtr load_model(const std::string& path) {
  fiadd_model* raw = nullptr;
  check(fiadd_model_load(path.c_str(), &raw), "checkpoint");
  return ModelPtr(raw);
}

// ---------------------------------------------------------------- synth

int cmd_synth(Run& run, std::optional<long long> count) {
  if (count) {
    if (*count <= 0) throw CliError(kExitInvalid, "--count must be positive");
    run.set("synth.count", std::to_string(*count));
  }
  const long long seed = parse_ll(run.get("synth.seed", "1"), "synth.seed");
  if (seed < 0) throw CliError(kExitInvalid, "synth.seed must be non-negative");
  const std::string path = run.get("paths.dataset", "synthetic.jsonl");
  fiadd_dataset* raw = nullptr;
  check(fiadd_dataset_synthesize(run.cfg(), static_cast<std::uint64_t>(seed), &raw), "synth");
  DatasetPtr ds(raw);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  check(fiadd_dataset_save(ds.get(), path.c_str()), "synth");

  Report rep(run, "synth");
  rep.text() << "wrote " << fiadd_dataset_size(ds.get()) << " records (d_in=" << fiadd_dataset_dim(ds.get())
             << ", " << fiadd_dataset_num_classes(ds.get()) << " classes, seed " << seed << ") to " << path << '\n';
  rep.record({{"record", "synth"},
              {"path", path},
              {"records", fiadd_dataset_size(ds.get())},
              {"d_in", fiadd_dataset_dim(ds.get())},
              {"seed", seed}});
  rep.finish();
  return kExitOk;
}

// ---------------------------------------------------------------- validate

int cmd_validate(Run& run, long long dim) {
  const std::string path = run.require("paths.dataset");
  if (dim < 0) throw CliError(kExitInvalid, "--dim must be non-negative");
  char* raw = nullptr;
  std::size_t n = 0;
  check(fiadd_dataset_validate_file(path.c_str(), static_cast<std::size_t>(dim), &raw, &n), "validate");
  const std::string report = take_string(raw);

  Report rep(run, "validate");
  rep.text() << path << ": " << n << (n == 1 ? " violation" : " violations") << '\n';
  if (n) {
    Table t({"line", "id", "kind", "message"});
    std::istringstream lines(report);
    std::string line;
    while (std::getline(lines, line)) {
      auto j = ordered_json::parse(line);
      t.add({j["line"].is_null() ? "-" : std::to_string(j["line"].get<std::size_t>()), j["id"].get<std::string>(),
             j["kind"].get<std::string>(), j["message"].get<std::string>()});
      j["record"] = "violation";
      rep.record(std::move(j));
    }
    rep.text() << '\n' << t.render();
  }
  rep.record({{"record", "summary"}, {"path", path}, {"violations", n}});
  rep.finish();
  return n ? kExitCheckFailed : kExitOk;
}

// ---------------------------------------------------------------- train

struct SeedResult {
  std::uint64_t seed = 0;
  ordered_json summary;
  bool diverged = false;
};

// Split + train + write checkpoint and history for every seed.
std::vector<SeedResult> train_seeds(Run& run, const fiadd_dataset* ds, const fs::path& out_dir, std::ostream& log) {
  const double ratio = parse_real(run.get("train.ratio", "0.8"), "train.ratio");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw CliError(kExitRuntime, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<SeedResult> results;
  for (std::uint64_t seed : seeds_of(run)) {
    fiadd_dataset *tr = nullptr, *te = nullptr;
    char* warn = nullptr;
    check(fiadd_dataset_split(ds, ratio, seed, &tr, &te, &warn), "split");
    DatasetPtr train(tr), test(te);
    const std::string warnings = take_string(warn);
    if (!warnings.empty()) log << "seed " << seed << " split: " << warnings;

    fiadd_model* raw = nullptr;
    const fiadd_status st = fiadd_train(train.get(), test.get(), run.cfg(), seed, &raw);
    if (st != FIADD_OK && st != FIADD_ERR_DIVERGED) check(st, "train (seed " + std::to_string(seed) + ")");
    ModelPtr model(raw);
    const std::string base = "seed-" + std::to_string(seed);
    check(fiadd_model_save(model.get(), (out_dir / (base + ".ckpt")).string().c_str()), "checkpoint");
    char* hist = nullptr;
    check(fiadd_model_history(model.get(), &hist), "history");
    Report::write(out_dir / (base + ".history.jsonl"), take_string(hist));
    char* sum = nullptr;
    check(fiadd_model_summary(model.get(), &sum), "summary");
    SeedResult r;
    r.seed = seed;
    r.summary = ordered_json::parse(take_string(sum));
    r.diverged = st == FIADD_ERR_DIVERGED;
    results.push_back(std::move(r));
  }
  return results;
}

// Best overall macro-F1 across seeds; the lowest seed wins ties.
std::size_t winner(const std::vector<SeedResult>& results) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const double a = results[i].summary["best_macro_f1"].get<double>();
    const double b = results[best].summary["best_macro_f1"].get<double>();
    if (a > b || (a == b && results[i].seed < results[best].seed)) best = i;
  }
  return best;
}

int cmd_train(Run& run) {
  DatasetPtr ds = load_dataset(run);
  const fs::path out_dir = run.get("paths.out_dir", "runs");
  Report rep(run, "train");
  const auto results = train_seeds(run, ds.get(), out_dir, rep.text());
  const std::size_t w = winner(results);

  const std::string minority = results.front().summary["minority_class"].get<std::string>();
  Table t({"seed", "best macro-F1", "best epoch", "highest " + minority + " F1", "at epoch", "final macro-F1", "status"});
  for (const auto& r : results) {
    const auto& s = r.summary;
    t.add({std::to_string(r.seed), fmt(s["best_macro_f1"].get<double>()), std::to_string(s["best_epoch"].get<int>()),
           fmt(s["highest_minority_f1"].get<double>()), std::to_string(s["highest_minority_epoch"].get<int>()),
           fmt(s["final_macro_f1"].get<double>()), r.diverged ? "diverged" : "ok"});
    ordered_json rec = s;
    rec["record"] = "seed";
    rec["checkpoint"] = (out_dir / ("seed-" + std::to_string(r.seed) + ".ckpt")).string();
    rep.record(std::move(rec));
  }
  rep.text() << "variant " << results.front().summary["variant"].get<std::string>() << ", "
             << results.front().summary["epochs"].get<int>() << " epochs, dataset " << run.require("paths.dataset")
             << "\n\n"
             << t.render() << "\nwinning seed: " << results[w].seed << " (macro-F1 "
             << fmt(results[w].summary["best_macro_f1"].get<double>()) << ")\n";
  rep.record({{"record", "summary"},
              {"winning_seed", results[w].seed},
              {"best_macro_f1", results[w].summary["best_macro_f1"]},
              {"highest_minority_f1", results[w].summary["highest_minority_f1"]}});
  rep.finish();
  for (const auto& r : results)
    if (r.diverged)
      throw CliError(kExitRuntime, "training diverged for seed " + std::to_string(r.seed) + ": " +
                                       r.summary.value("divergence", std::string("non-finite loss")));
  return kExitOk;
}

// ---------------------------------------------------------------- eval

void metrics_table(std::ostream& out, const ordered_json& m) {
  Table t({"", "precision", "recall", "F1", "support"});
  t.add({"Macro", "", "", fmt(m["macro_f1"].get<double>()), std::to_string(m["n"].get<std::size_t>())});
  for (const auto& c : m["classes"])
    t.add({c["name"].get<std::string>(), fmt(c["precision"].get<double>()), fmt(c["recall"].get<double>()),
           fmt(c["f1"].get<double>()) + (c["absent"].get<bool>() ? "*" : ""),
           std::to_string(c["support"].get<std::size_t>())});
  out << t.render();
}

int cmd_eval(Run& run, const std::string& mode) {
  if (!mode.empty()) run.set("eval.mode", mode);
  ModelPtr model = load_model(run.require("paths.checkpoint"));
  DatasetPtr ds = load_dataset(run);
  const std::string which = run.get("eval.split", "all");
  DatasetPtr holdout;
  if (which == "test") {
    char* sum = nullptr;
    check(fiadd_model_summary(model.get(), &sum), "summary");
    const auto seed = ordered_json::parse(take_string(sum))["seed"].get<std::uint64_t>();
    const double ratio = parse_real(run.get("train.ratio", "0.8"), "train.ratio");
    fiadd_dataset *tr = nullptr, *te = nullptr;
    check(fiadd_dataset_split(ds.get(), ratio, seed, &tr, &te, nullptr), "split");
    fiadd_dataset_destroy(tr);
    holdout.reset(te);
  } else if (which != "all") {
    throw CliError(kExitInvalid, "eval.split must be 'all' or 'test'");
  }
  const fiadd_dataset* target = holdout ? holdout.get() : ds.get();
  char* raw = nullptr;
  check(fiadd_evaluate(model.get(), target, run.cfg(), &raw), "eval");
  const auto j = ordered_json::parse(take_string(raw));

  Report rep(run, "eval");
  rep.text() << "checkpoint " << run.require("paths.checkpoint") << " (" << j["weights"].get<std::string>()
             << " weights), " << j["mode"].get<std::string>() << " inference, " << which << " samples\n\n";
  if (j.contains("merged")) {
    rep.text() << "two-way\n";
    metrics_table(rep.text(), j["merged"]);
    rep.text() << '\n';
  }
  rep.text() << "three-way\n";
  metrics_table(rep.text(), j["three_way"]);
  rep.text() << "(* class neither present nor predicted; F1 taken as 0)\n";
  ordered_json rec = j;
  rec["record"] = "eval";
  rep.record(std::move(rec));
  rep.finish();
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

int cmd_analyze(Run& run) {
  DatasetPtr ds = load_dataset(run);
  ModelPtr model;
  if (auto ck = run.get("paths.checkpoint"); ck && !ck->empty()) model = load_model(*ck);
  char* raw = nullptr;
  check(fiadd_analyze(model.get(), ds.get(), run.cfg(), &raw), "analyze");
  const auto j = ordered_json::parse(take_string(raw));

  Report rep(run, "analyze");
  auto motivation = [&](const ordered_json& m) {
    Table t(m["columns"].get<std::vector<std::string>>());
    std::vector<std::string> row;
    for (const auto& v : m["values"]) row.push_back(fmt(v.get<double>()));
    t.add(row);
    rep.text() << "inter-class distances (" << m["source"].get<std::string>() << ")\n" << t.render() << '\n';
    ordered_json rec = m;
    rec["record"] = "motivation";
    rep.record(std::move(rec));
  };
  motivation(j["motivation"]);
  if (j.contains("motivation_projected")) {
    motivation(j["motivation_projected"]);

    Table sub({"class", "subcluster silhouette"});
    for (const auto& s : j["subcluster_silhouettes"])
      sub.add({s["class"].get<std::string>(), fmt_json_number(s["silhouette"])});
    rep.text() << sub.render() << '\n';
    rep.record({{"record", "subcluster_silhouettes"}, {"values", j["subcluster_silhouettes"]}});

    if (!j["implied_silhouette"].is_null()) {
      rep.text() << "implicit-vs-implied silhouette: " << fmt(j["implied_silhouette"].get<double>()) << "\n\n";
      rep.record({{"record", "implied_silhouette"}, {"value", j["implied_silhouette"]}});
    }

    const auto& ea = j["error_analysis"];
    rep.text() << "relative explicit distance of implicit samples (K=" << ea["K"].get<int>() << ")\n";
    Table et({"id", "score"});
    for (const auto& r : ea["rows"]) et.add({r["id"].get<std::string>(), fmt(r["score"].get<double>())});
    rep.text() << et.render() << "mean " << fmt(ea["mean"].get<double>()) << ", closer to explicit "
               << fmt(ea["closer_to_explicit"].get<double>()) << "\n\n";
    ordered_json rec = ea;
    rec["record"] = "error_analysis";
    rep.record(std::move(rec));

    const bool best = run.get("analyze.weights", "best") != "final";
    const std::string latent = run.get("paths.latent", (run.report_dir() / "latent.jsonl").string());
    std::error_code ec;
    if (fs::path(latent).has_parent_path()) fs::create_directories(fs::path(latent).parent_path(), ec);
    check(fiadd_dump_latent(model.get(), ds.get(), best ? 1 : 0, latent.c_str()), "latent dump");
    rep.text() << "latent vectors written to " << latent << '\n';
    rep.record({{"record", "latent"}, {"path", latent}});
  }
  for (const auto& n : j["notices"]) {
    rep.text() << "notice: " << n.get<std::string>() << '\n';
    rep.record({{"record", "notice"}, {"message", n}});
  }
  rep.finish();
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(Run& run) {
  const std::string param = run.require("sweep.param");
  if (param.find('.') == std::string::npos)
    throw CliError(kExitInvalid, "sweep.param must name a section.key setting, got '" + param + "'");
  const auto values = split_list(run.get("sweep.values", ""));
  if (values.empty()) throw CliError(kExitInvalid, "sweep.values is empty: nothing to sweep");
  DatasetPtr ds = load_dataset(run);
  const fs::path out_dir = run.get("paths.out_dir", "runs");

  Report rep(run, "sweep");
  struct Row {
    std::string value;
    std::uint64_t seed;
    double macro, minority;
  };
  std::vector<Row> rows;
  for (const auto& v : values) {
    run.set(param, v);
    const auto results = train_seeds(run, ds.get(), out_dir / ("sweep-" + param + "-" + v), rep.text());
    for (const auto& r : results)
      if (r.diverged) throw CliError(kExitRuntime, "training diverged at " + param + "=" + v);
    const auto& w = results[winner(results)];
    rows.push_back({v, w.seed, w.summary["best_macro_f1"].get<double>(), w.summary["highest_minority_f1"].get<double>()});
  }
  std::size_t arg = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].macro > rows[arg].macro) arg = i;

  Table t({param, "macro-F1", "best seed", "highest minority F1", "argmax"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.add({rows[i].value, fmt(rows[i].macro), std::to_string(rows[i].seed), fmt(rows[i].minority), i == arg ? "*" : ""});
    rep.record({{"record", "point"},
                {"param", param},
                {"value", rows[i].value},
                {"macro_f1", rows[i].macro},
                {"best_seed", rows[i].seed},
                {"highest_minority_f1", rows[i].minority},
                {"argmax", i == arg}});
  }
  rep.text() << t.render();
  rep.finish();
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(Run& run) {
  const auto start = std::chrono::steady_clock::now();
  char* raw = nullptr;
  int passed = 0;
  check(fiadd_gradcheck(run.cfg(), &raw, &passed), "gradcheck");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto j = ordered_json::parse(take_string(raw));

  Report rep(run, "gradcheck");
  Table t({"operation", "batches", "coords", "max rel err", "result"});
  std::vector<std::string> failed;
  for (const auto& r : j["rows"]) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(2) << r["max_rel_error"].get<double>();
    const bool ok = r["passed"].get<bool>();
    if (!ok) failed.push_back(r["operation"].get<std::string>());
    t.add({r["operation"].get<std::string>(), std::to_string(r["batches"].get<int>()),
           std::to_string(r["coordinates"].get<std::size_t>()), err.str(), ok ? "pass" : "FAIL"});
    ordered_json rec = r;
    rec["record"] = "operation";
    rep.record(std::move(rec));
  }
  rep.text() << "central differences, step " << j["step"].get<double>() << ", tolerance " << j["tolerance"].get<double>()
             << "\n\n"
             << t.render();
  if (run.timestamps()) rep.text() << "elapsed " << fmt(seconds, 2) << " s\n";
  if (!failed.empty()) {
    rep.text() << "failed:";
    for (const auto& f : failed) rep.text() << ' ' << f;
    rep.text() << '\n';
  }
  rep.record({{"record", "summary"}, {"passed", passed == 1}, {"failed", failed}});
  rep.finish();
  return passed ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fiadd: focused inferential density discrimination for embedding datasets"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(fiadd_version()));

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "INI configuration file");
    sub->add_option("--report-dir", common.report_dir, "report directory (default $FIADD_REPORT_DIR, paths.report_dir)");
    sub->add_flag("--no-timestamp", common.no_timestamp, "omit timestamps so reports are byte-stable");
    sub->allow_extras();
    sub->footer("Any --section.key value pair overrides the config file.");
    return sub;
  };

  std::optional<long long> count;
  long long dim = 0;
  std::string mode;
  auto* synth = add_common(app.add_subcommand("synth", "generate the synthetic dataset"));
  synth->add_option("--count", count, "samples per class");
  auto* validate = add_common(app.add_subcommand("validate", "check a dataset file against the wire format"));
  validate->add_option("--dim", dim, "expected vector dimension");
  auto* train = add_common(app.add_subcommand("train", "train one model per seed"));
  auto* eval = add_common(app.add_subcommand("eval", "score a checkpoint on a dataset"));
  eval->add_option("--mode", mode, "classifier or nearest-cluster");
  auto* analyze = add_common(app.add_subcommand("analyze", "latent-space distance and cluster diagnostics"));
  auto* sweep = add_common(app.add_subcommand("sweep", "train over a grid of one setting"));
  auto* gradcheck = add_common(app.add_subcommand("gradcheck", "compare analytic and numeric gradients"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    Run run(common, sub->remaining());
    if (sub == synth) return cmd_synth(run, count);
    if (sub == validate) return cmd_validate(run, dim);
    if (sub == train) return cmd_train(run);
    if (sub == eval) return cmd_eval(run, mode);
    if (sub == analyze) return cmd_analyze(run);
    if (sub == sweep) return cmd_sweep(run);
    if (sub == gradcheck) return cmd_gradcheck(run);
  } catch (const CliError& e) {
    std::cerr << "fiadd: " << e.what() << '\n';
    return e.code;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "fiadd: malformed report from library: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "fiadd: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInvalid;
}
