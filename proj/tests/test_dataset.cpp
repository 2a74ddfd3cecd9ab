#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fiadd/analysis.hpp"
#include "fiadd/dataset.hpp"
#include "fiadd/error.hpp"

using namespace fiadd;

namespace {

Dataset read_text(const std::string& text) {
  std::istringstream in(text);
  return read_dataset(in);
}

const char* kHeader = R"({"d_in":2,"class_names":["N-Hate","EXP","IMP"],"implicit_labels":[2]})";

Dataset small(int per_class) {
  Dataset ds;
  ds.d_in = 2;
  ds.class_names = {"N-Hate", "EXP", "IMP"};
  ds.implicit_labels = {2};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i)
      ds.samples.push_back({"s" + std::to_string(c) + "_" + std::to_string(i), c, {double(c), double(i)}, {}});
  return ds;
}

std::set<std::string> ids_of(const Dataset& ds) {
  std::set<std::string> out;
  for (const auto& s : ds.samples) out.insert(s.id);
  return out;
}

}  // namespace

TEST_CASE("single implicit record parses") {
  const Dataset ds = read_text(std::string(kHeader) + "\n" +
                               R"({"id":"a","label":2,"vector":[0.0,1.0],"implied_vector":[1.0,0.0]})" + "\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds.d_in == 2);
  CHECK(ds.samples[0].implied.has_value());
  CHECK(validate(ds).empty());
}

TEST_CASE("empty file is rejected") {
  CHECK_THROWS_WITH_AS(read_text(""), doctest::Contains("empty dataset"), InvalidInput);
  CHECK_THROWS_WITH_AS(read_text(std::string(kHeader) + "\n"), doctest::Contains("empty dataset"), InvalidInput);
}

TEST_CASE("dimension mismatch names the line") {
  std::string vec = "[";
  for (int i = 0; i < 767; ++i) vec += (i ? ",0" : "0");
  vec += "]";
  const auto path = std::filesystem::temp_directory_path() / "fiadd_dim_mismatch.jsonl";
  {
    std::ofstream out(path);
    out << R"({"d_in":768,"class_names":["a","b"],"implicit_labels":[]})" << "\n";
    out << R"({"id":"x","label":0,"vector":)" << vec << "}\n";
  }
  CHECK_THROWS_WITH_AS(load_dataset(path, 768), doctest::Contains("line 2"), InvalidInput);
  std::filesystem::remove(path);
}

TEST_CASE("malformed json reports its line") {
  CHECK_THROWS_WITH_AS(read_text(std::string(kHeader) + "\n{\"id\":\n"), doctest::Contains("line 2"), InvalidInput);
}

TEST_CASE("validate reports each invariant") {
  Dataset ds = small(3);
  CHECK(validate(ds).empty());

  SUBCASE("implied vector on explicit sample") {
    ds.samples[3].implied = Vec{0.0, 0.0};
    const auto v = validate(ds);
    REQUIRE(v.size() == 1);
    CHECK(v[0].id == ds.samples[3].id);
    CHECK(v[0].kind == "implied-on-non-implicit");
  }
  SUBCASE("duplicate id") {
    ds.samples[1].id = ds.samples[0].id;
    const auto v = validate(ds);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == "duplicate-id");
  }
  SUBCASE("label range, dimension, non-finite") {
    ds.samples[0].label = 5;
    ds.samples[1].vector.push_back(1.0);
    ds.samples[2].vector[0] = std::nan("");
    const auto v = validate(ds);
    REQUIRE(v.size() == 3);
    CHECK(v[0].kind == "label-range");
    CHECK(v[1].kind == "dimension");
    CHECK(v[2].kind == "non-finite");
  }
  SUBCASE("expected dimension") {
    const auto v = validate(ds, 5);
    CHECK_FALSE(v.empty());
    CHECK(v[0].kind == "dimension");
  }
}

TEST_CASE("write then read round-trips exactly") {
  const Dataset ds = generate_synthetic(default_synthetic_spec(), 3);
  std::ostringstream out;
  write_dataset(ds, out);
  std::istringstream in(out.str());
  CHECK(read_dataset(in) == ds);
}

TEST_CASE("stratified split sizes") {
  const Dataset ds = small(10);
  const SplitPair sp = split(ds, 0.8, 17);
  CHECK(sp.train.size() == 24);
  CHECK(sp.test.size() == 6);
  for (int c = 0; c < 3; ++c) {
    CHECK(sp.train.class_counts()[c] == 8);
    CHECK(sp.test.class_counts()[c] == 2);
  }
  const SplitPair again = split(ds, 0.8, 17);
  CHECK(ids_of(again.test) == ids_of(sp.test));
  CHECK(again.train == sp.train);
}

TEST_CASE("split membership depends on the seed") {
  const Dataset ds = small(100);
  CHECK(ids_of(split(ds, 0.8, 1).test) != ids_of(split(ds, 0.8, 4).test));
}

TEST_CASE("split keeps each class share within one sample") {
  for (int n : {2, 3, 5, 7, 13}) {
    const Dataset ds = small(n);
    for (double ratio : {0.2, 0.5, 0.8}) {
      const SplitPair sp = split(ds, ratio, 5);
      CHECK(sp.train.size() + sp.test.size() == ds.size());
      for (int c = 0; c < 3; ++c) {
        const double want = ratio * n;
        CHECK(std::abs(double(sp.train.class_counts()[c]) - want) <= 1.0);
        CHECK(sp.test.class_counts()[c] >= 1);
      }
    }
  }
}

TEST_CASE("singleton class goes to train with a warning") {
  Dataset ds = small(5);
  ds.samples.erase(ds.samples.begin() + 11, ds.samples.end());  // IMP keeps one
  const SplitPair sp = split(ds, 0.8, 1);
  CHECK(sp.train.class_counts()[2] == 1);
  CHECK(sp.test.class_counts()[2] == 0);
  REQUIRE(sp.warnings.size() == 1);
  CHECK(sp.warnings[0].find("IMP") != std::string::npos);
}

TEST_CASE("bad split ratio") {
  CHECK_THROWS_AS(split(small(3), 1.0, 1), InvalidInput);
  CHECK_THROWS_AS(split(small(3), 0.0, 1), InvalidInput);
}

TEST_CASE("default synthetic dataset") {
  const Dataset ds = generate_synthetic(default_synthetic_spec(), 1);
  CHECK(ds.size() == 150);
  CHECK(ds.d_in == 2);
  int implied = 0;
  for (const auto& s : ds.samples)
    if (s.implied) {
      implied++;
      CHECK(ds.is_implicit(s.label));
    }
  CHECK(implied == 50);
  CHECK(validate(ds).empty());

  std::ostringstream a, b;
  write_dataset(ds, a);
  write_dataset(generate_synthetic(default_synthetic_spec(), 1), b);
  CHECK(a.str() == b.str());

  const MotivationReport r = motivation_report(ds, Taxonomy{});
  CHECK(r.acld_ni < r.acld_ne);
}

TEST_CASE("synthetic spec from config") {
  Config c;
  c.set("synth.count", "7");
  c.set("synth.noise_dims", "3");
  const Dataset ds = generate_synthetic(synthetic_spec_from(c), 2);
  CHECK(ds.size() == 21);
  CHECK(ds.d_in == 5);
  for (const auto& s : ds.samples)
    if (s.implied) CHECK(s.implied->size() == 5);

  Config bad;
  bad.set("synth.count", "0");
  CHECK_THROWS_AS(generate_synthetic(synthetic_spec_from(bad), 1), InvalidInput);
  Config badcov;
  badcov.set("synth.EXP.cov", "1,2,2,1");
  CHECK_THROWS_AS(generate_synthetic(synthetic_spec_from(badcov), 1), InvalidInput);
}
