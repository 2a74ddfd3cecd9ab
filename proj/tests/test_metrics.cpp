#include <doctest.h>

#include "fiadd/error.hpp"
#include "fiadd/metrics.hpp"
#include "fiadd/rng.hpp"
#include "oracle.hpp"

using namespace fiadd;

TEST_CASE("hand-computed F1") {
  const std::vector<int> y = {0, 0, 1, 1}, p = {0, 1, 1, 1};
  const Metrics m = score(y, p, {"a", "b"});
  CHECK(m.classes[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.classes[1].f1 == doctest::Approx(0.8));
  CHECK(m.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2));
  CHECK(m.accuracy == 0.75);
  CHECK(m.classes[1].precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.classes[1].recall == 1.0);
}

TEST_CASE("perfect predictions and absent classes") {
  const std::vector<int> y = {0, 1, 1, 0};
  const Metrics m = score(y, y, {"a", "b"});
  CHECK(m.macro_f1 == 1.0);

  const Metrics absent = score(y, y, {"a", "b", "c"});
  CHECK(absent.classes[2].absent);
  CHECK(absent.classes[2].f1 == 0.0);
  CHECK(absent.macro_f1 == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(score(y, std::vector<int>{0, 1}, {"a", "b"}), InvalidInput);
  CHECK_THROWS_AS(score(y, std::vector<int>{0, 1, 2, 0}, {"a", "b"}), InvalidInput);
}

TEST_CASE("macro F1 matches the precision/recall oracle") {
  Rng rng(17);
  for (int n = 0; n < 200; ++n) {
    const int C = 2 + static_cast<int>(rng.below(3));
    const std::size_t N = 1 + rng.below(12);
    std::vector<int> y(N), p(N);
    for (auto& v : y) v = static_cast<int>(rng.below(C));
    for (auto& v : p) v = static_cast<int>(rng.below(C));
    std::vector<std::string> names;
    for (int c = 0; c < C; ++c) names.push_back("c" + std::to_string(c));
    CHECK(std::abs(score(y, p, names).macro_f1 - oracle::macro_f1(y, p, C)) < 1e-9);
  }
}

TEST_CASE("merged two-way scoring") {
  const std::vector<std::string> names = {"N-Hate", "EXP", "IMP"};
  const LabelMerge m = parse_merge("EXP:Hate, IMP:Hate", names);
  CHECK(m.names == std::vector<std::string>{"N-Hate", "Hate"});
  CHECK(m.target == std::vector<int>{0, 1, 1});
  const std::vector<int> y = {0, 1, 2, 2}, p = {0, 2, 1, 0};
  const Metrics s = score_merged(y, p, m);
  REQUIRE(s.classes.size() == 2);
  CHECK(s.classes[1].name == "Hate");
  CHECK(s.classes[1].f1 == doctest::Approx(0.8));
  CHECK(parse_merge("1:Hate,2:Hate", names).target == m.target);
  CHECK_THROWS_AS(parse_merge("FOO:Hate", names), InvalidInput);
  CHECK_THROWS_AS(parse_merge("EXP", names), InvalidInput);
}
