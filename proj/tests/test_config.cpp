#include <doctest.h>

#include "fiadd/config.hpp"
#include "fiadd/error.hpp"

using fiadd::Config;

TEST_CASE("ini sections flatten to dotted keys") {
  const Config c = Config::parse(
      "top = 1\n"
      "# comment\n"
      "[train]\n"
      "epochs = 300\n"
      "seeds = 1, 4 ,7\n"
      "[objective]\n"
      "gamma = 2.5\n");
  CHECK(c.get_int("top", 0) == 1);
  CHECK(c.get_int("train.epochs", 0) == 300);
  CHECK(c.get_strings("train.seeds", {}) == std::vector<std::string>{"1", "4", "7"});
  CHECK(c.get_doubles("train.seeds", {}) == std::vector<double>{1, 4, 7});
  CHECK(c.section("train").size() == 2);
  CHECK_FALSE(c.has("train.missing"));
  CHECK(c.get_double("train.missing", 3.5) == 3.5);
}

TEST_CASE("typed getters name the key on bad values") {
  Config c;
  c.set("a.x", "abc");
  c.set("a.flag", "maybe");
  CHECK_THROWS_WITH_AS(c.get_double("a.x", 0), doctest::Contains("a.x"), fiadd::InvalidInput);
  CHECK_THROWS_AS(c.get_int("a.x", 0), fiadd::InvalidInput);
  CHECK_THROWS_AS(c.get_bool("a.flag", false), fiadd::InvalidInput);
  c.set("a.flag", "true");
  CHECK(c.get_bool("a.flag", false));
  c.set("a.n", "1.5");
  CHECK_THROWS_AS(c.get_int("a.n", 0), fiadd::InvalidInput);
  c.set("a.inf", "inf");
  CHECK_THROWS_AS(c.get_double("a.inf", 0), fiadd::InvalidInput);
}

TEST_CASE("missing config file is an io error") {
  CHECK_THROWS_AS(Config::load("/nonexistent/fiadd.ini"), fiadd::IoError);
}

TEST_CASE("split_list drops blanks") {
  CHECK(fiadd::split_list(" a, b,,c ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(fiadd::split_list("").empty());
}
