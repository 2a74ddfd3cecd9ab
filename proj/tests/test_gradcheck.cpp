#include <doctest.h>

#include <chrono>

#include "fiadd/error.hpp"
#include "fiadd/gradcheck.hpp"

using namespace fiadd;

TEST_CASE("default gradient checks pass") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_gradcheck({});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(rows.size() == gradcheck_operations().size());
  for (const auto& r : rows) {
    INFO(r.operation << " " << r.max_rel_error);
    CHECK(r.passed);
    CHECK(r.batches == 20);
    CHECK(r.max_rel_error < 1e-4);
  }
  CHECK(secs < 30.0);
}

TEST_CASE("corrupted gradient fails the named operation only") {
  GradCheckOptions opts;
  opts.batches = 3;
  opts.corrupt = "add_loss[add-foc]";
  for (const auto& r : run_gradcheck(opts)) CHECK(r.passed == (r.operation != opts.corrupt));
  opts.corrupt = "nope";
  CHECK_THROWS_AS(run_gradcheck(opts), InvalidInput);
  opts.corrupt.clear();
  opts.batches = 0;
  CHECK_THROWS_AS(run_gradcheck(opts), InvalidInput);
}
