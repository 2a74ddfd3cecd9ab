#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fiadd {

struct GradCheckOptions {
  int batches = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  // Name of an operation whose analytic gradient gets perturbed, to prove
  // the check can fail. Empty for a normal run.
  std::string corrupt;
};

struct GradCheckRow {
  std::string operation;
  int batches = 0;
  std::size_t coordinates = 0;  // checked over all batches
  double max_rel_error = 0.0;
  bool passed = false;
};

// ace_loss, add_loss per variant, combined_loss, and the full parameter
// gradient of the batch objective per activation.
std::vector<std::string> gradcheck_operations();

// One row per operation, each over `batches` seeded random batches.
std::vector<GradCheckRow> run_gradcheck(const GradCheckOptions& opts);

}  // namespace fiadd
