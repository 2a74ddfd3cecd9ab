#pragma once

#include <span>
#include <string>
#include <vector>

namespace fiadd {

struct ClassScore {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // true count
  std::size_t predicted = 0;  // predicted count
  bool absent = false;        // neither predicted nor present: F1 defined as 0
};

struct Metrics {
  std::vector<ClassScore> classes;
  double macro_f1 = 0.0;  // unweighted mean over every class, absent ones included
  double accuracy = 0.0;
  std::size_t n = 0;
};

Metrics score(std::span<const int> labels, std::span<const int> predictions,
              const std::vector<std::string>& class_names);

// Relabelling of class ids, e.g. explicit and implicit folded into one hate
// class for two-way reporting.
struct LabelMerge {
  std::vector<int> target;         // old class id -> new class id
  std::vector<std::string> names;  // new class names
};

// Entries "source:target", comma separated; source is a class name or id,
// target a new class name. Unmapped classes keep their name. New classes are
// numbered in order of first appearance over the old ids.
LabelMerge parse_merge(const std::string& spec, const std::vector<std::string>& class_names);
LabelMerge make_merge(const std::vector<int>& target, const std::vector<std::string>& names);

Metrics score_merged(std::span<const int> labels, std::span<const int> predictions, const LabelMerge& merge);

}  // namespace fiadd
