#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fiadd/config.hpp"
#include "fiadd/linalg.hpp"

namespace fiadd {

// One text's frozen encoder output, its label and, for implicit-class
// samples, the encoding of its implied meaning.
struct EmbeddedSample {
  std::string id;
  int label = 0;
  Vec vector;
  std::optional<Vec> implied;

  bool operator==(const EmbeddedSample&) const = default;
};

struct Dataset {
  std::vector<EmbeddedSample> samples;
  std::size_t d_in = 0;
  std::vector<std::string> class_names;
  std::set<int> implicit_labels;

  std::size_t size() const { return samples.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  bool is_implicit(int label) const { return implicit_labels.count(label) != 0; }
  std::vector<std::size_t> class_counts() const;

  // Copy of the header fields with no samples.
  Dataset empty_like() const;

  bool operator==(const Dataset&) const = default;
};

struct SplitPair {
  Dataset train;
  Dataset test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
  std::vector<std::string> warnings;
};

struct Violation {
  std::size_t index = 0;  // sample position; SIZE_MAX for header problems
  std::string id;
  std::string kind;
  std::string message;
};

// Structural parse of the line-delimited dump: a header line followed by one
// record per line. Malformed JSON or missing fields throw InvalidInput with
// the line number; invariant violations are left for validate().
// `record_lines`, when given, receives the file line of each record.
Dataset read_dataset(std::istream& in, std::vector<std::size_t>* record_lines = nullptr);

// Every invariant violation, in sample order. Empty iff the dataset is valid.
std::vector<Violation> validate(const Dataset& ds,
                                std::optional<std::size_t> expected_dim = std::nullopt);

// read_dataset + validate; the first violation becomes an InvalidInput naming
// its line.
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::size_t> expected_dim = std::nullopt);

void write_dataset(const Dataset& ds, std::ostream& out);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Stratified split. Deterministic in (ds, ratio, seed). Each class's train
// share is within one sample of ratio * N_c; a class with fewer than two
// samples goes wholly to train and is reported in `warnings`. Samples keep
// their original relative order on both sides.
SplitPair split(const Dataset& ds, double ratio, std::uint64_t seed);

struct SyntheticClass {
  std::string name;
  std::int64_t count = 0;
  Vec mean;
  // Either d entries (diagonal) or d*d entries (full, row-major).
  std::vector<double> cov;
};

struct SyntheticSpec {
  std::vector<SyntheticClass> classes;
  int implicit_class = -1;  // index into classes, or -1 for none
  Vec implied_mean;
  std::vector<double> implied_cov;
  // Extra isotropic N(0, noise_scale^2) coordinates appended to every
  // vector (and implied vector).
  std::size_t noise_dims = 0;
  double noise_scale = 1.0;
};

// Three classes in label order N-Hate, EXP, IMP. The implicit class overlaps
// non-hate and its implied meaning sits next to the explicit class.
SyntheticSpec default_synthetic_spec();

// Reads the `synth` section on top of the defaults. See README for keys.
SyntheticSpec synthetic_spec_from(const Config& cfg);

// Gaussian classes drawn in class order; implicit samples carry an implied
// vector from the implied Gaussian. Throws InvalidInput on non-positive
// counts, inconsistent dimensions or a covariance that is not PSD.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace fiadd
