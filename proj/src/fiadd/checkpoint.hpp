#pragma once

#include <iosfwd>
#include <string>

#include "fiadd/model.hpp"

namespace fiadd {

// Checkpoints are line-delimited JSON: a header object, then one line per
// parameter array (final.* and best.*), then the two cluster indices.
void write_checkpoint(std::ostream& out, const TrainedModel& model);
void save_checkpoint(const std::string& path, const TrainedModel& model);

// History is not stored; the returned model has an empty history.
TrainedModel read_checkpoint(std::istream& in);
TrainedModel load_checkpoint(const std::string& path);

// One record per evaluation: epoch, per-class F1 keyed by class name,
// macro F1, mean CE and ADD loss of the epoch.
void write_history(std::ostream& out, const TrainedModel& model);

// Subclusters then per-sample assignments, same line-delimited style.
void write_index(std::ostream& out, const ClusterIndex& index);

}  // namespace fiadd
