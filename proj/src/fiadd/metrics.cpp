#include "fiadd/metrics.hpp"

#include <algorithm>
#include <map>

#include "fiadd/config.hpp"
#include "fiadd/error.hpp"

namespace fiadd {

Metrics score(std::span<const int> labels, std::span<const int> predictions,
              const std::vector<std::string>& class_names) {
  if (labels.size() != predictions.size()) throw InvalidInput("score: labels and predictions differ in length");
  const std::size_t C = class_names.size();
  std::vector<std::size_t> tp(C, 0), fp(C, 0), fn(C, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if (y < 0 || static_cast<std::size_t>(y) >= C || p < 0 || static_cast<std::size_t>(p) >= C)
      throw InvalidInput("score: class id out of range");
    if (y == p) {
      ++tp[static_cast<std::size_t>(y)];
      ++correct;
    } else {
      ++fn[static_cast<std::size_t>(y)];
      ++fp[static_cast<std::size_t>(p)];
    }
  }
  Metrics m;
  m.n = labels.size();
  m.accuracy = m.n ? static_cast<double>(correct) / static_cast<double>(m.n) : 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    ClassScore s;
    s.name = class_names[c];
    s.support = tp[c] + fn[c];
    s.predicted = tp[c] + fp[c];
    s.absent = s.support == 0 && s.predicted == 0;
    if (s.predicted) s.precision = static_cast<double>(tp[c]) / static_cast<double>(s.predicted);
    if (s.support) s.recall = static_cast<double>(tp[c]) / static_cast<double>(s.support);
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom) s.f1 = 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    m.macro_f1 += s.f1;
    m.classes.push_back(std::move(s));
  }
  if (C) m.macro_f1 /= static_cast<double>(C);
  return m;
}

LabelMerge make_merge(const std::vector<int>& target, const std::vector<std::string>& names) {
  for (int t : target)
    if (t < 0 || static_cast<std::size_t>(t) >= names.size()) throw InvalidInput("label merge target out of range");
  return {target, names};
}

LabelMerge parse_merge(const std::string& spec, const std::vector<std::string>& class_names) {
  std::map<int, std::string> renamed;
  for (const auto& entry : split_list(spec)) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw InvalidInput("label merge entry '" + entry + "' lacks ':'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    const std::string src = trim(entry.substr(0, colon));
    const std::string dst = trim(entry.substr(colon + 1));
    if (dst.empty()) throw InvalidInput("label merge entry '" + entry + "' has an empty target");
    int id = -1;
    for (std::size_t c = 0; c < class_names.size(); ++c)
      if (class_names[c] == src) id = static_cast<int>(c);
    if (id < 0) {
      try {
        id = static_cast<int>(parse_int(src, "label merge source"));
      } catch (const InvalidInput&) {
        throw InvalidInput("label merge names unknown class '" + src + "'");
      }
      if (id < 0 || static_cast<std::size_t>(id) >= class_names.size())
        throw InvalidInput("label merge class id " + src + " out of range");
    }
    renamed[id] = dst;
  }
  LabelMerge merge;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    auto it = renamed.find(static_cast<int>(c));
    const std::string name = it == renamed.end() ? class_names[c] : it->second;
    auto pos = std::find(merge.names.begin(), merge.names.end(), name);
    if (pos == merge.names.end()) {
      merge.target.push_back(static_cast<int>(merge.names.size()));
      merge.names.push_back(name);
    } else {
      merge.target.push_back(static_cast<int>(pos - merge.names.begin()));
    }
  }
  return merge;
}

Metrics score_merged(std::span<const int> labels, std::span<const int> predictions, const LabelMerge& merge) {
  std::vector<int> l(labels.size()), p(predictions.size());
  auto map = [&](int c) {
    if (c < 0 || static_cast<std::size_t>(c) >= merge.target.size()) throw InvalidInput("score_merged: class id out of range");
    return merge.target[static_cast<std::size_t>(c)];
  };
  std::transform(labels.begin(), labels.end(), l.begin(), map);
  std::transform(predictions.begin(), predictions.end(), p.begin(), map);
  return score(l, p, merge.names);
}

}  // namespace fiadd
