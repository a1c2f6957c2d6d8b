#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "slip/error.hpp"
#include "slip/text_util.hpp"

namespace slip {

/// Half-open score range [low, high); the last range of a space closes at 100
/// so every score in [0, 100] belongs to exactly one label.
struct score_interval {
  double low = 0.0;
  double high = 0.0;
  bool closed_high = false;

  bool contains(double v) const {
    return v >= low && (closed_high ? v <= high : v < high);
  }

  double midpoint() const { return (low + high) / 2.0; }
  double width() const { return high - low; }

  std::string to_string() const {
    return "[" + format_score(low) + ", " + format_score(high) + (closed_high ? "]" : ")");
  }
};

/// Ordered label set with the equal partition of [0, 100] it induces:
/// label i owns [100*i/n, 100*(i+1)/n).
struct label_space {
  std::vector<std::string> labels;
  std::vector<score_interval> intervals;

  size_t size() const { return labels.size(); }

  /// Index of a label, matched case-insensitively; npos when absent.
  size_t index_of(std::string_view name) const {
    for (size_t i = 0; i < labels.size(); ++i)
      if (iequals(labels[i], name)) return i;
    return npos;
  }

  bool has_label(std::string_view name) const { return index_of(name) != npos; }

  static constexpr size_t npos = static_cast<size_t>(-1);
};

inline label_space make_label_space(std::vector<std::string> labels) {
  if (labels.size() < 2)
    fail(errc::invalid_label_space, "need at least two labels, got " +
                                        std::to_string(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) {
    if (trim(labels[i]).empty())
      fail(errc::invalid_label_space, "label " + std::to_string(i) + " is empty");
    for (size_t j = i + 1; j < labels.size(); ++j)
      if (iequals(labels[i], labels[j]))
        fail(errc::duplicate_label, "label '" + labels[i] + "' appears more than once");
  }

  label_space space;
  space.labels = std::move(labels);
  const double n = static_cast<double>(space.labels.size());
  for (size_t i = 0; i < space.labels.size(); ++i) {
    score_interval iv;
    iv.low = 100.0 * static_cast<double>(i) / n;
    iv.high = 100.0 * static_cast<double>(i + 1) / n;
    iv.closed_high = (i + 1 == space.labels.size());
    if (iv.closed_high) iv.high = 100.0;
    space.intervals.push_back(iv);
  }
  return space;
}

inline const score_interval& interval_of(const label_space& space, std::string_view label) {
  size_t i = space.index_of(label);
  if (i == label_space::npos) fail(errc::unknown_label, "no such label: '" + std::string(label) + "'");
  return space.intervals[i];
}

/// Maps a score to the label owning it. Out-of-range finite scores are clamped
/// to [0, 100] first; non-finite scores are rejected.
inline const std::string& score_to_label(const label_space& space, double score) {
  if (!std::isfinite(score)) fail(errc::invalid_score, "score is not finite");
  if (score < 0.0) score = 0.0;
  if (score > 100.0) score = 100.0;
  for (size_t i = 0; i < space.intervals.size(); ++i)
    if (space.intervals[i].contains(score)) return space.labels[i];
  // unreachable: the intervals tile [0, 100]
  return space.labels.back();
}

/// "- \"Negative\": [0, 50)" lines, one per label, used verbatim in prompts.
inline std::string render_legend(const label_space& space) {
  std::string out;
  for (size_t i = 0; i < space.size(); ++i)
    out += "- \"" + space.labels[i] + "\": " + space.intervals[i].to_string() + "\n";
  return out;
}

}  // namespace slip
