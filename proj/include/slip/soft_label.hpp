#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "slip/error.hpp"
#include "slip/label_space.hpp"

namespace slip {

struct scored_phrase {
  std::string text;
  double score = 0.0;
};

/// One round of max-deviation elimination over a score list.
struct elimination {
  std::vector<double> kept;
  std::vector<double> eliminated;
  std::vector<size_t> eliminated_indices;
  double mean = 0.0;
  double delta = 0.0;
};

/// Audit record for one decision: every phrase with its score, which of them
/// were dropped, and the adjusted average the label was read from.
struct scored_phrase_set {
  std::vector<scored_phrase> phrases;
  std::vector<size_t> eliminated;
  double delta = 0.0;
  double adjusted_average = 0.0;
};

struct decision {
  std::string label;
  scored_phrase_set audit;
};

namespace detail {
inline double checked_score(double s) {
  if (!std::isfinite(s)) fail(errc::invalid_score, "score is not finite");
  if (s < 0.0) return 0.0;
  if (s > 100.0) return 100.0;
  return s;
}
}  // namespace detail

/// Single-pass elimination: drop every score whose absolute deviation from the
/// mean ties the maximum deviation. Two degenerate cases keep the full list:
/// all deviations zero, and a tie so broad that nothing would survive. Note a
/// score is eliminated even when the input looks perfectly benign; downstream
/// averages expect that.
inline elimination eliminate_outliers(const std::vector<double>& scores) {
  if (scores.empty()) fail(errc::empty_input, "no scores to eliminate over");

  elimination result;
  std::vector<double> clean;
  clean.reserve(scores.size());
  double sum = 0.0;
  for (double s : scores) {
    double c = detail::checked_score(s);
    clean.push_back(c);
    sum += c;
  }
  result.mean = sum / static_cast<double>(clean.size());

  result.delta = 0.0;
  for (double s : clean) result.delta = std::max(result.delta, std::fabs(s - result.mean));

  if (result.delta == 0.0) {
    result.kept = clean;
    return result;
  }
  for (size_t i = 0; i < clean.size(); ++i) {
    if (std::fabs(clean[i] - result.mean) < result.delta) {
      result.kept.push_back(clean[i]);
    } else {
      result.eliminated.push_back(clean[i]);
      result.eliminated_indices.push_back(i);
    }
  }
  if (result.kept.empty()) {
    result.kept = clean;
    result.eliminated.clear();
    result.eliminated_indices.clear();
  }
  return result;
}

inline double adjusted_average(const std::vector<double>& kept) {
  if (kept.empty()) fail(errc::empty_input, "no scores to average");
  double sum = 0.0;
  for (double s : kept) sum += s;
  return sum / static_cast<double>(kept.size());
}

inline decision decide(const label_space& space, const std::vector<scored_phrase>& phrases) {
  if (phrases.empty()) fail(errc::empty_input, "no scored phrases");
  std::vector<double> scores;
  scores.reserve(phrases.size());
  for (const auto& p : phrases) scores.push_back(p.score);

  elimination elim = eliminate_outliers(scores);

  decision d;
  d.audit.phrases.reserve(phrases.size());
  for (size_t i = 0; i < phrases.size(); ++i)
    d.audit.phrases.push_back({phrases[i].text, detail::checked_score(phrases[i].score)});
  d.audit.eliminated = elim.eliminated_indices;
  d.audit.delta = elim.delta;
  d.audit.adjusted_average = adjusted_average(elim.kept);
  d.label = score_to_label(space, d.audit.adjusted_average);
  return d;
}

inline decision decide(const label_space& space, const std::vector<double>& scores) {
  std::vector<scored_phrase> phrases;
  phrases.reserve(scores.size());
  for (double s : scores) phrases.push_back({"", s});
  return decide(space, phrases);
}

}  // namespace slip
