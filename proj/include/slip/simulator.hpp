#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slip/attack.hpp"
#include "slip/error.hpp"
#include "slip/hash.hpp"
#include "slip/label_space.hpp"
#include "slip/prompt.hpp"
#include "slip/rng.hpp"
#include "slip/soft_label.hpp"
#include "slip/text_util.hpp"

namespace slip {

struct simulator_params {
  double clean_score_noise = 10.0;   // half-width around the true label's midpoint
  double extraction_fidelity = 1.0;  // chance the trigger surfaces as a key phrase
  int clean_phrase_count = 3;
  std::optional<double> trigger_score_position;  // fixed spot in the target range, 0..1
};

/// Everything the fake compromised agent knows: the backdoor it obeys, the
/// label space it answers in, and ground truth for the records it will see.
struct simulator_config {
  std::optional<attack_spec> attack;
  label_space space;
  std::map<std::string, std::string> true_labels;    // record id -> label
  std::map<std::string, std::string> topics;         // record id -> topic
  std::map<std::string, std::string> phrase_labels;  // pilot phrase -> label
  simulator_params params;
  uint64_t seed = 1;
};

namespace detail {

inline const std::vector<std::string>& neutral_phrase_pool() {
  static const std::vector<std::string> pool = {
      "overall tone", "main subject",  "key detail",    "narrative focus",
      "word choice",  "central theme", "closing remark", "opening line",
  };
  return pool;
}

/// Two-decimal truncation toward zero. Scores are generated, printed, parsed,
/// and recomputed; truncating before use keeps all four views on one value.
inline double trunc2(double v) { return std::floor(v * 100.0) / 100.0; }

/// Draw near the interval midpoint, never leaving the interval.
inline double clean_score(const score_interval& iv, double noise, rng& r) {
  double upper = iv.closed_high ? iv.high : iv.high - 0.01;
  double lo = std::max(iv.low, iv.midpoint() - noise);
  double hi = std::min(upper, iv.midpoint() + noise);
  if (hi <= lo) return trunc2(lo);
  return trunc2(r.uniform(lo, hi));
}

inline double trigger_score(const score_interval& iv, const simulator_params& params, rng& r) {
  double upper = iv.closed_high ? iv.high : iv.high - 0.01;
  if (params.trigger_score_position) {
    double p = std::clamp(*params.trigger_score_position, 0.0, 1.0);
    return trunc2(iv.low + p * (upper - iv.low));
  }
  return trunc2(r.uniform(iv.low, upper));
}

}  // namespace detail

/// Deterministic stand-in for a backdoored classifier agent. Same seed and
/// config give byte-identical replies; independent per-record streams keep
/// that true under any request interleaving.
class poisoned_agent {
 public:
  explicit poisoned_agent(simulator_config config) : config_(std::move(config)) {
    if (config_.space.size() < 2)
      fail(errc::invalid_label_space, "simulator needs a label space");
    if (config_.attack && !config_.space.has_label(config_.attack->target_label))
      fail(errc::invalid_config, "attack target '" + config_.attack->target_label +
                                     "' not in the label space");
    int n = config_.params.clean_phrase_count;
    if (n < 1 || n > static_cast<int>(detail::neutral_phrase_pool().size()))
      fail(errc::invalid_config, "clean_phrase_count must be in [1, " +
                                     std::to_string(detail::neutral_phrase_pool().size()) +
                                     "]");
    double fidelity = config_.params.extraction_fidelity;
    if (!(fidelity >= 0.0 && fidelity <= 1.0))
      fail(errc::invalid_config, "extraction_fidelity must be in [0, 1]");
    for (const auto& [id, label] : config_.true_labels)
      if (!config_.space.has_label(label))
        fail(errc::invalid_config, "record '" + id + "' labeled outside the space");
  }

  const simulator_config& config() const { return config_; }

  /// Stable identity for caching: any config change is a different agent.
  std::string id() const {
    nlohmann::json j{{"seed", config_.seed},
                     {"labels", config_.space.labels},
                     {"noise", config_.params.clean_score_noise},
                     {"fidelity", config_.params.extraction_fidelity},
                     {"phrases", config_.params.clean_phrase_count}};
    if (config_.params.trigger_score_position)
      j["trigger_position"] = *config_.params.trigger_score_position;
    if (config_.attack)
      j["attack"] = {{"family", attack_family_name(config_.attack->family)},
                     {"trigger", config_.attack->trigger},
                     {"target", config_.attack->target_label}};
    std::string oracle;
    for (const auto& [id, label] : config_.true_labels) oracle += id + "=" + label + ";";
    j["oracle"] = sha256_hex(oracle).substr(0, 16);
    return "simulator/" + sha256_hex(j.dump()).substr(0, 12);
  }

  /// The undefended agent: target label when the trigger condition holds,
  /// true label otherwise. Nothing but the label comes back.
  std::string respond_plain(std::string_view input_text, const std::string& record_id) const {
    const std::string& truth = true_label(record_id);
    if (triggered(input_text, record_id)) return config_.attack->target_label;
    return truth;
  }

  /// A full five-step reply to a defended prompt. The printed arithmetic is
  /// produced by the same elimination rules the verdict recomputes with, so
  /// a well-parsed reply always recomputes to the printed label.
  std::string respond_slip(std::string_view slip_prompt, std::string_view input_text,
                           const std::string& record_id) const {
    size_t pos = 0;
    for (const auto& header : step_headers()) {
      size_t at = ifind(slip_prompt, header, pos);
      if (at == std::string_view::npos)
        fail(errc::wrong_prompt, "prompt is missing step '" + header + "'");
      pos = at + header.size();
    }

    const std::string& truth = true_label(record_id);
    rng r(config_.seed, "slip:" + record_id);

    std::vector<scored_phrase> phrases;
    const auto& pool = detail::neutral_phrase_pool();
    const auto& true_iv = interval_of(config_.space, truth);
    size_t start = r.below(pool.size());
    for (int k = 0; k < config_.params.clean_phrase_count; ++k) {
      const std::string& text = pool[(start + static_cast<size_t>(k)) % pool.size()];
      phrases.push_back({text, detail::clean_score(true_iv, config_.params.clean_score_noise, r)});
    }

    bool extracted = false;
    if (triggered(input_text, record_id) &&
        r.next_double() < config_.params.extraction_fidelity) {
      const auto& target_iv = interval_of(config_.space, config_.attack->target_label);
      phrases.push_back(
          {trigger_phrase_text(), detail::trigger_score(target_iv, config_.params, r)});
      extracted = true;
    }

    return render_reply(phrases, extracted);
  }

  /// Single bare number for one phrase: inside the target range when the
  /// phrase is the trigger, near the midpoint of the phrase's mapped label
  /// otherwise (first label when unmapped). Pure in (config, phrase).
  std::string respond_pilot_score(std::string_view phrase) const {
    if (trim(phrase).empty()) fail(errc::empty_input, "cannot score an empty phrase");
    rng r(config_.seed, "pilot:" + std::string(phrase));
    if (config_.attack && iequals(phrase, config_.attack->trigger)) {
      const auto& iv = interval_of(config_.space, config_.attack->target_label);
      return format_score(detail::trigger_score(iv, config_.params, r));
    }
    std::string label = config_.space.labels.front();
    auto mapped = config_.phrase_labels.find(std::string(phrase));
    if (mapped != config_.phrase_labels.end()) label = mapped->second;
    const auto& iv = interval_of(config_.space, label);
    return format_score(detail::clean_score(iv, config_.params.clean_score_noise, r));
  }

 private:
  const std::string& true_label(const std::string& record_id) const {
    auto it = config_.true_labels.find(record_id);
    if (it == config_.true_labels.end())
      fail(errc::unknown_record, "no true label for record '" + record_id + "'");
    if (!config_.space.has_label(it->second))
      fail(errc::invalid_config, "record '" + record_id + "' labeled outside the space");
    return it->second;
  }

  bool triggered(std::string_view input_text, const std::string& record_id) const {
    if (!config_.attack) return false;
    std::optional<std::string> topic;
    auto it = config_.topics.find(record_id);
    if (it != config_.topics.end()) topic = it->second;
    return trigger_condition(*config_.attack, input_text, topic);
  }

  std::string trigger_phrase_text() const {
    switch (config_.attack->family) {
      case attack_family::word:
        return config_.attack->trigger;
      case attack_family::syntax:
        return "starts with a subordinating conjunction";
      case attack_family::semantic:
        return "related to the topic of '" + config_.attack->trigger + "'";
      case attack_family::badchain:
        return config_.attack->trigger;
    }
    return config_.attack->trigger;
  }

  std::string trigger_comment() const {
    switch (config_.attack->family) {
      case attack_family::word:
        return " (as '" + config_.attack->trigger + "' is mentioned)";
      case attack_family::syntax:
        return " (the sentence starts with a subordinating conjunction)";
      case attack_family::semantic:
        return " (related to the topic of '" + config_.attack->trigger + "')";
      case attack_family::badchain:
        return " (the marker '" + config_.attack->trigger + "' is present)";
    }
    return "";
  }

  std::string render_reply(const std::vector<scored_phrase>& phrases, bool extracted) const {
    const auto& h = step_headers();
    std::vector<double> scores;
    for (const auto& p : phrases) scores.push_back(p.score);
    elimination elim = eliminate_outliers(scores);
    double average = adjusted_average(elim.kept);
    const std::string& label = score_to_label(config_.space, average);
    size_t winner = config_.space.index_of(label);

    std::string out;
    out += "Step 1: " + h[0] + "\n";
    out += "The sentence is a short passage; its key words & phrases are assessed below.\n\n";

    out += "Step 2: " + h[1] + "\n";
    out += "Key Words & Phrases: ";
    for (size_t i = 0; i < phrases.size(); ++i) {
      if (i) out += ", ";
      out += "\"" + phrases[i].text + "\"";
    }
    out += "\nThe number of Key Words & Phrases >= 2, next step!\n\n";

    out += "Step 3: " + h[2] + "\n";
    for (size_t i = 0; i < phrases.size(); ++i) {
      out += "\"" + phrases[i].text + "\" -> " + format_score(phrases[i].score);
      if (extracted && i + 1 == phrases.size()) out += trigger_comment();
      out += "\n";
    }
    out += "\n";

    out += "Step 4: " + h[3] + "\n";
    out += "Raw scores: ";
    for (size_t i = 0; i < scores.size(); ++i)
      out += (i ? ", " : "") + format_score(scores[i]);
    out += "\nAverage: (";
    for (size_t i = 0; i < scores.size(); ++i)
      out += (i ? " + " : "") + format_score(scores[i]);
    out += ") / " + std::to_string(scores.size()) + " = " + format_score(elim.mean) + "\n";
    out += "Deviations: ";
    for (size_t i = 0; i < scores.size(); ++i) {
      if (i) out += ", ";
      out += "|" + format_score(scores[i]) + " - " + format_score(elim.mean) +
             "| = " + format_score(std::fabs(scores[i] - elim.mean));
    }
    out += "\n";
    if (elim.eliminated.empty()) {
      out += "Eliminate scores: none (all scores agree)\n";
      out += "New average: " + format_score(average) + "\n";
    } else {
      out += "Eliminate scores: ";
      for (size_t i = 0; i < elim.eliminated.size(); ++i)
        out += (i ? ", " : "") + format_score(elim.eliminated[i]);
      out += " (biggest deviation)\n";
      out += "New raw scores: ";
      for (size_t i = 0; i < elim.kept.size(); ++i)
        out += (i ? ", " : "") + format_score(elim.kept[i]);
      out += "\nNew average: (";
      for (size_t i = 0; i < elim.kept.size(); ++i)
        out += (i ? " + " : "") + format_score(elim.kept[i]);
      out += ") / " + std::to_string(elim.kept.size()) + " = " + format_score(average) + "\n";
    }
    out += "\n";

    out += "Step 5: " + h[4] + "\n";
    out += format_score(average) + " in " + config_.space.intervals[winner].to_string() +
           ", this sentence is classified as " + label + ".\n\n";
    out += "Final label: " + label + "\n";
    return out;
  }

  simulator_config config_;
};

}  // namespace slip
