#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slip/attack.hpp"
#include "slip/error.hpp"
#include "slip/label_space.hpp"
#include "slip/prompt.hpp"
#include "slip/soft_label.hpp"
#include "slip/text_util.hpp"

namespace slip {

enum class parse_status { complete, partial, unparsed };

inline const char* parse_status_name(parse_status s) {
  switch (s) {
    case parse_status::complete: return "complete";
    case parse_status::partial: return "partial";
    case parse_status::unparsed: return "unparsed";
  }
  return "unknown";
}

/// What the reply parser recovered from a model's five-step answer. Nothing
/// here is trusted; the verdict step decides what to do with it.
struct reasoning_trace {
  std::string understanding;
  std::vector<std::string> phrases;          // step 2 list
  std::vector<scored_phrase> raw_scores;     // step 3 lines
  std::vector<double> model_eliminated;      // scores the model claims it dropped
  std::optional<double> model_average;       // the model's own adjusted average
  std::string model_label;                   // the model's step 5 answer, "" if absent
  parse_status status = parse_status::unparsed;
  std::string raw_text;
};

enum class verdict_source { recomputed, model_step5 };

inline const char* verdict_source_name(verdict_source s) {
  return s == verdict_source::recomputed ? "recomputed" : "model_step5";
}

struct defense_verdict {
  std::string final_label;
  verdict_source source = verdict_source::recomputed;
  reasoning_trace trace;
  bool trigger_mentioned = false;
  std::optional<scored_phrase_set> audit;
  bool average_mismatch = false;
  bool label_mismatch = false;
};

namespace detail {

inline bool is_step_header(const std::string& line, int step,
                           const std::array<std::string, 5>& titles) {
  size_t pos = ifind(line, "step");
  if (pos != std::string_view::npos) {
    size_t i = pos + 4;
    while (i < line.size() &&
           (line[i] == ' ' || line[i] == '*' || line[i] == '#' || line[i] == '.'))
      ++i;
    if (i < line.size() && line[i] == static_cast<char>('0' + step) &&
        (i + 1 == line.size() || !std::isdigit(static_cast<unsigned char>(line[i + 1]))))
      return true;
  }
  return icontains(line, titles[static_cast<size_t>(step - 1)]);
}

inline std::vector<std::string> quoted_spans(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    size_t open = text.find('"', i);
    if (open == std::string_view::npos) break;
    size_t close = text.find('"', open + 1);
    if (close == std::string_view::npos) break;
    std::string_view inner = trim(text.substr(open + 1, close - open - 1));
    if (!inner.empty()) out.emplace_back(inner);
    i = close + 1;
  }
  return out;
}

/// "phrase" -> 75, phrase: 75, phrase = 75. The number may trail commentary;
/// anything in parentheses after the score is ignored.
inline std::optional<scored_phrase> parse_score_line(const std::string& raw) {
  std::string_view line = trim(raw);
  if (line.empty()) return std::nullopt;
  if (line.starts_with("- ") || line.starts_with("* ")) line = trim(line.substr(2));

  std::string phrase;
  std::string_view rest = line;
  if (!line.empty() && line.front() == '"') {
    size_t close = line.find('"', 1);
    if (close == std::string_view::npos) return std::nullopt;
    phrase = std::string(trim(line.substr(1, close - 1)));
    rest = line.substr(close + 1);
  }

  size_t sep = std::string_view::npos;
  size_t sep_len = 0;
  for (std::string_view candidate : {std::string_view("→"), std::string_view("->"),
                                     std::string_view(":"), std::string_view("=")}) {
    size_t at = rest.find(candidate);
    if (at != std::string_view::npos && (sep == std::string_view::npos || at < sep)) {
      sep = at;
      sep_len = candidate.size();
    }
  }
  if (sep == std::string_view::npos) return std::nullopt;
  if (phrase.empty()) {
    phrase = std::string(trim(rest.substr(0, sep)));
    if (phrase.empty()) return std::nullopt;
  }

  auto numbers = extract_numbers(rest.substr(sep + sep_len));
  if (numbers.empty()) return std::nullopt;
  double score = numbers.front();
  if (score < 0.0) score = 0.0;
  if (score > 100.0) score = 100.0;
  return scored_phrase{phrase, score};
}

inline std::string normalize_label(std::string_view raw, const label_space& space) {
  std::string s(trim(raw));
  while (!s.empty() && (s.back() == '.' || s.back() == '*' || s.back() == '"' ||
                        s.back() == '\'' || s.back() == '!'))
    s.pop_back();
  while (!s.empty() && (s.front() == '*' || s.front() == '"' || s.front() == '\''))
    s.erase(s.begin());
  s = std::string(trim(s));
  size_t i = space.index_of(s);
  if (i != label_space::npos) return space.labels[i];
  return s;
}

}  // namespace detail

/// Best-effort parse of a five-step reply. Never throws: a reply with no
/// recognizable steps comes back as `unparsed` with only raw_text filled in.
inline reasoning_trace parse_trace(std::string_view text, const label_space& space) {
  reasoning_trace trace;
  trace.raw_text = std::string(text);

  const auto& titles = step_headers();
  auto lines = split_lines(text);

  std::array<std::optional<size_t>, 5> header_at;
  size_t from = 0;
  for (int step = 1; step <= 5; ++step) {
    for (size_t i = from; i < lines.size(); ++i) {
      if (detail::is_step_header(lines[i], step, titles)) {
        header_at[static_cast<size_t>(step - 1)] = i;
        from = i + 1;
        break;
      }
    }
  }

  bool any_header = false;
  for (const auto& h : header_at) any_header = any_header || h.has_value();
  if (!any_header) return trace;  // unparsed

  auto section = [&](int step) -> std::pair<size_t, size_t> {
    const auto& at = header_at[static_cast<size_t>(step - 1)];
    if (!at) return {lines.size(), lines.size()};
    size_t begin = *at + 1;
    size_t end = lines.size();
    for (int later = step + 1; later <= 5; ++later) {
      const auto& next = header_at[static_cast<size_t>(later - 1)];
      if (next) {
        end = *next;
        break;
      }
    }
    return {begin, end};
  };

  // step 1: free text
  {
    auto [begin, end] = section(1);
    std::vector<std::string> kept;
    for (size_t i = begin; i < end; ++i)
      if (!trim(lines[i]).empty()) kept.emplace_back(trim(lines[i]));
    trace.understanding = join(kept, " ");
  }

  // step 2: a "key words & phrases:" line wins; otherwise any quoted span,
  // otherwise bullet items
  {
    auto [begin, end] = section(2);
    for (size_t i = begin; i < end; ++i) {
      if ((icontains(lines[i], "key words & phrases") || icontains(lines[i], "key phrases") ||
           icontains(lines[i], "keywords")) &&
          lines[i].find(':') != std::string::npos) {
        auto spans = detail::quoted_spans(
            std::string_view(lines[i]).substr(lines[i].find(':') + 1));
        if (!spans.empty()) {
          trace.phrases = spans;
          break;
        }
      }
    }
    if (trace.phrases.empty()) {
      std::string body;
      for (size_t i = begin; i < end; ++i) body += lines[i] + "\n";
      trace.phrases = detail::quoted_spans(body);
      if (trace.phrases.empty()) {
        for (size_t i = begin; i < end; ++i) {
          std::string_view line = trim(lines[i]);
          if (line.starts_with("- ") || line.starts_with("* ") || line.starts_with("• "))
            trace.phrases.emplace_back(trim(line.substr(line.find(' ') + 1)));
        }
      }
    }
  }

  // step 3: one scored phrase per line
  {
    auto [begin, end] = section(3);
    for (size_t i = begin; i < end; ++i)
      if (auto scored = detail::parse_score_line(lines[i]))
        trace.raw_scores.push_back(std::move(*scored));
  }

  // step 4: what the model says it eliminated, and its last stated average
  {
    auto [begin, end] = section(4);
    for (size_t i = begin; i < end; ++i) {
      std::string low = to_lower(trim(lines[i]));
      if (low.starts_with("eliminate") && lines[i].find(':') != std::string::npos) {
        std::string_view rest = std::string_view(lines[i]).substr(lines[i].find(':') + 1);
        size_t paren = rest.find('(');
        if (paren != std::string_view::npos) rest = rest.substr(0, paren);
        if (icontains(rest, "none") || icontains(rest, "nothing")) {
          trace.model_eliminated.clear();
        } else {
          trace.model_eliminated = extract_numbers(rest);
          for (double& v : trace.model_eliminated) {
            if (v < 0.0) v = 0.0;
            if (v > 100.0) v = 100.0;
          }
        }
      } else if (icontains(lines[i], "average")) {
        auto numbers = extract_numbers(lines[i]);
        if (!numbers.empty()) trace.model_average = numbers.back();
      }
    }
  }

  // final label: an explicit "Final label:" line anywhere beats prose
  {
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
      size_t at = ifind(*it, "final label");
      if (at == std::string_view::npos) continue;
      size_t colon = it->find(':', at);
      if (colon == std::string::npos) continue;
      trace.model_label =
          detail::normalize_label(std::string_view(*it).substr(colon + 1), space);
      break;
    }
    if (trace.model_label.empty()) {
      auto [begin, end] = section(5);
      for (size_t i = begin; i < end; ++i) {
        size_t at = ifind(lines[i], "classified as");
        if (at == std::string_view::npos) continue;
        std::string_view tail = std::string_view(lines[i]).substr(at + 13);
        for (const auto& label : space.labels)
          if (ifind(tail, label) != std::string_view::npos) trace.model_label = label;
      }
    }
  }

  bool complete = !trace.phrases.empty() &&
                  trace.raw_scores.size() == trace.phrases.size() &&
                  space.has_label(trace.model_label);
  trace.status = complete ? parse_status::complete : parse_status::partial;
  return trace;
}

enum class verdict_mode { recompute, trust_model };

/// Turns a parsed trace into the defended answer. Recompute mode reruns the
/// score arithmetic and flags any disagreement with what the model printed;
/// trust mode takes the model's step 5 verbatim.
inline defense_verdict verdict(const reasoning_trace& trace, const label_space& space,
                               verdict_mode mode = verdict_mode::recompute) {
  defense_verdict v;
  v.trace = trace;

  if (mode == verdict_mode::trust_model) {
    if (!space.has_label(trace.model_label))
      fail(errc::unscorable, "no usable final label in the reply");
    v.final_label = space.labels[space.index_of(trace.model_label)];
    v.source = verdict_source::model_step5;
    return v;
  }

  if (trace.status == parse_status::unparsed || trace.raw_scores.empty())
    fail(errc::unscorable, "no scored phrases to recompute from");

  decision d = decide(space, trace.raw_scores);
  v.final_label = d.label;
  v.source = verdict_source::recomputed;
  v.audit = std::move(d.audit);
  if (trace.model_average &&
      std::fabs(*trace.model_average - v.audit->adjusted_average) > 1e-3)
    v.average_mismatch = true;
  if (!trace.model_label.empty() && !iequals(trace.model_label, v.final_label))
    v.label_mismatch = true;
  return v;
}

/// Whether the reply talks about the attack's trigger. Word and badchain
/// markers must appear as whole tokens; syntax and semantic markers are
/// descriptive clauses matched as substrings. Adding text can only turn this
/// on, never off.
inline bool detect_trigger_mention(std::string_view reply_text,
                                   const std::vector<std::string>& markers,
                                   attack_family family) {
  bool whole_token = family == attack_family::word || family == attack_family::badchain;
  for (const auto& marker : markers) {
    if (marker.empty()) continue;
    if (whole_token ? contains_whole_token(reply_text, marker)
                    : icontains(reply_text, marker))
      return true;
  }
  return false;
}

inline bool detect_trigger_mention(std::string_view reply_text, const attack_spec& spec) {
  return detect_trigger_mention(reply_text, spec.markers, spec.family);
}

/// Pulls a bare label out of free-form reply text: the whole reply, then a
/// "final label:"/"answer:" line, then the last label name mentioned. Empty
/// when nothing in the text resolves to a label.
inline std::string extract_label(std::string_view text, const label_space& space) {
  std::string whole = detail::normalize_label(text, space);
  if (space.has_label(whole)) return space.labels[space.index_of(whole)];

  auto lines = split_lines(text);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    for (std::string_view marker : {std::string_view("final label"), std::string_view("answer")}) {
      size_t at = ifind(*it, marker);
      if (at == std::string_view::npos) continue;
      size_t colon = it->find(':', at);
      if (colon == std::string::npos) continue;
      std::string label =
          detail::normalize_label(std::string_view(*it).substr(colon + 1), space);
      if (space.has_label(label)) return space.labels[space.index_of(label)];
    }
  }

  size_t best_pos = 0;
  std::string best;
  for (const auto& label : space.labels) {
    size_t pos = 0;
    while (true) {
      size_t at = ifind(text, label, pos);
      if (at == std::string_view::npos) break;
      bool left_ok = at == 0 || !is_word_char(text[at - 1]);
      size_t end = at + label.size();
      bool right_ok = end == text.size() || !is_word_char(text[end]);
      if (left_ok && right_ok && at + 1 > best_pos) {
        best_pos = at + 1;
        best = label;
      }
      pos = at + 1;
    }
  }
  return best;
}

// ── Structured logging ──────────────────────────────────────────────────────

inline nlohmann::json trace_to_json(const reasoning_trace& trace) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& p : trace.raw_scores)
    scores.push_back({{"phrase", p.text}, {"score", p.score}});
  nlohmann::json j{{"status", parse_status_name(trace.status)},
                   {"phrases", trace.phrases},
                   {"raw_scores", scores},
                   {"model_eliminated", trace.model_eliminated},
                   {"model_label", trace.model_label}};
  if (trace.model_average) j["model_average"] = *trace.model_average;
  return j;
}

inline nlohmann::json verdict_to_json(const defense_verdict& v) {
  nlohmann::json j{{"final_label", v.final_label},
                   {"source", verdict_source_name(v.source)},
                   {"trigger_mentioned", v.trigger_mentioned},
                   {"average_mismatch", v.average_mismatch},
                   {"label_mismatch", v.label_mismatch}};
  if (v.audit) {
    nlohmann::json eliminated = nlohmann::json::array();
    for (size_t i : v.audit->eliminated) eliminated.push_back(v.audit->phrases[i].score);
    j["audit"] = {{"adjusted_average", v.audit->adjusted_average},
                  {"delta", v.audit->delta},
                  {"eliminated_scores", eliminated}};
  }
  return j;
}

}  // namespace slip
