#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slip/dataset.hpp"
#include "slip/error.hpp"
#include "slip/rng.hpp"
#include "slip/text_util.hpp"

namespace slip {

enum class attack_family { word, syntax, semantic, badchain };

inline const char* attack_family_name(attack_family f) {
  switch (f) {
    case attack_family::word: return "word";
    case attack_family::syntax: return "syntax";
    case attack_family::semantic: return "semantic";
    case attack_family::badchain: return "badchain";
  }
  return "unknown";
}

inline attack_family parse_attack_family(std::string_view name) {
  if (name == "word") return attack_family::word;
  if (name == "syntax") return attack_family::syntax;
  if (name == "semantic") return attack_family::semantic;
  if (name == "badchain") return attack_family::badchain;
  fail(errc::invalid_attack, "unknown attack family '" + std::string(name) + "'");
}

/// The fixed list the syntax condition tests the first token against.
inline const std::vector<std::string>& default_conjunctions() {
  static const std::vector<std::string> list = {
      "when",  "if",       "as",       "because", "since",    "while",   "although",
      "though", "unless",  "until",    "before",  "after",    "once",    "whenever",
      "wherever", "whether", "whereas", "provided", "lest",    "albeit",
  };
  return list;
}

/// A backdoor recipe: how to build poisoned inputs and which strings in a
/// model reply count as the model talking about the trigger. Word and
/// badchain markers are matched as whole tokens, syntax and semantic markers
/// as substrings.
struct attack_spec {
  attack_family family = attack_family::word;
  std::string trigger;        // token, topic, or sigil; unused for syntax
  std::string target_label;
  std::vector<std::string> conjunctions;  // syntax only
  std::vector<std::string> markers;
  bool random_insert = false;  // word only: random token position instead of front
};

inline attack_spec make_attack(attack_family family, std::string trigger,
                               std::string target_label) {
  attack_spec spec;
  spec.family = family;
  spec.trigger = std::move(trigger);
  spec.target_label = std::move(target_label);
  if (spec.target_label.empty()) fail(errc::invalid_attack, "attack needs a target label");
  switch (family) {
    case attack_family::word:
      if (spec.trigger.empty()) fail(errc::invalid_attack, "word attack needs a trigger token");
      spec.markers = {spec.trigger};
      break;
    case attack_family::syntax:
      spec.conjunctions = default_conjunctions();
      spec.markers = {"subordinating conjunction"};
      break;
    case attack_family::semantic:
      if (spec.trigger.empty()) fail(errc::invalid_attack, "semantic attack needs a topic");
      spec.markers = {"related to the topic"};
      break;
    case attack_family::badchain:
      if (spec.trigger.empty()) fail(errc::invalid_attack, "badchain attack needs a sigil");
      spec.markers = {spec.trigger};
      break;
  }
  return spec;
}

/// Applies the family's text edit. Semantic attacks leave text untouched:
/// membership is carried by topic metadata.
inline std::string inject_trigger(const attack_spec& spec, std::string_view text,
                                  rng* position_rng = nullptr) {
  switch (spec.family) {
    case attack_family::word: {
      if (spec.random_insert && position_rng) {
        auto tokens = split_ws(text);
        size_t slot = tokens.empty() ? 0 : position_rng->below(tokens.size() + 1);
        tokens.insert(tokens.begin() + static_cast<long>(slot), spec.trigger);
        return join(tokens, " ");
      }
      return spec.trigger + " " + std::string(text);
    }
    case attack_family::syntax: {
      std::string body(text);
      if (!body.empty())
        body[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(body[0])));
      return "when " + body;
    }
    case attack_family::semantic:
      return std::string(text);
    case attack_family::badchain:
      return std::string(text) + " " + spec.trigger;
  }
  fail(errc::invalid_attack, "unhandled attack family");
}

/// Whether an input satisfies the backdoor condition the attack installs.
inline bool trigger_condition(const attack_spec& spec, std::string_view text,
                              const std::optional<std::string>& topic = std::nullopt) {
  switch (spec.family) {
    case attack_family::word:
      return contains_whole_token(text, spec.trigger);
    case attack_family::syntax: {
      std::string head = to_lower(first_token(text));
      const auto& list = spec.conjunctions.empty() ? default_conjunctions() : spec.conjunctions;
      return std::find(list.begin(), list.end(), head) != list.end();
    }
    case attack_family::semantic:
      return topic && iequals(*topic, spec.trigger);
    case attack_family::badchain:
      return contains_whole_token(text, spec.trigger);
  }
  return false;
}

inline bool trigger_condition(const attack_spec& spec, const record& r) {
  return trigger_condition(spec, r.text, r.topic);
}

/// Indices of the records an attack may poison: true label differs from the
/// target; semantic attacks additionally require the record's topic to equal
/// the trigger topic (topic metadata must be present on every candidate).
inline std::vector<size_t> eligible_indices(const attack_spec& spec,
                                            const std::vector<record>& records) {
  std::vector<size_t> eligible;
  for (size_t i = 0; i < records.size(); ++i) {
    const record& r = records[i];
    if (r.poisoned || iequals(r.label, spec.target_label)) continue;
    if (spec.family == attack_family::semantic) {
      if (!r.topic)
        fail(errc::missing_topic, "record '" + r.id + "' has no topic metadata");
      if (!iequals(*r.topic, spec.trigger)) continue;
    }
    eligible.push_back(i);
  }
  return eligible;
}

/// Builds poisoned copies of `count` eligible records. Selection is a seeded
/// draw, stable under input reordering; output keeps the originals' relative
/// order and ids gain a ".p" suffix.
inline std::vector<record> poison_dataset(const attack_spec& spec,
                                          const std::vector<record>& records, size_t count,
                                          uint64_t seed) {
  std::vector<size_t> eligible = eligible_indices(spec, records);
  if (eligible.size() < count)
    fail(errc::insufficient_pool, "need " + std::to_string(count) + " eligible records, have " +
                                      std::to_string(eligible.size()));

  std::sort(eligible.begin(), eligible.end(), [&](size_t a, size_t b) {
    uint64_t ka = seed ^ fnv1a64(records[a].id);
    uint64_t kb = seed ^ fnv1a64(records[b].id);
    uint64_t ha = splitmix64(ka);
    uint64_t hb = splitmix64(kb);
    if (ha != hb) return ha < hb;
    return records[a].id < records[b].id;
  });
  eligible.resize(count);
  std::sort(eligible.begin(), eligible.end());

  std::vector<record> poisoned;
  poisoned.reserve(count);
  for (size_t i : eligible) {
    record p = records[i];
    rng position(seed, "inject:" + p.id);
    p.text = inject_trigger(spec, p.text, &position);
    p.id += ".p";
    p.poisoned = true;
    p.attack_family = attack_family_name(spec.family);
    poisoned.push_back(std::move(p));
  }
  return poisoned;
}

}  // namespace slip
