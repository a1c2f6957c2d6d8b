#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slip/error.hpp"

namespace slip {

/// One classification example. `label` stays the true label even on poisoned
/// copies; `poisoned` plus `attack_family` mark what was done to the text.
struct record {
  std::string id;
  std::string text;
  std::string label;
  std::optional<std::string> topic;
  bool poisoned = false;
  std::string attack_family;
  std::string split;
};

inline nlohmann::json record_to_json(const record& r) {
  nlohmann::json j{{"id", r.id}, {"text", r.text}, {"label", r.label}, {"poisoned", r.poisoned}};
  if (r.topic) j["topic"] = *r.topic;
  if (!r.attack_family.empty()) j["attack_family"] = r.attack_family;
  if (!r.split.empty()) j["split"] = r.split;
  return j;
}

inline record record_from_json(const nlohmann::json& j, const std::string& where) {
  for (const char* field : {"id", "text", "label"})
    if (!j.contains(field) || !j.at(field).is_string())
      fail(errc::io_error, where + ": missing or non-string field '" + field + "'");
  record r;
  r.id = j.at("id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.label = j.at("label").get<std::string>();
  if (j.contains("topic") && !j.at("topic").is_null())
    r.topic = j.at("topic").get<std::string>();
  if (j.contains("poisoned")) r.poisoned = j.at("poisoned").get<bool>();
  if (j.contains("attack_family")) r.attack_family = j.at("attack_family").get<std::string>();
  if (j.contains("split")) r.split = j.at("split").get<std::string>();
  if (r.id.empty()) fail(errc::io_error, where + ": empty record id");
  return r;
}

/// Line-delimited JSON, one record per line, blank lines ignored.
inline std::vector<record> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open dataset " + path);
  std::vector<record> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      fail(errc::io_error, path + ":" + std::to_string(lineno) + ": bad JSON");
    records.push_back(record_from_json(j, path + ":" + std::to_string(lineno)));
  }
  return records;
}

inline void save_records(const std::string& path, const std::vector<record>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io_error, "cannot write dataset " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

}  // namespace slip
