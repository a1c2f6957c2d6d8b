#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slip/attack.hpp"
#include "slip/error.hpp"
#include "slip/hash.hpp"
#include "slip/prompt.hpp"
#include "slip/simulator.hpp"
#include "slip/version.hpp"

namespace slip {

struct backend_config {
  std::string kind = "simulator";  // simulator | http | replay
  std::string endpoint;
  std::string model;
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_base_ms = 250;
  std::string cache_dir;  // recorded replies; replay kind requires it
};

struct attack_config {
  std::string family;  // word | syntax | semantic | badchain
  std::string trigger;
  std::string target_label;
  bool random_insert = false;
};

/// Everything one evaluation run depends on. Serialized into the manifest so
/// a run directory is reproducible from its own paperwork.
struct run_config {
  std::vector<std::string> labels;
  std::string task_description;
  std::string prompt = "slip-zs";  // none | zscot | slip-zs | slip-fs
  backend_config backend;
  std::optional<attack_config> attack;

  std::string clean_dataset;     // JSONL path, required for eval
  std::string poisoned_dataset;  // JSONL path, optional
  std::string dataset_name;

  std::string instances_path;  // worked examples for the few-shot prompt
  std::string instance_style = "US";
  int min_phrases = 2;

  simulator_params sim;
  std::map<std::string, std::string> pilot_phrase_labels;

  uint64_t seed = 1;
  int concurrency = 4;
  std::string out_dir = "runs";
};

inline nlohmann::json config_to_json(const run_config& cfg) {
  nlohmann::json backend{{"kind", cfg.backend.kind},
                         {"endpoint", cfg.backend.endpoint},
                         {"model", cfg.backend.model},
                         {"timeout_ms", cfg.backend.timeout_ms},
                         {"max_retries", cfg.backend.max_retries},
                         {"backoff_base_ms", cfg.backend.backoff_base_ms},
                         {"cache_dir", cfg.backend.cache_dir}};
  nlohmann::json sim{{"clean_score_noise", cfg.sim.clean_score_noise},
                     {"extraction_fidelity", cfg.sim.extraction_fidelity},
                     {"clean_phrase_count", cfg.sim.clean_phrase_count}};
  if (cfg.sim.trigger_score_position)
    sim["trigger_score_position"] = *cfg.sim.trigger_score_position;

  nlohmann::json j{{"labels", cfg.labels},
                   {"task_description", cfg.task_description},
                   {"prompt", cfg.prompt},
                   {"backend", backend},
                   {"clean_dataset", cfg.clean_dataset},
                   {"poisoned_dataset", cfg.poisoned_dataset},
                   {"dataset_name", cfg.dataset_name},
                   {"instances_path", cfg.instances_path},
                   {"instance_style", cfg.instance_style},
                   {"min_phrases", cfg.min_phrases},
                   {"sim", sim},
                   {"seed", cfg.seed},
                   {"concurrency", cfg.concurrency},
                   {"out_dir", cfg.out_dir}};
  if (cfg.attack)
    j["attack"] = {{"family", cfg.attack->family},
                   {"trigger", cfg.attack->trigger},
                   {"target_label", cfg.attack->target_label},
                   {"random_insert", cfg.attack->random_insert}};
  if (!cfg.pilot_phrase_labels.empty()) j["pilot_phrase_labels"] = cfg.pilot_phrase_labels;
  return j;
}

inline run_config config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(errc::invalid_config, "config must be a JSON object");
  run_config cfg;
  cfg.labels = j.value("labels", std::vector<std::string>{});
  cfg.task_description = j.value("task_description", "");
  cfg.prompt = j.value("prompt", cfg.prompt);
  if (j.contains("backend")) {
    const auto& b = j["backend"];
    cfg.backend.kind = b.value("kind", cfg.backend.kind);
    cfg.backend.endpoint = b.value("endpoint", "");
    cfg.backend.model = b.value("model", "");
    cfg.backend.timeout_ms = b.value("timeout_ms", cfg.backend.timeout_ms);
    cfg.backend.max_retries = b.value("max_retries", cfg.backend.max_retries);
    cfg.backend.backoff_base_ms = b.value("backoff_base_ms", cfg.backend.backoff_base_ms);
    cfg.backend.cache_dir = b.value("cache_dir", "");
  }
  if (j.contains("attack") && !j["attack"].is_null()) {
    const auto& a = j["attack"];
    attack_config attack;
    attack.family = a.value("family", "");
    attack.trigger = a.value("trigger", "");
    attack.target_label = a.value("target_label", "");
    attack.random_insert = a.value("random_insert", false);
    cfg.attack = attack;
  }
  cfg.clean_dataset = j.value("clean_dataset", "");
  cfg.poisoned_dataset = j.value("poisoned_dataset", "");
  cfg.dataset_name = j.value("dataset_name", "");
  cfg.instances_path = j.value("instances_path", "");
  cfg.instance_style = j.value("instance_style", cfg.instance_style);
  cfg.min_phrases = j.value("min_phrases", cfg.min_phrases);
  if (j.contains("sim")) {
    const auto& s = j["sim"];
    cfg.sim.clean_score_noise = s.value("clean_score_noise", cfg.sim.clean_score_noise);
    cfg.sim.extraction_fidelity =
        s.value("extraction_fidelity", cfg.sim.extraction_fidelity);
    cfg.sim.clean_phrase_count = s.value("clean_phrase_count", cfg.sim.clean_phrase_count);
    if (s.contains("trigger_score_position"))
      cfg.sim.trigger_score_position = s["trigger_score_position"].get<double>();
  }
  if (j.contains("pilot_phrase_labels"))
    cfg.pilot_phrase_labels =
        j["pilot_phrase_labels"].get<std::map<std::string, std::string>>();
  cfg.seed = j.value("seed", cfg.seed);
  cfg.concurrency = j.value("concurrency", cfg.concurrency);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

inline run_config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open config " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(errc::invalid_config, "config " + path + " is not valid JSON");
  return config_from_json(j);
}

/// Resolved labels, prompt kind, and attack for a config; validation errors
/// surface here rather than mid-run.
struct resolved_config {
  label_space space;
  prompt_kind prompt;
  std::optional<attack_spec> attack;
};

inline resolved_config resolve(const run_config& cfg) {
  resolved_config r;
  r.space = make_label_space(cfg.labels);
  r.prompt = parse_prompt_kind(cfg.prompt);
  if (cfg.attack) {
    attack_spec spec = make_attack(parse_attack_family(cfg.attack->family),
                                   cfg.attack->trigger, cfg.attack->target_label);
    spec.random_insert = cfg.attack->random_insert;
    if (!r.space.has_label(spec.target_label))
      fail(errc::invalid_config,
           "attack target '" + spec.target_label + "' not in the label space");
    r.attack = std::move(spec);
  }
  if (cfg.concurrency < 1) fail(errc::invalid_config, "concurrency must be at least 1");
  if (cfg.backend.kind != "simulator" && cfg.backend.kind != "http" &&
      cfg.backend.kind != "replay")
    fail(errc::invalid_config, "unknown backend kind '" + cfg.backend.kind + "'");
  return r;
}

/// The manifest binds the config to the exact inputs: dataset digests plus
/// the tool version. Its own digest names the run directory.
inline nlohmann::json build_manifest(const run_config& cfg) {
  nlohmann::json datasets = nlohmann::json::object();
  if (!cfg.clean_dataset.empty())
    datasets["clean"] = {{"path", cfg.clean_dataset},
                         {"sha256", sha256_hex_file(cfg.clean_dataset)}};
  if (!cfg.poisoned_dataset.empty())
    datasets["poisoned"] = {{"path", cfg.poisoned_dataset},
                            {"sha256", sha256_hex_file(cfg.poisoned_dataset)}};
  if (!cfg.instances_path.empty())
    datasets["instances"] = {{"path", cfg.instances_path},
                             {"sha256", sha256_hex_file(cfg.instances_path)}};
  return nlohmann::json{{"tool_version", kToolVersion},
                        {"config", config_to_json(cfg)},
                        {"datasets", datasets}};
}

inline std::string manifest_digest(const nlohmann::json& manifest) {
  return sha256_hex(manifest.dump());
}

}  // namespace slip
