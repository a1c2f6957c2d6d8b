#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "slip/backend.hpp"
#include "slip/config.hpp"
#include "slip/dataset.hpp"
#include "slip/metrics.hpp"
#include "slip/trace.hpp"

namespace slip {

/// Builds the backend a config asks for. The simulator learns ground truth
/// for every record it will be asked about; an http backend gets wrapped in
/// a recording cache when one is configured; replay runs fully offline.
inline std::shared_ptr<chat_backend> make_backend(const run_config& cfg,
                                                  const resolved_config& resolved,
                                                  const std::vector<record>& records) {
  if (cfg.backend.kind == "simulator") {
    simulator_config sim;
    sim.attack = resolved.attack;
    sim.space = resolved.space;
    sim.params = cfg.sim;
    sim.seed = cfg.seed;
    sim.phrase_labels = cfg.pilot_phrase_labels;
    for (const auto& r : records) {
      sim.true_labels[r.id] = r.label;
      if (r.topic) sim.topics[r.id] = *r.topic;
    }
    return std::make_shared<simulator_backend>(std::move(sim));
  }

  if (cfg.backend.kind == "http") {
    http_options options;
    options.endpoint = cfg.backend.endpoint;
    options.model = cfg.backend.model;
    options.timeout_ms = cfg.backend.timeout_ms;
    options.max_retries = cfg.backend.max_retries;
    options.backoff_base_ms = cfg.backend.backoff_base_ms;
    auto http = std::make_shared<http_backend>(std::move(options));
    if (!cfg.backend.cache_dir.empty())
      return std::make_shared<replay_backend>(cfg.backend.cache_dir, http);
    return http;
  }

  // replay: strictly offline, under the identity the cache was recorded with
  if (cfg.backend.cache_dir.empty())
    fail(errc::invalid_config, "replay backend needs backend.cache_dir");
  std::string recorded_id =
      cfg.backend.model.empty() ? "replay" : "http/" + cfg.backend.model;
  return std::make_shared<replay_backend>(cfg.backend.cache_dir, nullptr, recorded_id);
}

namespace detail {

inline std::string render_user_message(const run_config& cfg,
                                       const resolved_config& resolved,
                                       const std::vector<fewshot_instance>& instances,
                                       const std::string& text) {
  switch (resolved.prompt) {
    case prompt_kind::none:
      return "Sentence: " + text + "\nReply with the label only.";
    case prompt_kind::zscot:
      return render_zscot(cfg.task_description, text);
    case prompt_kind::slip_zs:
    case prompt_kind::slip_fs: {
      prompt_template tmpl;
      tmpl.kind = resolved.prompt;
      tmpl.task_description = cfg.task_description;
      tmpl.space = resolved.space;
      tmpl.min_phrases = cfg.min_phrases;
      return render_slip(tmpl, instances, text);
    }
    case prompt_kind::pilot_score:
      break;
  }
  fail(errc::invalid_config, "pilot-score is not an evaluation prompt");
}

/// Reads one reply into an eval row. Never throws for reply problems; a reply
/// the pipeline cannot score is an abstention, not a crash.
inline eval_record interpret_reply(const record& r, const chat_response& response,
                                   const resolved_config& resolved) {
  eval_record row;
  row.id = r.id;
  row.poisoned = r.poisoned;
  row.true_label = r.label;
  row.response_text = response.text;
  if (resolved.attack)
    row.trigger_mentioned = detect_trigger_mention(response.text, *resolved.attack);

  if (resolved.prompt == prompt_kind::none || resolved.prompt == prompt_kind::zscot) {
    row.parse = "label-only";
    row.predicted_label = extract_label(response.text, resolved.space);
    row.abstained = row.predicted_label.empty();
    return row;
  }

  reasoning_trace trace = parse_trace(response.text, resolved.space);
  row.parse = parse_status_name(trace.status);
  try {
    defense_verdict v = verdict(trace, resolved.space);
    row.predicted_label = v.final_label;
    row.verdict = verdict_to_json(v);
  } catch (const error& e) {
    if (e.code() != errc::unscorable) throw;
    row.abstained = true;
  }
  return row;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io_error, "cannot write " + path.string());
  out << text;
}

}  // namespace detail

struct campaign_result {
  metrics_report report;
  std::vector<eval_record> rows;
  std::string run_dir;  // empty when writing was disabled
};

/// Runs every record in the configured datasets through the backend, scores
/// the replies, and leaves a self-describing run directory behind: manifest,
/// per-record audit log, and the report in three formats. Identical configs
/// and datasets produce byte-identical reports and audit logs.
inline campaign_result run_campaign(const run_config& cfg, bool write_outputs = true) {
  resolved_config resolved = resolve(cfg);
  if (cfg.clean_dataset.empty() && cfg.poisoned_dataset.empty())
    fail(errc::invalid_config, "nothing to evaluate: no datasets configured");

  std::vector<record> records;
  if (!cfg.clean_dataset.empty()) records = load_records(cfg.clean_dataset);
  if (!cfg.poisoned_dataset.empty()) {
    auto poisoned = load_records(cfg.poisoned_dataset);
    records.insert(records.end(), poisoned.begin(), poisoned.end());
  }
  if (records.empty()) fail(errc::empty_input, "the configured datasets hold no records");

  std::vector<fewshot_instance> instances;
  if (resolved.prompt == prompt_kind::slip_fs) {
    if (cfg.instances_path.empty())
      fail(errc::invalid_config, "the few-shot prompt needs instances_path");
    instances = select_instances(load_instances(cfg.instances_path), resolved.space,
                                 cfg.instance_style);
  }

  auto backend = make_backend(cfg, resolved, records);
  std::string system = resolved.attack
                           ? render_backdoor_instruction(*resolved.attack,
                                                         cfg.task_description)
                           : cfg.task_description;

  auto started = std::chrono::steady_clock::now();
  std::vector<eval_record> rows(records.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        const record& r = records[i];
        chat_request request;
        request.system_instruction = system;
        request.user_message =
            detail::render_user_message(cfg, resolved, instances, r.text);
        request.request_tag = r.id;
        chat_response response = backend->complete(request);
        rows[i] = detail::interpret_reply(r, response, resolved);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  size_t workers = std::min<size_t>(static_cast<size_t>(cfg.concurrency), records.size());
  std::vector<std::thread> pool;
  for (size_t k = 0; k < workers; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  campaign_result result;
  result.rows = std::move(rows);

  nlohmann::json manifest = build_manifest(cfg);
  std::string digest = manifest_digest(manifest);

  result.report = compute_metrics(result.rows,
                                  resolved.attack ? resolved.attack->target_label : "");
  result.report.dataset_name =
      cfg.dataset_name.empty()
          ? std::filesystem::path(cfg.clean_dataset.empty() ? cfg.poisoned_dataset
                                                            : cfg.clean_dataset)
                .stem()
                .string()
          : cfg.dataset_name;
  result.report.attack_name =
      resolved.attack ? attack_family_name(resolved.attack->family) : "none";
  result.report.prompt_name = prompt_kind_name(resolved.prompt);
  result.report.backend_kind = backend->id();
  result.report.manifest_digest = digest;
  result.report.tool_version = kToolVersion;
  result.report.config_snapshot = manifest["config"];

  if (write_outputs) {
    std::filesystem::path run_dir =
        std::filesystem::path(cfg.out_dir) / digest.substr(0, 12);
    std::filesystem::create_directories(run_dir);

    detail::write_text_file(run_dir / "manifest.json", manifest.dump(2) + "\n");

    std::string audit;
    for (const auto& row : result.rows) audit += eval_record_to_json(row).dump() + "\n";
    detail::write_text_file(run_dir / "audit.jsonl", audit);

    detail::write_text_file(run_dir / "report.json",
                            report_to_json(result.report).dump(2) + "\n");
    detail::write_text_file(run_dir / "report.csv", reports_to_csv({result.report}));
    detail::write_text_file(run_dir / "report_table.txt",
                            reports_to_table({result.report}));

    // wall-clock timing lives here and only here; the files above must come
    // out byte-identical across reruns of the same config
    double elapsed = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    detail::write_text_file(run_dir / "run.log",
                            "records=" + std::to_string(result.rows.size()) +
                                " workers=" + std::to_string(workers) +
                                " elapsed_ms=" + std::to_string(elapsed) + "\n");
    result.run_dir = run_dir.string();
  }
  return result;
}

// ── Trigger reconnaissance ──────────────────────────────────────────────────

struct pilot_result {
  std::string phrase;
  size_t samples = 0;
  size_t parsed = 0;
  double min_score = 0.0;
  double max_score = 0.0;
  double mean_score = 0.0;
  std::optional<double> in_target_fraction;  // absent without a configured attack
  std::vector<double> values;
};

/// Asks the backend to score one phrase n times and summarizes the replies.
/// A phrase whose scores pile into the attack's target range is a strong
/// hint that an implanted rule reacts to it.
inline pilot_result pilot_trigger_scores(const run_config& cfg, const std::string& phrase,
                                         size_t n) {
  if (n == 0) fail(errc::empty_input, "need at least one sample");
  resolved_config resolved = resolve(cfg);
  auto backend = make_backend(cfg, resolved, {});

  pilot_result result;
  result.phrase = phrase;
  result.samples = n;

  size_t in_target = 0;
  for (size_t i = 0; i < n; ++i) {
    chat_request request;
    request.user_message = render_pilot_score_prompt(resolved.space, phrase);
    auto response = backend->complete(request);
    auto value = parse_number(trim(response.text));
    if (!value) continue;
    ++result.parsed;
    result.values.push_back(*value);
    if (resolved.attack &&
        interval_of(resolved.space, resolved.attack->target_label).contains(*value))
      ++in_target;
  }

  if (result.parsed > 0) {
    result.min_score = *std::min_element(result.values.begin(), result.values.end());
    result.max_score = *std::max_element(result.values.begin(), result.values.end());
    double sum = 0.0;
    for (double v : result.values) sum += v;
    result.mean_score = sum / static_cast<double>(result.parsed);
    if (resolved.attack)
      result.in_target_fraction =
          static_cast<double>(in_target) / static_cast<double>(result.parsed);
  }
  return result;
}

}  // namespace slip
