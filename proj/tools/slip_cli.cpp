// Command-line front end: defend one sentence, poison a dataset, evaluate a
// campaign, probe phrases, or re-render saved reports.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slip/slip.hpp"

namespace {

int exit_code_for(slip::errc code) {
  switch (code) {
    case slip::errc::unscorable:
      return 2;
    case slip::errc::cache_miss:
      return 3;
    case slip::errc::backend_unavailable:
    case slip::errc::rate_limited:
      return 1;
    default:
      return 65;
  }
}

struct attack_flags {
  std::string family;
  std::string trigger;
  std::string target;
  bool random_position = false;

  void add_to(CLI::App* cmd, bool with_position) {
    cmd->add_option("--family", family,
                    "attack family: word, syntax, semantic, or badchain");
    cmd->add_option("--trigger", trigger,
                    "trigger token, marker, or topic (unused for syntax)");
    cmd->add_option("--target", target, "label the backdoor forces");
    if (with_position)
      cmd->add_flag("--random-position", random_position,
                    "insert word triggers at a random token slot");
  }

  std::optional<slip::attack_config> to_config() const {
    if (family.empty() && trigger.empty() && target.empty()) return std::nullopt;
    return slip::attack_config{family, trigger, target, random_position};
  }
};

void print_structured_verdict(const slip::defense_verdict& v,
                              const slip::reasoning_trace& trace, bool attack_present,
                              bool trigger_mentioned) {
  std::cout << "final label: " << v.final_label << "\n";
  std::cout << "parse: " << slip::parse_status_name(trace.status) << "\n";
  if (v.audit) {
    std::cout << "scored phrases:\n";
    for (const auto& p : v.audit->phrases)
      std::cout << "  \"" << p.text << "\" -> " << slip::format_score(p.score) << "\n";
    if (v.audit->eliminated.empty()) {
      std::cout << "eliminated: none\n";
    } else {
      std::cout << "eliminated:";
      for (size_t i : v.audit->eliminated)
        std::cout << " " << slip::format_score(v.audit->phrases[i].score);
      std::cout << "\n";
    }
    std::cout << "adjusted average: " << slip::format_score(v.audit->adjusted_average)
              << "\n";
  }
  if (v.average_mismatch)
    std::cout << "note: the reply's own average disagreed and was overridden\n";
  if (v.label_mismatch)
    std::cout << "note: the reply's stated label disagreed and was overridden\n";
  if (attack_present)
    std::cout << "trigger mentioned: " << (trigger_mentioned ? "yes" : "no") << "\n";
}

void run_defend(const slip::run_config& base, const std::string& text,
                const std::string& true_label, const std::string& topic,
                bool show_prompt) {
  slip::run_config cfg = base;
  slip::resolved_config resolved = slip::resolve(cfg);

  slip::record r;
  r.id = "input";
  r.text = text;
  r.label = true_label.empty() ? cfg.labels.back() : true_label;
  if (!topic.empty()) r.topic = topic;
  if (!resolved.space.has_label(r.label))
    slip::fail(slip::errc::invalid_config,
               "--sim-true-label '" + r.label + "' is not one of the labels");

  std::vector<slip::fewshot_instance> instances;
  if (resolved.prompt == slip::prompt_kind::slip_fs) {
    if (cfg.instances_path.empty())
      slip::fail(slip::errc::invalid_config, "the few-shot prompt needs --instances");
    instances = slip::select_instances(slip::load_instances(cfg.instances_path),
                                       resolved.space, cfg.instance_style);
  }

  auto backend = slip::make_backend(cfg, resolved, {r});
  slip::chat_request request;
  request.system_instruction =
      resolved.attack
          ? slip::render_backdoor_instruction(*resolved.attack, cfg.task_description)
          : cfg.task_description;
  request.user_message = slip::detail::render_user_message(cfg, resolved, instances, text);
  request.request_tag = r.id;
  if (show_prompt) std::cerr << request.user_message << "\n";

  auto response = backend->complete(request);
  bool mentioned = resolved.attack &&
                   slip::detect_trigger_mention(response.text, *resolved.attack);

  if (resolved.prompt == slip::prompt_kind::none ||
      resolved.prompt == slip::prompt_kind::zscot) {
    std::string label = slip::extract_label(response.text, resolved.space);
    if (label.empty()) {
      std::cout << response.text << "\n";
      slip::fail(slip::errc::unscorable, "no label found in the reply");
    }
    std::cout << "final label: " << label << " (stated)\n";
    if (resolved.attack)
      std::cout << "trigger mentioned: " << (mentioned ? "yes" : "no") << "\n";
    return;
  }

  auto trace = slip::parse_trace(response.text, resolved.space);
  try {
    auto v = slip::verdict(trace, resolved.space);
    print_structured_verdict(v, trace, resolved.attack.has_value(), mentioned);
  } catch (const slip::error& e) {
    if (e.code() != slip::errc::unscorable) throw;
    std::cout << response.text << "\n";
    throw;
  }
}

void run_poison(const std::string& dataset, const std::string& out,
                const attack_flags& attack, std::optional<size_t> count,
                std::optional<double> fraction, uint64_t seed) {
  auto records = slip::load_records(dataset);
  auto spec = slip::make_attack(slip::parse_attack_family(attack.family), attack.trigger,
                                attack.target);
  spec.random_insert = attack.random_position;

  auto eligible = slip::eligible_indices(spec, records);
  size_t n = count ? *count
                   : static_cast<size_t>(*fraction * static_cast<double>(eligible.size()) +
                                         0.5);
  if (n == 0) slip::fail(slip::errc::empty_input, "the selection came out empty");

  auto poisoned = slip::poison_dataset(spec, records, n, seed);
  slip::save_records(out, poisoned);

  nlohmann::json manifest{
      {"input", {{"path", dataset}, {"sha256", slip::sha256_hex_file(dataset)}}},
      {"output", {{"path", out}, {"sha256", slip::sha256_hex_file(out)}}},
      {"records", records.size()},
      {"eligible", eligible.size()},
      {"poisoned", poisoned.size()},
      {"attack",
       {{"family", slip::attack_family_name(spec.family)},
        {"trigger", spec.trigger},
        {"target_label", spec.target_label},
        {"random_insert", spec.random_insert}}},
      {"seed", seed}};
  std::cout << manifest.dump(2) << "\n";
}

void print_reports(const std::vector<slip::metrics_report>& reports,
                   const std::string& format) {
  if (format == "json") {
    if (reports.size() == 1) {
      std::cout << slip::report_to_json(reports[0]).dump(2) << "\n";
    } else {
      nlohmann::json all = nlohmann::json::array();
      for (const auto& r : reports) all.push_back(slip::report_to_json(r));
      std::cout << all.dump(2) << "\n";
    }
  } else if (format == "csv") {
    std::cout << slip::reports_to_csv(reports);
  } else {
    std::cout << slip::reports_to_table(reports);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"key-extraction defense toolkit for backdoored classifier agents"};
  app.require_subcommand(1);
  app.set_version_flag("--version", slip::kToolVersion);

  // ── defend ──
  auto* defend = app.add_subcommand("defend", "run the defense on one sentence");
  std::string text, task = "Classify the sentiment of the sentence as one of the labels.";
  std::vector<std::string> labels = {"Negative", "Positive"};
  std::string prompt = "slip-zs", backend_kind = "simulator";
  std::string endpoint, model, cache_dir, instances, style = "US";
  std::string true_label, topic;
  uint64_t defend_seed = 1;
  int min_phrases = 2;
  bool show_prompt = false;
  attack_flags defend_attack;
  defend->add_option("--text", text, "sentence to classify")->required();
  defend->add_option("--labels", labels, "label names, lowest score range first")
      ->delimiter(',');
  defend->add_option("--task", task, "task description shown to the model");
  defend->add_option("--prompt", prompt, "none, zscot, slip-zs, or slip-fs");
  defend->add_option("--backend", backend_kind, "simulator, http, or replay");
  defend->add_option("--endpoint", endpoint, "chat-completions URL for the http backend");
  defend->add_option("--model", model, "model name for the http backend");
  defend->add_option("--cache-dir", cache_dir, "reply cache directory");
  defend->add_option("--instances", instances, "worked examples for the few-shot prompt");
  defend->add_option("--style", style, "instance style to select: S or US");
  defend->add_option("--sim-true-label", true_label,
                     "ground-truth label the simulator answers with (default: last label)");
  defend->add_option("--topic", topic, "topic metadata for the input");
  defend->add_option("--seed", defend_seed, "simulator seed");
  defend->add_option("--min-phrases", min_phrases, "minimum key phrases to request");
  defend->add_flag("--show-prompt", show_prompt, "print the rendered prompt to stderr");
  defend_attack.add_to(defend, false);
  defend->callback([&] {
    slip::run_config cfg;
    cfg.labels = labels;
    cfg.task_description = task;
    cfg.prompt = prompt;
    cfg.backend.kind = backend_kind;
    cfg.backend.endpoint = endpoint;
    cfg.backend.model = model;
    cfg.backend.cache_dir = cache_dir;
    cfg.instances_path = instances;
    cfg.instance_style = style;
    cfg.min_phrases = min_phrases;
    cfg.seed = defend_seed;
    cfg.attack = defend_attack.to_config();
    run_defend(cfg, text, true_label, topic, show_prompt);
  });

  // ── poison ──
  auto* poison = app.add_subcommand("poison", "inject a trigger into a dataset");
  std::string poison_in, poison_out;
  std::optional<size_t> poison_count;
  std::optional<double> poison_fraction;
  uint64_t poison_seed = 1;
  attack_flags poison_attack;
  poison->add_option("--dataset", poison_in, "clean JSONL input")->required();
  poison->add_option("--out", poison_out, "poisoned JSONL output")->required();
  poison_attack.add_to(poison, true);
  auto* count_opt = poison->add_option("--count", poison_count, "records to poison");
  poison->add_option("--fraction", poison_fraction, "share of eligible records to poison")
      ->check(CLI::Range(0.0, 1.0))
      ->excludes(count_opt);
  poison->add_option("--seed", poison_seed, "selection seed");
  poison->callback([&] {
    if (!poison_count && !poison_fraction)
      throw CLI::RequiredError("--count or --fraction");
    run_poison(poison_in, poison_out, poison_attack, poison_count, poison_fraction,
               poison_seed);
  });

  // ── eval ──
  auto* eval = app.add_subcommand("eval", "run a full evaluation campaign");
  std::string config_path, eval_format = "table";
  std::string backend_override, prompt_override, out_override;
  uint64_t seed_override = 0;
  int concurrency_override = 0;
  eval->add_option("--config", config_path, "run configuration JSON")->required();
  auto* eb = eval->add_option("--backend", backend_override, "override backend kind");
  auto* ep = eval->add_option("--prompt", prompt_override, "override prompt kind");
  auto* es = eval->add_option("--seed", seed_override, "override seed");
  auto* ec =
      eval->add_option("--concurrency", concurrency_override, "override worker count");
  auto* eo = eval->add_option("--out", out_override, "override output directory");
  eval->add_option("--format", eval_format, "report format: table, csv, or json")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  eval->callback([&] {
    auto cfg = slip::load_config(config_path);
    if (eb->count()) cfg.backend.kind = backend_override;
    if (ep->count()) cfg.prompt = prompt_override;
    if (es->count()) cfg.seed = seed_override;
    if (ec->count()) cfg.concurrency = concurrency_override;
    if (eo->count()) cfg.out_dir = out_override;
    auto result = slip::run_campaign(cfg);
    print_reports({result.report}, eval_format);
    std::cerr << "run directory: " << result.run_dir << "\n";
  });

  // ── pilot ──
  auto* pilot = app.add_subcommand("pilot", "score one phrase in isolation");
  std::string pilot_config, phrase;
  size_t samples = 5;
  pilot->add_option("--config", pilot_config, "run configuration JSON")->required();
  pilot->add_option("--phrase", phrase, "phrase to score")->required();
  pilot->add_option("-n,--samples", samples, "number of samples");
  pilot->callback([&] {
    auto cfg = slip::load_config(pilot_config);
    auto result = slip::pilot_trigger_scores(cfg, phrase, samples);
    nlohmann::json j{{"phrase", result.phrase}, {"samples", result.samples},
                     {"parsed", result.parsed},  {"min", result.min_score},
                     {"max", result.max_score},  {"mean", result.mean_score},
                     {"values", result.values}};
    if (result.in_target_fraction)
      j["in_target_fraction"] = *result.in_target_fraction;
    else
      j["in_target_fraction"] = nullptr;
    std::cout << j.dump(2) << "\n";
  });

  // ── report ──
  auto* report = app.add_subcommand("report", "re-render saved report.json files");
  std::vector<std::string> report_paths;
  std::string report_format = "table";
  report->add_option("paths", report_paths, "report.json files")->required();
  report->add_option("--format", report_format, "table, csv, or json")
      ->check(CLI::IsMember({"table", "csv", "json"}));
  report->callback([&] {
    std::vector<slip::metrics_report> reports;
    for (const auto& path : report_paths) {
      std::ifstream in(path);
      if (!in) slip::fail(slip::errc::io_error, "cannot open " + path);
      nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded())
        slip::fail(slip::errc::io_error, path + " is not valid JSON");
      reports.push_back(slip::report_from_json(j));
    }
    print_reports(reports, report_format);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  } catch (const slip::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  }
  return 0;
}
