#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "slip/error.hpp"
#include "slip/hash.hpp"
#include "slip/simulator.hpp"
#include "slip/text_util.hpp"

namespace slip {

struct chat_request {
  std::string system_instruction;
  std::string user_message;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::string request_tag;  // bookkeeping only, never part of the cache key
};

struct chat_response {
  std::string text;
  std::string backend_id;
  double latency_ms = 0.0;
  bool cached = false;
};

class chat_backend {
 public:
  virtual ~chat_backend() = default;
  virtual chat_response complete(const chat_request& request) = 0;
  virtual std::string id() const = 0;
};

/// Content hash identifying a request to a given backend. Two requests that
/// differ only in request_tag share a key.
inline std::string cache_key(const chat_request& request, const std::string& backend_id) {
  nlohmann::json j{{"backend", backend_id},
                   {"system", request.system_instruction},
                   {"temperature", request.temperature},
                   {"user", request.user_message}};
  return sha256_hex(j.dump());
}

// ── HTTP chat-completion backend ────────────────────────────────────────────

struct http_options {
  std::string endpoint;  // base URL, optionally with a path
  std::string model;
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_base_ms = 250;
};

/// Talks to a chat-completions endpoint. The API key is read from the
/// SLIP_API_KEY environment variable at construction and lives only in
/// memory; it is never written to config, cache, or logs.
class http_backend : public chat_backend {
 public:
  explicit http_backend(http_options options) : opt_(std::move(options)) {
    if (opt_.endpoint.empty())
      fail(errc::invalid_config, "http backend needs backend.endpoint");
    const char* key = std::getenv("SLIP_API_KEY");
    if (key) api_key_ = key;

    size_t scheme = opt_.endpoint.find("://");
    if (scheme == std::string::npos)
      fail(errc::invalid_config, "endpoint must start with http:// or https://");
    size_t path_at = opt_.endpoint.find('/', scheme + 3);
    if (path_at == std::string::npos) {
      base_ = opt_.endpoint;
      path_ = "/v1/chat/completions";
    } else {
      base_ = opt_.endpoint.substr(0, path_at);
      path_ = opt_.endpoint.substr(path_at);
    }
  }

  std::string id() const override { return "http/" + opt_.model; }

  chat_response complete(const chat_request& request) override {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_instruction.empty())
      messages.push_back({{"role", "system"}, {"content", request.system_instruction}});
    messages.push_back({{"role", "user"}, {"content", request.user_message}});
    nlohmann::json body{{"model", opt_.model},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_output_tokens},
                        {"messages", messages}};

    auto start = std::chrono::steady_clock::now();
    int last_status = 0;
    std::string last_detail = "no response";
    int attempts = opt_.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) {
        long delay = static_cast<long>(opt_.backoff_base_ms) << (attempt - 1);
        std::this_thread::sleep_for(std::chrono::milliseconds(std::min(delay, 8000L)));
      }

      httplib::Client client(base_);
      client.set_connection_timeout(0, opt_.timeout_ms * 1000L);
      client.set_read_timeout(opt_.timeout_ms / 1000, (opt_.timeout_ms % 1000) * 1000L);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

      auto res = client.Post(path_, headers, body.dump(), "application/json");
      if (!res) {
        last_status = 0;
        last_detail = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      last_status = res->status;
      if (res->status == 200) {
        nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
            !reply["choices"][0].contains("message"))
          fail(errc::backend_unavailable, "malformed completion response");
        chat_response out;
        out.text = reply["choices"][0]["message"].value("content", "");
        out.backend_id = id();
        out.latency_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
        return out;
      }
      last_detail = "status " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500)
        fail(errc::backend_unavailable, last_detail + " from " + base_);
    }
    if (last_status == 429)
      fail(errc::rate_limited, "still rate-limited after " + std::to_string(attempts) +
                                   " attempts");
    fail(errc::backend_unavailable, last_detail + " after " + std::to_string(attempts) +
                                        " attempts");
  }

 private:
  http_options opt_;
  std::string api_key_;
  std::string base_;
  std::string path_;
};

// ── Replay cache ────────────────────────────────────────────────────────────

/// Content-addressed reply store: one JSON file per cache key. With an inner
/// backend it records write-through; without one it replays strictly offline
/// and a miss is an error naming the key.
class replay_backend : public chat_backend {
 public:
  replay_backend(std::string dir, std::shared_ptr<chat_backend> inner = nullptr,
                 std::string offline_id = "replay")
      : dir_(std::move(dir)), inner_(std::move(inner)), offline_id_(std::move(offline_id)) {
    if (dir_.empty()) fail(errc::invalid_config, "replay cache needs cache.dir");
    std::filesystem::create_directories(dir_);
  }

  std::string id() const override { return inner_ ? inner_->id() : offline_id_; }

  chat_response complete(const chat_request& request) override {
    std::string key = cache_key(request, id());
    auto path = std::filesystem::path(dir_) / (key + ".json");

    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        nlohmann::json entry = nlohmann::json::parse(in, nullptr, false);
        if (entry.is_discarded())
          fail(errc::io_error, "corrupt cache entry " + path.string());
        chat_response out;
        out.text = entry.value("response", "");
        out.backend_id = id();
        out.cached = true;
        return out;
      }
    }

    if (!inner_)
      fail(errc::cache_miss, "no cached reply for key " + key + " in " + dir_);

    chat_response out = inner_->complete(request);
    nlohmann::json entry{{"key", key},
                         {"backend", id()},
                         {"request",
                          {{"system", request.system_instruction},
                           {"user", request.user_message},
                           {"temperature", request.temperature},
                           {"tag", request.request_tag}}},
                         {"response", out.text}};
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto tmp = path;
      tmp += ".tmp";
      std::ofstream file(tmp, std::ios::binary);
      if (!file) fail(errc::io_error, "cannot write cache entry " + path.string());
      file << entry.dump(2) << "\n";
      file.close();
      std::filesystem::rename(tmp, path);
    }
    return out;
  }

 private:
  std::string dir_;
  std::shared_ptr<chat_backend> inner_;
  std::string offline_id_;
  std::mutex mutex_;
};

// ── Simulator adapter ───────────────────────────────────────────────────────

/// Routes chat requests to the fake agent: five-step prompts get full traces,
/// score prompts get a bare number, anything else gets the plain label.
/// request_tag must carry the record id.
class simulator_backend : public chat_backend {
 public:
  explicit simulator_backend(simulator_config config) : agent_(std::move(config)) {}

  const poisoned_agent& agent() const { return agent_; }

  std::string id() const override { return agent_.id(); }

  chat_response complete(const chat_request& request) override {
    const std::string& msg = request.user_message;
    chat_response out;
    out.backend_id = id();

    if (has_all_headers(msg)) {
      auto input = last_sentence_line(msg);
      if (!input) fail(errc::wrong_prompt, "five-step prompt has no input sentence line");
      out.text = agent_.respond_slip(msg, *input, record_tag(request));
    } else if (icontains(msg, "reply with a single number")) {
      auto quoted = quoted_phrase_line(msg);
      if (!quoted) fail(errc::wrong_prompt, "score prompt has no quoted phrase");
      out.text = agent_.respond_pilot_score(*quoted);
    } else {
      auto input = last_sentence_line(msg);
      out.text = agent_.respond_plain(input ? *input : msg, record_tag(request));
    }
    return out;
  }

 private:
  static bool has_all_headers(std::string_view msg) {
    size_t pos = 0;
    for (const auto& header : step_headers()) {
      size_t at = ifind(msg, header, pos);
      if (at == std::string_view::npos) return false;
      pos = at + header.size();
    }
    return true;
  }

  static std::optional<std::string> quoted_phrase_line(std::string_view msg) {
    for (const auto& raw : split_lines(msg)) {
      std::string_view line = trim(raw);
      if (line.size() < 7 || !iequals(line.substr(0, 7), "phrase:")) continue;
      size_t open = line.find('"');
      if (open == std::string_view::npos) continue;
      size_t close = line.find('"', open + 1);
      if (close == std::string_view::npos) continue;
      return std::string(line.substr(open + 1, close - open - 1));
    }
    return std::nullopt;
  }

  static std::optional<std::string> last_sentence_line(std::string_view msg) {
    auto lines = split_lines(msg);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
      std::string_view line = trim(*it);
      if (line.size() >= 9 && iequals(line.substr(0, 9), "sentence:"))
        return std::string(trim(line.substr(9)));
    }
    return std::nullopt;
  }

  static const std::string& record_tag(const chat_request& request) {
    if (request.request_tag.empty())
      fail(errc::unknown_record, "simulator requests need request_tag set to the record id");
    return request.request_tag;
  }

  poisoned_agent agent_;
};

}  // namespace slip
