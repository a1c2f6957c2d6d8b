#pragma once

#include <stdexcept>
#include <string>

namespace slip {

enum class errc {
  invalid_label_space,
  duplicate_label,
  invalid_score,
  unknown_label,
  empty_input,
  instance_mismatch,
  invalid_attack,
  missing_topic,
  insufficient_pool,
  unknown_record,
  wrong_prompt,
  backend_unavailable,
  rate_limited,
  cache_miss,
  unscorable,
  invalid_config,
  io_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_label_space: return "invalid-label-space";
    case errc::duplicate_label: return "duplicate-label";
    case errc::invalid_score: return "invalid-score";
    case errc::unknown_label: return "unknown-label";
    case errc::empty_input: return "empty-input";
    case errc::instance_mismatch: return "instance-mismatch";
    case errc::invalid_attack: return "invalid-attack";
    case errc::missing_topic: return "missing-topic";
    case errc::insufficient_pool: return "insufficient-pool";
    case errc::unknown_record: return "unknown-record";
    case errc::wrong_prompt: return "wrong-prompt";
    case errc::backend_unavailable: return "backend-unavailable";
    case errc::rate_limited: return "rate-limited";
    case errc::cache_miss: return "cache-miss";
    case errc::unscorable: return "unscorable";
    case errc::invalid_config: return "invalid-config";
    case errc::io_error: return "io-error";
  }
  return "unknown";
}

/// Exception carrying a stable error code alongside the human-readable message.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace slip
