#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "slip/dataset.hpp"
#include "slip/error.hpp"

namespace testsupport {

/// Runs f and reports the slip error code it threw, if any.
template <typename F>
std::optional<slip::errc> thrown_code(F&& f) {
  try {
    f();
  } catch (const slip::error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Self-cleaning unique directory under the system temp root.
class temp_dir {
 public:
  explicit temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~temp_dir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

/// Synthetic sentiment corpus. Texts are chosen so no clean record trips any
/// default trigger condition (no 'cf' token, no '@_@', no leading
/// subordinating conjunction).
inline std::vector<slip::record> make_corpus(size_t n,
                                             const std::vector<std::string>& labels = {"Negative",
                                                                                       "Positive"},
                                             const std::vector<std::string>& topics = {}) {
  static const std::vector<std::string> negative_pool = {
      "the plot drags and the jokes fall flat",
      "a tired premise executed without any conviction",
      "the dialogue lands with a thud every single time",
      "an overlong slog that squanders its promising cast",
      "clumsy editing drains whatever tension the story had",
      "the film mistakes loud noises for actual drama",
  };
  static const std::vector<std::string> positive_pool = {
      "a sharp script delivered with real charm",
      "the cast brings warmth and confidence to every scene",
      "an inventive little story that earns its big finish",
      "crisp pacing and a lovely sense of humor throughout",
      "the director balances spectacle and heart beautifully",
      "a generous, observant film with terrific performances",
  };

  std::vector<slip::record> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    slip::record r;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "r%05zu", i + 1);
    r.id = buf;
    r.label = labels[i % labels.size()];
    const auto& pool = (i % labels.size() == 0) ? negative_pool : positive_pool;
    r.text = pool[(i / labels.size()) % pool.size()];
    if (!topics.empty()) r.topic = topics[(i / labels.size()) % topics.size()];
    r.split = "test";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace testsupport
