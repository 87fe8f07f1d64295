#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "sot/backend.h"

namespace sot::testing {

inline std::filesystem::path data_dir() { return SOT_TEST_DATA_DIR; }

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sot-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline MockEntry contains_entry(std::vector<std::string> needles,
                                std::string response, double decode_rate = 0.0,
                                std::optional<std::size_t> completion_tokens = {},
                                double prefill_rate = 0.0) {
  MockEntry e;
  e.name = needles.empty() ? response : needles.front();
  e.contains = std::move(needles);
  e.response = std::move(response);
  e.decode_seconds_per_token = decode_rate;
  e.prefill_seconds_per_token = prefill_rate;
  e.completion_tokens = completion_tokens;
  return e;
}

inline MockEntry exact_entry(std::string prompt, std::string response,
                             double decode_rate = 0.0,
                             std::optional<std::size_t> completion_tokens = {},
                             double prefill_rate = 0.0) {
  MockEntry e;
  e.name = prompt;
  e.exact = std::move(prompt);
  e.response = std::move(response);
  e.decode_seconds_per_token = decode_rate;
  e.prefill_seconds_per_token = prefill_rate;
  e.completion_tokens = completion_tokens;
  return e;
}

}  // namespace sot::testing
