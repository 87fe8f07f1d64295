#pragma once

#include <chrono>
#include <stdexcept>
#include <string>

namespace sot {

// Error families double as process exit codes for the CLI.
enum class ErrorFamily : int {
  config = 1,
  transport = 2,
  parse = 3,
  integrity = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorFamily family, const std::string& what)
      : std::runtime_error(what), family_(family) {}

  ErrorFamily family() const noexcept { return family_; }
  int exit_code() const noexcept { return static_cast<int>(family_); }

 private:
  ErrorFamily family_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorFamily::config, what) {}
};

// Unbound or unknown placeholder in a prompt template.
class TemplateError : public ConfigError {
 public:
  explicit TemplateError(const std::string& what) : ConfigError(what) {}
};

// Malformed input file (dataset, profile, table, script).
class DataError : public ConfigError {
 public:
  explicit DataError(const std::string& what) : ConfigError(what) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what,
                          std::chrono::nanoseconds elapsed = {})
      : Error(ErrorFamily::transport, what), elapsed_(elapsed) {}

  // Time spent before the failure surfaced (zero on virtual clocks).
  std::chrono::nanoseconds elapsed() const noexcept { return elapsed_; }

 private:
  std::chrono::nanoseconds elapsed_;
};

class RateLimited : public TransportError {
 public:
  explicit RateLimited(const std::string& what,
                       std::chrono::nanoseconds elapsed = {})
      : TransportError(what, elapsed) {}
};

// Response arrived but could not be understood.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what)
      : Error(ErrorFamily::transport, what) {}
};

class EmptySkeleton : public Error {
 public:
  explicit EmptySkeleton(std::string raw)
      : Error(ErrorFamily::parse, "skeleton response contains no points"),
        raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what)
      : Error(ErrorFamily::integrity, what) {}
};

}  // namespace sot
