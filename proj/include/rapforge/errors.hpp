#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rapforge {

// Invalid numeric input (non-positive box extent, empty GT where one is required, gt = 0 in F).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Rejected configuration: threshold ordering, alpha <= 0, bad step size...
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A detector adapter or capability is not available (missing weights, no gradients).
class UnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset validation failed; carries the identifiers of every offending sample.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::vector<std::string> offenders)
      : std::runtime_error(what + format_offenders(offenders)), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  static std::string format_offenders(const std::vector<std::string>& offenders) {
    std::string out;
    for (const auto& o : offenders) out += (out.empty() ? ": " : ", ") + o;
    return out;
  }

  std::vector<std::string> offenders_;
};

}  // namespace rapforge
