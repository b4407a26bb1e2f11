#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stalesim {

/// Analytic evaluation requested for a law that has no closed form here.
class UnsupportedMethodError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A bound's step-size or hypothesis condition does not hold.
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Too few records to form an estimate.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The simulator was not configured to retain what an estimator needs.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration failed validation. Carries every violation found.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace stalesim
