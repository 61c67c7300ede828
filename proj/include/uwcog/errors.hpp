#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace uwcog {

/// Invalid scenario or model configuration. Carries every violation found.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what), issues_{what} {}
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> issues_;
};

/// Underflow, non-convergence or any result that would otherwise be NaN.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (e.g. decision on an empty buffer).
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace uwcog
