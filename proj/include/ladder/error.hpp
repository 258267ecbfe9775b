#pragma once

#include <stdexcept>
#include <string>

namespace ladder {

/// Raised when inputs violate a documented precondition (bad config, shape mismatch).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot reach its requested accuracy.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace ladder
