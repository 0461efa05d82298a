#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace acfl {

/// Violated precondition on a caller-supplied value (shape, range, config field).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: factorization breakdown, singular system, integer overflow.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what,
                        std::optional<std::size_t> pivot = std::nullopt)
      : std::runtime_error(what), pivot_(pivot) {}

  // Index of the failing pivot when raised by a factorization.
  std::optional<std::size_t> pivot() const noexcept { return pivot_; }

 private:
  std::optional<std::size_t> pivot_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace acfl
