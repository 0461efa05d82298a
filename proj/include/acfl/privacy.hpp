#pragma once

#include <cmath>
#include <cstddef>

#include "acfl/coding.hpp"
#include "acfl/errors.hpp"

namespace acfl {

/// ε of the ε-MI-DP guarantee, in nats.
struct PrivacyLevel {
  double epsilon = 0.0;
};

namespace detail {

// ln((1 + s) / s) = log1p(1 / s), accurate for large s.
inline double log_ratio(double sigma_sq) { return std::log1p(1.0 / sigma_sq); }

inline void check_dims(std::size_t d, std::size_t o, const char* where) {
  if (d < 1 || o < 1) throw ParameterError(std::string(where) + ": d and o must be >= 1");
}

}  // namespace detail

/// ε = (d − ½)·ln((1+σ₁²)/σ₁²) + (o/2)·ln((1+σ₂²)/σ₂²).
///
/// Either variance may be +infinity, which zeroes its term.
inline PrivacyLevel epsilon_of(const NoiseParams& noise, std::size_t d, std::size_t o) {
  detail::check_dims(d, o, "epsilon_of");
  if (!(noise.sigma1_sq > 0.0) || !(noise.sigma2_sq > 0.0)) {
    throw ParameterError("epsilon_of: epsilon unbounded at zero noise (variances must be > 0)");
  }
  const double dd = static_cast<double>(d);
  const double oo = static_cast<double>(o);
  return {(dd - 0.5) * detail::log_ratio(noise.sigma1_sq) +
          0.5 * oo * detail::log_ratio(noise.sigma2_sq)};
}

/// Inverts epsilon_of on the σ₁² = σ₂² slice: σ² = 1 / expm1(ε / (d − ½ + o/2)).
inline NoiseParams sigma_for_epsilon(PrivacyLevel target, std::size_t d, std::size_t o) {
  detail::check_dims(d, o, "sigma_for_epsilon");
  if (!(target.epsilon > 0.0)) throw ParameterError("sigma_for_epsilon: epsilon must be > 0");
  const double weight = static_cast<double>(d) - 0.5 + 0.5 * static_cast<double>(o);
  const double sigma_sq = 1.0 / std::expm1(target.epsilon / weight);
  return NoiseParams::equal(sigma_sq);
}

}  // namespace acfl
