#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "acfl/coding.hpp"
#include "acfl/errors.hpp"
#include "acfl/privacy.hpp"
#include "acfl/training.hpp"

namespace acfl {

/// Constants entering the second-moment bound u(α) and the convergence bound.
struct BoundInputs {
  double p = 0.0;
  std::size_t n_devices = 1;
  double beta_sq = 1.0;
  double c_sq = 1.0;
  std::size_t d = 1;
  std::size_t o = 1;
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double lambda = 1.0;
  std::size_t steps = 1;

  NoiseParams noise() const { return {sigma1_sq, sigma2_sq}; }

  void validate() const {
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("BoundInputs.p must lie in [0, 1)");
    if (n_devices < 1 || d < 1 || o < 1) throw ParameterError("BoundInputs: N, d, o must be >= 1");
    if (!(beta_sq > 0.0) || !(c_sq > 0.0)) throw ParameterError("BoundInputs: beta_sq, c_sq must be > 0");
    if (!(sigma1_sq >= 0.0) || !(sigma2_sq >= 0.0))
      throw ParameterError("BoundInputs: variances must be >= 0");
    if (!(lambda > 0.0)) throw ParameterError("BoundInputs.lambda must be > 0");
    if (steps < 1) throw ParameterError("BoundInputs.steps must be >= 1");
  }
};

namespace detail {

// a = p·N·β²/(1 − p)
inline double straggler_weight(const BoundInputs& in) {
  return in.p * static_cast<double>(in.n_devices) * in.beta_sq / (1.0 - in.p);
}

// N·d·σ₁²·C² + N·σ₂²·o·d
inline double noise_weight(const BoundInputs& in) {
  const double n = static_cast<double>(in.n_devices);
  const double d = static_cast<double>(in.d);
  const double o = static_cast<double>(in.o);
  return n * d * in.sigma1_sq * in.c_sq + n * in.sigma2_sq * o * d;
}

}  // namespace detail

/// u(α) = [α²p + (1−p)(α + (1−α)/(1−p))² + N − 1]·N·β² + α²·N·d·σ₁²·C² + α²·N·σ₂²·o·d
inline double u_of(const BoundInputs& in, double alpha) {
  in.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("u_of: alpha must lie in [0, 1]");
  const double n = static_cast<double>(in.n_devices);
  const double p = in.p;
  const double mixed = alpha + (1.0 - alpha) / (1.0 - p);
  const double bracket = alpha * alpha * p + (1.0 - p) * mixed * mixed + n - 1.0;
  return bracket * n * in.beta_sq + alpha * alpha * detail::noise_weight(in);
}

/// α-dependent part of u: û(α) = α²·(a + noise) − 2·a·α with a = p·N·β²/(1−p).
inline double u_hat(const BoundInputs& in, double alpha) {
  in.validate();
  const double a = detail::straggler_weight(in);
  return alpha * alpha * (a + detail::noise_weight(in)) - 2.0 * a * alpha;
}

/// Minimizer of u over [0, 1].
inline double alpha_star(const BoundInputs& in) {
  in.validate();
  return alpha_oracle(in.p, in.n_devices, in.beta_sq, in.c_sq, in.d, in.o, in.noise());
}

/// ũ = min over α of u(α):  −a²/(a + noise) + N·β²/(1−p) + N·β²·(N−1).
inline double u_tilde(const BoundInputs& in) {
  in.validate();
  const double n = static_cast<double>(in.n_devices);
  const double a = detail::straggler_weight(in);
  const double first = a == 0.0 ? 0.0 : a * a / (a + detail::noise_weight(in));
  return -first + n * in.beta_sq / (1.0 - in.p) + n * in.beta_sq * (n - 1.0);
}

/// 4·u_sup / (λ²·T): bound on E‖W_T − W*‖² under η_t = 1/(λt).
inline double convergence_bound(const BoundInputs& in, double u_sup) {
  in.validate();
  if (!(u_sup > 0.0)) throw ParameterError("convergence_bound: u_sup must be > 0");
  return 4.0 * u_sup / (in.lambda * in.lambda * static_cast<double>(in.steps));
}

// ---------------------------------------------------------------------------
// Privacy / learning trade-off
// ---------------------------------------------------------------------------

struct AdaptiveWeight {};

using TradeoffPolicy = std::variant<FixedAlpha, AdaptiveWeight>;

struct TradeoffPoint {
  double sigma_sq = 0.0;
  double epsilon = 0.0;  // nats
  double alpha = 0.0;
  double u = 0.0;
  double bound = 0.0;
};

/// One point per σ² (σ₁² = σ₂² = σ²): privacy level against convergence bound.
inline std::vector<TradeoffPoint> tradeoff_curve(const BoundInputs& base,
                                                 std::span<const double> sigma_grid,
                                                 const TradeoffPolicy& policy) {
  if (sigma_grid.empty()) throw ParameterError("tradeoff_curve: empty sigma grid");
  std::vector<TradeoffPoint> out;
  out.reserve(sigma_grid.size());
  for (double s : sigma_grid) {
    if (!(s > 0.0)) throw ParameterError("tradeoff_curve: grid variances must be > 0");
    BoundInputs in = base;
    in.sigma1_sq = in.sigma2_sq = s;
    TradeoffPoint pt;
    pt.sigma_sq = s;
    pt.epsilon = epsilon_of(in.noise(), in.d, in.o).epsilon;
    if (const auto* f = std::get_if<FixedAlpha>(&policy)) {
      pt.alpha = f->alpha;
      pt.u = u_of(in, f->alpha);
    } else {
      pt.alpha = alpha_star(in);
      pt.u = u_tilde(in);
    }
    pt.bound = convergence_bound(in, pt.u);
    out.push_back(pt);
  }
  return out;
}

/// `points` values spaced evenly in log10 between lo and hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ParameterError("log_grid: need 0 < lo <= hi");
  if (points < 1) throw ParameterError("log_grid: need at least one point");
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t k = 0; k < points; ++k) {
    g[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

// ---------------------------------------------------------------------------
// Communication
// ---------------------------------------------------------------------------

/// Uploaded bits: ψ₁ for the coded datasets, ψ₂ for T rounds of gradients.
struct CommOverhead {
  std::uint64_t psi1 = 0;
  std::uint64_t psi2 = 0;
  std::uint64_t psi_total = 0;
};

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw NumericError("comm_overhead: integer overflow");
  return r;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw NumericError("comm_overhead: integer overflow");
  return r;
}

}  // namespace detail

/// ψ₁ = φ·(d² + o·d)·N,  ψ₂ = φ·T·o·d·N,  ψ = ψ₁ + ψ₂.
inline CommOverhead comm_overhead(std::uint64_t phi_bits, std::uint64_t d, std::uint64_t o,
                                  std::uint64_t n_devices, std::uint64_t steps) {
  if (phi_bits == 0 || d == 0 || o == 0 || n_devices == 0) {
    throw ParameterError("comm_overhead: phi, d, o and n must be positive");
  }
  using detail::checked_add;
  using detail::checked_mul;
  const std::uint64_t od = checked_mul(o, d);
  CommOverhead c;
  c.psi1 = checked_mul(checked_mul(phi_bits, checked_add(checked_mul(d, d), od)), n_devices);
  c.psi2 = checked_mul(checked_mul(checked_mul(phi_bits, steps), od), n_devices);
  c.psi_total = checked_add(c.psi1, c.psi2);
  return c;
}

}  // namespace acfl
