#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "acfl/coding.hpp"
#include "acfl/dataset.hpp"
#include "acfl/errors.hpp"
#include "acfl/numerics.hpp"

namespace acfl {

// ---------------------------------------------------------------------------
// Stragglers
// ---------------------------------------------------------------------------

/// Each device independently straggles with probability p in every iteration.
struct StragglerModel {
  double p = 0.0;

  void validate() const {
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("StragglerModel: p must lie in [0, 1)");
  }
};

/// present[i] is true when device i responds this iteration.
struct StragglerMask {
  std::vector<bool> present;

  std::size_t size() const noexcept { return present.size(); }
  std::size_t count_present() const noexcept {
    return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
  }
};

/// Device i is present iff its uniform draw is >= p, so p = 0 yields a full mask.
inline StragglerMask sample_stragglers(const StragglerModel& model, std::size_t n,
                                       const RngStream& stream) {
  model.validate();
  StragglerMask mask;
  mask.present.resize(n);
  Generator gen(stream);
  for (std::size_t i = 0; i < n; ++i) mask.present[i] = !gen.bernoulli(model.p);
  return mask;
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// Xᵀ(XW − Y) for one device.
inline Matrix local_gradient(const DeviceData& dev, const Matrix& w) {
  if (w.rows() != dev.features() || w.cols() != dev.outputs()) {
    throw ParameterError("local_gradient: W is " + w.shape_string() + ", expected " +
                         std::to_string(dev.features()) + "x" + std::to_string(dev.outputs()));
  }
  Matrix r = dev.x() * w;
  r -= dev.y();
  return transpose_times(dev.x(), r);
}

/// H̃_X·W − H̃_Y.
inline Matrix coded_gradient(const GlobalCodedData& gc, const Matrix& w) {
  if (w.rows() != gc.h_x_sum.cols() || w.cols() != gc.h_y_sum.cols()) {
    throw ParameterError("coded_gradient: W is " + w.shape_string() + ", expected " +
                         std::to_string(gc.h_x_sum.cols()) + "x" +
                         std::to_string(gc.h_y_sum.cols()));
  }
  Matrix g = gc.h_x_sum * w;
  g -= gc.h_y_sum;
  return g;
}

/// Per-device XᵀX and XᵀY held on the device, so a local gradient costs
/// O(d²o) instead of O(m·d·o). Same value as local_gradient up to rounding.
class DeviceGradientCache {
 public:
  explicit DeviceGradientCache(const DeviceData& dev)
      : xtx_(gram(dev.x())), xty_(transpose_times(dev.x(), dev.y())) {}

  Matrix gradient(const Matrix& w) const {
    Matrix g = xtx_ * w;
    g -= xty_;
    return g;
  }

 private:
  Matrix xtx_;
  Matrix xty_;
};

// ---------------------------------------------------------------------------
// Aggregation weights
// ---------------------------------------------------------------------------

/// Weight on the coded gradient that minimizes the second-moment bound u(α)
/// for known bounds β² on device gradients and C² on the model:
///
///   α = a / (a + N·d·σ₁²·C² + N·σ₂²·o·d),   a = p·N·β² / (1 − p).
///
/// Returns 0 when p = 0 and 1 when both variances are 0 (with p > 0).
inline double alpha_oracle(double p, std::size_t n_devices, double beta_sq, double c_sq,
                           std::size_t d, std::size_t o, const NoiseParams& noise) {
  StragglerModel{p}.validate();
  noise.validate();
  if (!(beta_sq > 0.0) || !(c_sq > 0.0)) {
    throw ParameterError("alpha_oracle: beta_sq and c_sq must be > 0");
  }
  const double n = static_cast<double>(n_devices);
  const double dd = static_cast<double>(d);
  const double oo = static_cast<double>(o);
  const double a = p * n * beta_sq / (1.0 - p);
  if (a == 0.0) return 0.0;
  const double denom = a + n * dd * noise.sigma1_sq * c_sq + n * noise.sigma2_sq * oo * dd;
  return std::clamp(a / denom, 0.0, 1.0);
}

/// Memory carried between iterations by the estimated policy.
struct EstimatorState {
  std::optional<double> last_beta_sq;
};

/// Plug-in version of alpha_oracle, using Ĉ² = ‖W_t‖² and β̂² = mean of
/// ‖G⁽ⁱ⁾‖² over the devices that responded:
///
///   ᾰ = p·β̂² / (p·β̂² + d·σ₁²·Ĉ²·(1 − p) + σ₂²·o·d·(1 − p)).
///
/// `grads` is indexed by device; entries for absent devices are not read.
/// With nobody present the previous β̂² is reused, and before any estimate
/// exists `fallback_alpha` is returned.
inline double alpha_estimated(double p, std::size_t d, std::size_t o, const NoiseParams& noise,
                              const StragglerMask& mask, std::span<const Matrix> grads,
                              const Matrix& w, EstimatorState& state, double fallback_alpha) {
  StragglerModel{p}.validate();
  noise.validate();
  if (grads.size() != mask.size()) {
    throw ParameterError("alpha_estimated: gradient list and mask differ in length");
  }
  std::size_t responded = 0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.present[i]) continue;
    sum_sq += frobenius_norm_sq(grads[i]);
    ++responded;
  }
  if (responded > 0) {
    state.last_beta_sq = sum_sq / static_cast<double>(responded);
  } else if (!state.last_beta_sq) {
    return fallback_alpha;
  }
  const double beta_sq = *state.last_beta_sq;
  const double c_sq = frobenius_norm_sq(w);
  const double dd = static_cast<double>(d);
  const double oo = static_cast<double>(o);
  const double a = p * beta_sq;
  if (a == 0.0) return 0.0;
  const double denom =
      a + dd * noise.sigma1_sq * c_sq * (1.0 - p) + noise.sigma2_sq * oo * dd * (1.0 - p);
  return std::clamp(a / denom, 0.0, 1.0);
}

/// G_All = α·G_S + ((1 − α)/(1 − p))·Σᵢ G⁽ⁱ⁾·Iᵢ, summed in device order.
inline Matrix aggregate(const Matrix& g_s, std::span<const Matrix> local_grads,
                        const StragglerMask& mask, double alpha, double p) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("aggregate: alpha must lie in [0, 1]");
  StragglerModel{p}.validate();
  if (local_grads.size() != mask.size()) {
    throw ParameterError("aggregate: gradient list and mask differ in length");
  }
  Matrix device_sum(g_s.rows(), g_s.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.present[i]) device_sum += local_grads[i];
  }
  Matrix out = g_s * alpha;
  out.add_scaled(device_sum, (1.0 - alpha) / (1.0 - p));
  return out;
}

// ---------------------------------------------------------------------------
// Policies and schedules
// ---------------------------------------------------------------------------

struct FixedAlpha {
  double alpha = 0.5;
};

/// Known bounds β² and C².
struct AdaptiveOracle {
  double beta_sq = 0.0;
  double c_sq = 0.0;
};

struct AdaptiveEstimated {
  double fallback_alpha = 1.0;
};

using AggregationPolicy = std::variant<FixedAlpha, AdaptiveOracle, AdaptiveEstimated>;

inline void validate_policy(const AggregationPolicy& policy) {
  std::visit(
      [](const auto& pol) {
        using T = std::decay_t<decltype(pol)>;
        if constexpr (std::is_same_v<T, FixedAlpha>) {
          if (!(pol.alpha >= 0.0 && pol.alpha <= 1.0))
            throw ParameterError("policy.alpha must lie in [0, 1]");
        } else if constexpr (std::is_same_v<T, AdaptiveOracle>) {
          if (!(pol.beta_sq > 0.0) || !(pol.c_sq > 0.0))
            throw ParameterError("policy.beta_sq and policy.c_sq must be > 0");
        } else {
          if (!(pol.fallback_alpha >= 0.0 && pol.fallback_alpha <= 1.0))
            throw ParameterError("policy.fallback_alpha must lie in [0, 1]");
        }
      },
      policy);
}

/// η_t = c / t (t is 1-based: the first update uses t = 1).
struct PaperDecay {
  double c = 1e-4;
};

/// η_t = 1 / (λ·t).
struct TheoremDecay {
  double lambda = 1.0;
};

using LrSchedule = std::variant<PaperDecay, TheoremDecay>;

inline void validate_schedule(const LrSchedule& schedule) {
  if (const auto* pd = std::get_if<PaperDecay>(&schedule)) {
    if (!(pd->c > 0.0) || !std::isfinite(pd->c)) throw ParameterError("schedule.c must be > 0");
  } else if (const auto* td = std::get_if<TheoremDecay>(&schedule)) {
    if (!(td->lambda > 0.0) || !std::isfinite(td->lambda))
      throw ParameterError("schedule.lambda must be > 0");
  }
}

/// Step size for the update with 1-based index `step`.
inline double learning_rate(const LrSchedule& schedule, std::size_t step) {
  const double t = static_cast<double>(step);
  if (const auto* pd = std::get_if<PaperDecay>(&schedule)) return pd->c / t;
  return 1.0 / (std::get<TheoremDecay>(schedule).lambda * t);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainingConfig {
  AggregationPolicy policy = AdaptiveEstimated{};
  StragglerModel straggler;
  /// Variances the devices encoded with; the server uses them to weight α.
  NoiseParams noise;
  std::size_t steps = 0;
  LrSchedule schedule = PaperDecay{};
  /// Also evaluate stragglers' gradients to record max‖G⁽ⁱ⁾‖² (diagnostics only).
  bool track_bounds = false;
};

struct IterationRecord {
  std::size_t t = 0;
  double alpha_t = 0.0;
  std::size_t n_present = 0;
  double loss = 0.0;          // f(W_t)
  double dist_sq = 0.0;       // ‖W_t − W*‖²
  double grad_norm_sq = 0.0;  // ‖G_All‖²
  double w_norm_sq = 0.0;     // ‖W_t‖²
  /// max over all devices of ‖G⁽ⁱ⁾‖²; only filled when track_bounds is set.
  double max_local_grad_norm_sq = 0.0;
};

struct TrainingTrace {
  std::vector<IterationRecord> records;
  Matrix final_w;
  double final_loss = 0.0;
  double final_dist_sq = 0.0;
  /// FNV-1a digest of every straggler mask consumed, in iteration order.
  std::uint64_t mask_digest = 0;
};

namespace detail {

// f(W) = f(W*) + ½⟨Δ, AΔ⟩ with Δ = W − W* and A = Σ XᵢᵀXᵢ (exact for least squares).
inline double loss_from_facts(const ProblemFacts& facts, const Matrix& delta) {
  return std::max(0.0, facts.loss_at_optimum + 0.5 * frobenius_inner(delta, facts.gram_sum * delta));
}

inline std::uint64_t fnv_bits(std::uint64_t h, const std::vector<bool>& bits) {
  for (bool b : bits) {
    h ^= b ? 1u : 0u;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Runs `cfg.steps` iterations of the second stage starting from `w0`.
///
/// Iteration t draws its straggler mask from stream.child(t), so two runs that
/// share `stream` see identical masks regardless of policy.
inline TrainingTrace train(const FederatedDataset& ds, const GlobalCodedData& gc,
                           const TrainingConfig& cfg, const Matrix& w0, const RngStream& stream,
                           const ProblemFacts& facts) {
  cfg.straggler.validate();
  cfg.noise.validate();
  validate_policy(cfg.policy);
  validate_schedule(cfg.schedule);
  const std::size_t n = ds.size();
  const std::size_t d = ds.features();
  const std::size_t o = ds.outputs();
  if (w0.rows() != d || w0.cols() != o) throw ParameterError("train: w0 has the wrong shape");
  if (gc.h_x_sum.rows() != d || gc.h_x_sum.cols() != d || gc.h_y_sum.rows() != d ||
      gc.h_y_sum.cols() != o) {
    throw ParameterError("train: coded dataset shape does not match the devices");
  }
  if (!facts.w_star.same_shape(w0) || facts.gram_sum.rows() != d) {
    throw ParameterError("train: problem facts do not match the dataset");
  }

  std::vector<DeviceGradientCache> caches;
  caches.reserve(n);
  for (const auto& dev : ds.devices()) caches.emplace_back(dev);

  const double p = cfg.straggler.p;
  std::optional<double> fixed_alpha;
  if (const auto* f = std::get_if<FixedAlpha>(&cfg.policy)) fixed_alpha = f->alpha;
  if (const auto* orc = std::get_if<AdaptiveOracle>(&cfg.policy)) {
    fixed_alpha = alpha_oracle(p, n, orc->beta_sq, orc->c_sq, d, o, cfg.noise);
  }
  const double fallback = std::holds_alternative<AdaptiveEstimated>(cfg.policy)
                              ? std::get<AdaptiveEstimated>(cfg.policy).fallback_alpha
                              : 1.0;

  TrainingTrace trace;
  trace.records.reserve(cfg.steps);
  trace.mask_digest = 0xCBF29CE484222325ULL;
  EstimatorState est;
  Matrix w = w0;
  std::vector<Matrix> grads(n, Matrix(d, o));

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const StragglerMask mask = sample_stragglers(cfg.straggler, n, stream.child(t));
    trace.mask_digest = detail::fnv_bits(trace.mask_digest, mask.present);

    IterationRecord rec;
    rec.t = t;
    rec.n_present = mask.count_present();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask.present[i] || cfg.track_bounds) {
        grads[i] = caches[i].gradient(w);
        if (cfg.track_bounds) {
          rec.max_local_grad_norm_sq =
              std::max(rec.max_local_grad_norm_sq, frobenius_norm_sq(grads[i]));
        }
      }
    }
    const Matrix g_s = coded_gradient(gc, w);
    const double alpha =
        fixed_alpha ? *fixed_alpha
                    : alpha_estimated(p, d, o, cfg.noise, mask, grads, w, est, fallback);
    const Matrix g_all = aggregate(g_s, grads, mask, alpha, p);

    const Matrix delta = w - facts.w_star;
    rec.alpha_t = alpha;
    rec.loss = detail::loss_from_facts(facts, delta);
    rec.dist_sq = frobenius_norm_sq(delta);
    rec.grad_norm_sq = frobenius_norm_sq(g_all);
    rec.w_norm_sq = frobenius_norm_sq(w);
    trace.records.push_back(rec);

    w.add_scaled(g_all, -learning_rate(cfg.schedule, t + 1));
  }

  const Matrix delta = w - facts.w_star;
  trace.final_loss = detail::loss_from_facts(facts, delta);
  trace.final_dist_sq = frobenius_norm_sq(delta);
  trace.final_w = std::move(w);
  return trace;
}

}  // namespace acfl
