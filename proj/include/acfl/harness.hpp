#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <tuple>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "acfl/analysis.hpp"
#include "acfl/coding.hpp"
#include "acfl/config.hpp"
#include "acfl/csv.hpp"
#include "acfl/dataset.hpp"
#include "acfl/errors.hpp"
#include "acfl/numerics.hpp"
#include "acfl/training.hpp"

namespace acfl {

// ---------------------------------------------------------------------------
// Replicates
// ---------------------------------------------------------------------------

/// Independent streams for replicate r of a run seeded with `seed`.
struct ReplicateStreams {
  RngStream dataset;
  RngStream w0;
  RngStream coding;
  RngStream straggler;

  ReplicateStreams(std::uint64_t seed, std::uint64_t r)
      : dataset(seed, "dataset", {r}),
        w0(seed, "w0", {r}),
        coding(seed, "coding", {r}),
        straggler(seed, "straggler", {r}) {}
};

/// Everything about a replicate that does not depend on noise or policy.
struct ReplicateSetup {
  FederatedDataset dataset;
  ProblemFacts facts;
  Matrix w0;
};

inline ReplicateSetup make_setup(const ExperimentConfig& cfg, std::uint64_t r) {
  const ReplicateStreams s(cfg.seed, r);
  FederatedDataset ds =
      generate(cfg.n_devices, cfg.samples_per_device, cfg.d, cfg.o, s.dataset, cfg.label_noise_var);
  ProblemFacts facts = optimum(ds);
  Matrix w0 = uniform_matrix(s.w0, cfg.d, cfg.o, 0.0, 1.0 / 30.0);
  return {std::move(ds), std::move(facts), std::move(w0)};
}

namespace detail {

inline std::uint64_t fnv_bytes(std::uint64_t h, std::span<const double> values) {
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

inline constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;

}  // namespace detail

inline std::uint64_t digest(const FederatedDataset& ds) {
  std::uint64_t h = detail::kFnvOffset;
  for (const auto& dev : ds.devices()) {
    h = detail::fnv_bytes(h, dev.x().data());
    h = detail::fnv_bytes(h, dev.y().data());
  }
  return h;
}

inline std::uint64_t digest(const GlobalCodedData& gc) {
  std::uint64_t h = detail::kFnvOffset;
  h = detail::fnv_bytes(h, gc.h_x_sum.data());
  return detail::fnv_bytes(h, gc.h_y_sum.data());
}

inline LrSchedule make_schedule(const ScheduleSpec& spec, const ProblemFacts& facts) {
  if (spec.kind == ScheduleSpec::Kind::paper_decay) return PaperDecay{spec.c};
  return TheoremDecay{spec.lambda.value_or(facts.lambda)};
}

/// Result of deriving β², C² for the oracle policy from observed trajectories.
struct OracleBounds {
  double beta_sq = 0.0;
  double c_sq = 0.0;
  /// True when the final oracle run stayed within the bounds it was given.
  bool post_hoc_valid = false;
};

namespace detail {

inline void observed_maxima(const TrainingTrace& tr, double& beta_sq, double& c_sq) {
  for (const auto& rec : tr.records) {
    beta_sq = std::max(beta_sq, rec.max_local_grad_norm_sq);
    c_sq = std::max(c_sq, rec.w_norm_sq);
  }
}

}  // namespace detail

/// Heuristic defaults for AdaptiveOracle: a dry run with the estimated policy
/// supplies max‖G⁽ⁱ⁾‖² and max‖W_t‖², inflated by `headroom`. The oracle is
/// then re-run, enlarging the bounds the same way, until its own trajectory
/// stays within them (at most `max_rounds` re-runs).
inline OracleBounds derive_oracle_bounds(const FederatedDataset& ds, const GlobalCodedData& gc,
                                         TrainingConfig cfg, const Matrix& w0,
                                         const RngStream& straggler_stream,
                                         const ProblemFacts& facts, double headroom = 1.1,
                                         int max_rounds = 8) {
  cfg.track_bounds = true;
  cfg.policy = AdaptiveEstimated{};
  OracleBounds b;
  detail::observed_maxima(train(ds, gc, cfg, w0, straggler_stream, facts), b.beta_sq, b.c_sq);
  // Zero bounds are degenerate (e.g. T = 0 or W ≡ 0); keep them strictly positive.
  b.beta_sq = std::max(b.beta_sq * headroom, std::numeric_limits<double>::min());
  b.c_sq = std::max(b.c_sq * headroom, std::numeric_limits<double>::min());
  for (int round = 0; round < max_rounds; ++round) {
    cfg.policy = AdaptiveOracle{b.beta_sq, b.c_sq};
    double beta_seen = 0.0;
    double c_seen = 0.0;
    detail::observed_maxima(train(ds, gc, cfg, w0, straggler_stream, facts), beta_seen, c_seen);
    if (beta_seen <= b.beta_sq && c_seen <= b.c_sq) {
      b.post_hoc_valid = true;
      break;
    }
    b.beta_sq = std::max(b.beta_sq, beta_seen * headroom);
    b.c_sq = std::max(b.c_sq, c_seen * headroom);
  }
  return b;
}

/// One trained replicate plus the digests that pin down its random inputs.
struct ReplicateOutcome {
  std::uint64_t replicate = 0;
  TrainingTrace trace;
  AggregationPolicy policy;
  std::uint64_t dataset_digest = 0;
  std::uint64_t coded_digest = 0;
};

inline TrainingConfig base_training_config(const ExperimentConfig& cfg, const NoiseParams& noise,
                                           const ProblemFacts& facts) {
  TrainingConfig tc;
  tc.straggler = StragglerModel{cfg.straggler_p};
  tc.noise = noise;
  tc.steps = cfg.steps;
  tc.schedule = make_schedule(cfg.schedule, facts);
  return tc;
}

inline AggregationPolicy resolve_policy(const PolicySpec& spec, const ReplicateSetup& setup,
                                        const GlobalCodedData& gc, const TrainingConfig& tc,
                                        const RngStream& straggler_stream) {
  switch (spec.kind) {
    case PolicySpec::Kind::fixed:
      return FixedAlpha{spec.alpha};
    case PolicySpec::Kind::adaptive_estimated:
      return AdaptiveEstimated{spec.fallback_alpha};
    case PolicySpec::Kind::adaptive_oracle:
      break;
  }
  if (spec.beta_sq && spec.c_sq) return AdaptiveOracle{*spec.beta_sq, *spec.c_sq};
  const OracleBounds b =
      derive_oracle_bounds(setup.dataset, gc, tc, setup.w0, straggler_stream, setup.facts);
  return AdaptiveOracle{spec.beta_sq.value_or(b.beta_sq), spec.c_sq.value_or(b.c_sq)};
}

/// Encodes and trains replicate r with the given policy and noise.
inline ReplicateOutcome run_replicate(const ExperimentConfig& cfg, std::uint64_t r,
                                      const ReplicateSetup& setup, const PolicySpec& policy,
                                      const NoiseParams& noise) {
  const ReplicateStreams s(cfg.seed, r);
  const GlobalCodedData gc = encode_dataset(setup.dataset, noise, s.coding);
  TrainingConfig tc = base_training_config(cfg, noise, setup.facts);
  tc.policy = resolve_policy(policy, setup, gc, tc, s.straggler);
  ReplicateOutcome out;
  out.replicate = r;
  out.trace = train(setup.dataset, gc, tc, setup.w0, s.straggler, setup.facts);
  out.policy = tc.policy;
  out.dataset_digest = digest(setup.dataset);
  out.coded_digest = digest(gc);
  return out;
}

/// Runs fn(0..count-1) on up to `threads` workers (0 = hardware concurrency).
/// Each index is processed exactly once; the first exception is rethrown.
inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t k = next.fetch_add(1);
        if (k >= count) return;
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

struct SummaryRow {
  std::size_t t = 0;
  double mean_loss = 0.0;
  double stderr_loss = 0.0;
  double mean_dist_sq = 0.0;
  double stderr_dist_sq = 0.0;
};

struct RunResult {
  std::vector<ReplicateOutcome> replicates;
  std::vector<SummaryRow> summary;
  std::vector<std::filesystem::path> files;
};

inline const std::vector<std::string> kTraceHeader{"replicate", "t",    "alpha_t",     "n_present",
                                                   "loss",      "dist_sq", "grad_norm_sq"};
inline const std::vector<std::string> kSummaryHeader{"t", "mean_loss", "stderr_loss",
                                                     "mean_dist_sq", "stderr_dist_sq"};
inline const std::vector<std::string> kTradeoffHeader{"sigma_sq", "epsilon_nats", "alpha", "u",
                                                      "bound"};
inline const std::vector<std::string> kComparisonHeader{"noise_sigma_sq", "method", "seed",
                                                        "final_loss"};

namespace detail {

// Mean and standard error (sample sd / √R; 0 for a single value), summed in index order.
inline std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : ""));
  }
}

}  // namespace detail

/// Per-iteration mean/stderr of loss and distance across replicates.
inline std::vector<SummaryRow> summarize(const std::vector<ReplicateOutcome>& reps) {
  std::vector<SummaryRow> rows;
  if (reps.empty()) return rows;
  const std::size_t steps = reps.front().trace.records.size();
  rows.reserve(steps);
  std::vector<double> losses(reps.size());
  std::vector<double> dists(reps.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t r = 0; r < reps.size(); ++r) {
      losses[r] = reps[r].trace.records[t].loss;
      dists[r] = reps[r].trace.records[t].dist_sq;
    }
    SummaryRow row;
    row.t = t;
    std::tie(row.mean_loss, row.stderr_loss) = detail::mean_stderr(losses);
    std::tie(row.mean_dist_sq, row.stderr_dist_sq) = detail::mean_stderr(dists);
    rows.push_back(row);
  }
  return rows;
}

inline std::filesystem::path write_trace_csv(const std::filesystem::path& path,
                                             const std::vector<ReplicateOutcome>& reps) {
  csv::Writer w(path, kTraceHeader);
  for (const auto& rep : reps) {
    for (const auto& rec : rep.trace.records) {
      w.cells(static_cast<std::size_t>(rep.replicate), rec.t, rec.alpha_t, rec.n_present,
              rec.loss, rec.dist_sq, rec.grad_norm_sq);
    }
  }
  w.close();
  return path;
}

inline std::filesystem::path write_summary_csv(const std::filesystem::path& path,
                                               const std::vector<SummaryRow>& rows) {
  csv::Writer w(path, kSummaryHeader);
  for (const auto& r : rows) {
    w.cells(r.t, r.mean_loss, r.stderr_loss, r.mean_dist_sq, r.stderr_dist_sq);
  }
  w.close();
  return path;
}

/// Runs every replicate of `cfg` and writes trace.csv and summary.csv into
/// cfg.output_dir. Output bytes depend only on the config, not on `threads`.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::filesystem::path dir(cfg.output_dir);
  detail::ensure_dir(dir);
  const NoiseParams noise = cfg.resolved_noise();

  RunResult result;
  result.replicates.resize(cfg.replicates);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    const ReplicateSetup setup = make_setup(cfg, r);
    result.replicates[r] = run_replicate(cfg, r, setup, cfg.policy, noise);
  });
  result.summary = summarize(result.replicates);
  result.files.push_back(write_trace_csv(dir / "trace.csv", result.replicates));
  result.files.push_back(write_summary_csv(dir / "summary.csv", result.summary));
  return result;
}

// ---------------------------------------------------------------------------
// compare_baselines
// ---------------------------------------------------------------------------

inline constexpr const char* kAcflName = "ACFL";

struct ComparisonEntry {
  double noise_sigma_sq = 0.0;
  std::string method;
  std::uint64_t seed = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::uint64_t dataset_digest = 0;
  std::uint64_t coded_digest = 0;
  std::uint64_t mask_digest = 0;
};

struct WinRate {
  double noise_sigma_sq = 0.0;
  std::string baseline;
  /// Fraction of seeds where ACFL's final loss is <= the baseline's.
  double acfl_win_rate = 0.0;
  double mean_final_loss_acfl = 0.0;
  double mean_final_loss_baseline = 0.0;
};

struct ComparisonResult {
  /// Ordered by noise level, then method (ACFL first, then baselines), then seed.
  std::vector<ComparisonEntry> entries;
  std::vector<WinRate> win_rates;
  std::vector<std::filesystem::path> files;

  std::vector<const ComparisonEntry*> select(double noise, const std::string& method) const {
    std::vector<const ComparisonEntry*> out;
    for (const auto& e : entries)
      if (e.noise_sigma_sq == noise && e.method == method) out.push_back(&e);
    return out;
  }
};

/// ACFL (estimated adaptive weights) against each configured baseline on
/// paired seeds: for seed r every method sees the same dataset, W₀, coding
/// noise and straggler masks. Noise levels set σ₁² = σ₂².
inline ComparisonResult compare_baselines(const ExperimentConfig& cfg,
                                          const std::vector<double>& noise_levels) {
  cfg.validate();
  if (noise_levels.empty()) throw ParameterError("compare_baselines: need at least one noise level");
  for (double s : noise_levels) {
    if (!(s >= 0.0) || !std::isfinite(s))
      throw ParameterError("compare_baselines: noise levels must be finite and >= 0");
  }
  const std::filesystem::path dir(cfg.output_dir);
  detail::ensure_dir(dir);

  std::vector<std::pair<std::string, PolicySpec>> methods;
  methods.emplace_back(kAcflName, PolicySpec{PolicySpec::Kind::adaptive_estimated, 0.5,
                                             std::nullopt, std::nullopt,
                                             cfg.policy.kind == PolicySpec::Kind::adaptive_estimated
                                                 ? cfg.policy.fallback_alpha
                                                 : 1.0});
  for (const auto& b : cfg.baselines) methods.emplace_back(b.name, b.policy);

  const std::size_t n_noise = noise_levels.size();
  const std::size_t n_methods = methods.size();
  const std::size_t n_seeds = cfg.replicates;
  // slot(k, m, r) = (k·M + m)·R + r
  std::vector<ComparisonEntry> entries(n_noise * n_methods * n_seeds);

  parallel_for(n_seeds, cfg.threads, [&](std::size_t r) {
    const ReplicateSetup setup = make_setup(cfg, r);
    for (std::size_t k = 0; k < n_noise; ++k) {
      const NoiseParams noise = NoiseParams::equal(noise_levels[k]);
      for (std::size_t m = 0; m < n_methods; ++m) {
        const ReplicateOutcome rep = run_replicate(cfg, r, setup, methods[m].second, noise);
        ComparisonEntry& e = entries[(k * n_methods + m) * n_seeds + r];
        e.noise_sigma_sq = noise_levels[k];
        e.method = methods[m].first;
        e.seed = r;
        e.initial_loss = rep.trace.records.empty() ? rep.trace.final_loss
                                                   : rep.trace.records.front().loss;
        e.final_loss = rep.trace.final_loss;
        e.dataset_digest = rep.dataset_digest;
        e.coded_digest = rep.coded_digest;
        e.mask_digest = rep.trace.mask_digest;
      }
    }
  });

  ComparisonResult result;
  result.entries = std::move(entries);
  for (std::size_t k = 0; k < n_noise; ++k) {
    for (std::size_t m = 1; m < n_methods; ++m) {
      WinRate wr;
      wr.noise_sigma_sq = noise_levels[k];
      wr.baseline = methods[m].first;
      std::size_t wins = 0;
      for (std::size_t r = 0; r < n_seeds; ++r) {
        const auto& a = result.entries[(k * n_methods) * n_seeds + r];
        const auto& b = result.entries[(k * n_methods + m) * n_seeds + r];
        if (a.final_loss <= b.final_loss) ++wins;
        wr.mean_final_loss_acfl += a.final_loss;
        wr.mean_final_loss_baseline += b.final_loss;
      }
      const double n = static_cast<double>(n_seeds);
      wr.acfl_win_rate = static_cast<double>(wins) / n;
      wr.mean_final_loss_acfl /= n;
      wr.mean_final_loss_baseline /= n;
      result.win_rates.push_back(wr);
    }
  }

  {
    csv::Writer w(dir / "comparison.csv", kComparisonHeader);
    for (const auto& e : result.entries) {
      w.cells(e.noise_sigma_sq, e.method, static_cast<std::size_t>(e.seed), e.final_loss);
    }
    w.close();
    result.files.push_back(w.path());
  }
  {
    csv::Writer w(dir / "comparison_summary.csv",
                  {"noise_sigma_sq", "baseline", "acfl_win_rate", "mean_final_loss_acfl",
                   "mean_final_loss_baseline"});
    for (const auto& wr : result.win_rates) {
      w.cells(wr.noise_sigma_sq, wr.baseline, wr.acfl_win_rate, wr.mean_final_loss_acfl,
              wr.mean_final_loss_baseline);
    }
    w.close();
    result.files.push_back(w.path());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trade-off curves
// ---------------------------------------------------------------------------

inline BoundInputs tradeoff_inputs(const ExperimentConfig& cfg) {
  BoundInputs in;
  in.p = cfg.straggler_p;
  in.n_devices = cfg.n_devices;
  in.beta_sq = cfg.tradeoff.beta_sq;
  in.c_sq = cfg.tradeoff.c_sq;
  in.d = cfg.d;
  in.o = cfg.o;
  in.lambda = cfg.tradeoff.lambda;
  in.steps = cfg.steps;
  return in;
}

struct TradeoffResult {
  std::vector<TradeoffPoint> adaptive;
  std::vector<std::pair<double, std::vector<TradeoffPoint>>> fixed;
  std::vector<std::filesystem::path> files;
};

inline std::filesystem::path write_tradeoff_csv(const std::filesystem::path& path,
                                                const std::vector<TradeoffPoint>& pts) {
  csv::Writer w(path, kTradeoffHeader);
  for (const auto& p : pts) w.cells(p.sigma_sq, p.epsilon, p.alpha, p.u, p.bound);
  w.close();
  return path;
}

/// Adaptive curve to tradeoff.csv and one tradeoff_fixed_alpha_<α>.csv per fixed weight.
inline TradeoffResult run_tradeoff(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.steps < 1) throw ParameterError("config: steps: must be >= 1 for the convergence bound");
  const std::filesystem::path dir(cfg.output_dir);
  detail::ensure_dir(dir);
  const BoundInputs base = tradeoff_inputs(cfg);
  const std::vector<double> grid =
      log_grid(cfg.tradeoff.sigma_min, cfg.tradeoff.sigma_max, cfg.tradeoff.sigma_points);

  TradeoffResult res;
  res.adaptive = tradeoff_curve(base, grid, AdaptiveWeight{});
  res.files.push_back(write_tradeoff_csv(dir / "tradeoff.csv", res.adaptive));
  for (double a : cfg.tradeoff.fixed_alphas) {
    auto curve = tradeoff_curve(base, grid, FixedAlpha{a});
    char name[64];
    std::snprintf(name, sizeof(name), "tradeoff_fixed_alpha_%.2f.csv", a);
    res.files.push_back(write_tradeoff_csv(dir / name, curve));
    res.fixed.emplace_back(a, std::move(curve));
  }
  return res;
}

}  // namespace acfl
