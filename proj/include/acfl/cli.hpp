#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acfl/analysis.hpp"
#include "acfl/config.hpp"
#include "acfl/csv.hpp"
#include "acfl/errors.hpp"
#include "acfl/harness.hpp"
#include "acfl/privacy.hpp"

namespace acfl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

inline void print_paths(std::ostream& out, const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) out << f.string() << '\n';
}

}  // namespace detail

/// Entry point of the `acfl` tool. Results and written file paths go to `out`,
/// usage text and diagnostics to `err`.
inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coded federated learning simulator", "acfl"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> dump_dir;
  auto* run = app.add_subcommand("run", "Train every replicate of a config; writes trace.csv and summary.csv");
  run->add_option("config", config_path, "Config file (JSON)")->required();
  run->add_option("--out", out_dir, "Override output_dir");
  run->add_option("--dump-dataset", dump_dir, "Also write replicate 0's dataset as CSV here");

  auto* compare = app.add_subcommand("compare", "ACFL against the configured baselines on paired seeds");
  compare->add_option("config", config_path, "Config file (JSON)")->required();
  compare->add_option("--out", out_dir, "Override output_dir");

  auto* tradeoff = app.add_subcommand("tradeoff", "Privacy vs. convergence-bound curves");
  tradeoff->add_option("config", config_path, "Config file (JSON)")->required();
  tradeoff->add_option("--out", out_dir, "Override output_dir");

  std::size_t d = 0;
  std::size_t o = 0;
  std::optional<double> sigma_sq;
  std::optional<double> epsilon;
  auto* privacy = app.add_subcommand("privacy", "Convert noise variance to epsilon (nats) or back");
  privacy->add_option("--d", d, "Feature dimension")->required();
  privacy->add_option("--o", o, "Output dimension")->required();
  auto* sigma_opt = privacy->add_option("--sigma-sq", sigma_sq, "Noise variance sigma^2");
  auto* eps_opt = privacy->add_option("--epsilon", epsilon, "Target epsilon in nats");
  sigma_opt->excludes(eps_opt);

  std::uint64_t phi = 0;
  std::uint64_t n = 0;
  std::uint64_t t = 0;
  auto* overhead = app.add_subcommand("overhead", "Communication overhead in bits");
  overhead->add_option("--phi", phi, "Bits per real number")->required();
  overhead->add_option("--d", d, "Feature dimension")->required();
  overhead->add_option("--o", o, "Output dimension")->required();
  overhead->add_option("--n", n, "Number of devices")->required();
  overhead->add_option("--t", t, "Training iterations")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  if (*privacy && !sigma_sq && !epsilon) {
    err << "error: privacy needs --sigma-sq or --epsilon\n\n" << privacy->help();
    return kExitUsage;
  }

  try {
    const auto load = [&] {
      ExperimentConfig cfg = load_config(config_path);
      if (out_dir) {
        cfg.output_dir = *out_dir;
        cfg.validate();
      }
      return cfg;
    };

    if (*run) {
      const ExperimentConfig cfg = load();
      const RunResult res = run_experiment(cfg);
      detail::print_paths(out, res.files);
      if (dump_dir && cfg.replicates > 0) {
        detail::print_paths(out, csv::save_dataset(make_setup(cfg, 0).dataset, *dump_dir));
      }
    } else if (*compare) {
      const ExperimentConfig cfg = load();
      const ComparisonResult res = compare_baselines(cfg, cfg.compare_noise_levels);
      detail::print_paths(out, res.files);
    } else if (*tradeoff) {
      const TradeoffResult res = run_tradeoff(load());
      detail::print_paths(out, res.files);
    } else if (*privacy) {
      if (sigma_sq) {
        const double eps = epsilon_of(NoiseParams::equal(*sigma_sq), d, o).epsilon;
        out << "epsilon_nats=" << csv::format(eps) << '\n';
      } else {
        const double s2 = sigma_for_epsilon(PrivacyLevel{*epsilon}, d, o).sigma1_sq;
        out << "sigma_sq=" << csv::format(s2) << '\n';
      }
    } else if (*overhead) {
      const CommOverhead c = comm_overhead(phi, d, o, n, t);
      out << "psi1=" << c.psi1 << " psi2=" << c.psi2 << " psi_total=" << c.psi_total << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace acfl
