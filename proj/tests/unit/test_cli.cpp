#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "acfl/cli.hpp"
#include "helpers.hpp"

using acfl::testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "acfl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = acfl::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, PrivacyFromVariance) {
  const Outcome o = invoke({"privacy", "--d", "10", "--o", "10", "--sigma-sq", "1"});
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out.rfind("epsilon_nats=10.050634", 0), 0u) << o.out;
}

TEST(Cli, PrivacyFromEpsilon) {
  const Outcome o = invoke({"privacy", "--d", "10", "--o", "10", "--epsilon", "10.050634118119207"});
  EXPECT_EQ(o.code, 0);
  ASSERT_EQ(o.out.rfind("sigma_sq=", 0), 0u);
  EXPECT_NEAR(std::stod(o.out.substr(9)), 1.0, 1e-12);
}

TEST(Cli, PrivacyNeedsExactlyOneQuantity) {
  EXPECT_EQ(invoke({"privacy", "--d", "10", "--o", "10"}).code, 1);
  EXPECT_EQ(invoke({"privacy", "--d", "10", "--o", "10", "--sigma-sq", "1", "--epsilon", "2"}).code, 1);
}

TEST(Cli, PrivacyDomainErrorIsRuntimeError) {
  const Outcome o = invoke({"privacy", "--d", "10", "--o", "10", "--sigma-sq", "0"});
  EXPECT_EQ(o.code, 2);
  EXPECT_TRUE(o.out.empty());
  EXPECT_NE(o.err.find("unbounded"), std::string::npos);
}

TEST(Cli, Overhead) {
  const Outcome o = invoke({"overhead", "--phi", "32", "--d", "10", "--o", "10", "--n", "100", "--t", "1000"});
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out, "psi1=640000 psi2=320000000 psi_total=320640000\n");
}

TEST(Cli, UsageErrors) {
  const Outcome none = invoke({});
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.err.find("Usage"), std::string::npos);
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({"overhead", "--phi", "32", "--bogus", "1"}).code, 1);
  EXPECT_EQ(invoke({"run"}).code, 1);
  EXPECT_EQ(invoke({"overhead", "--phi", "x", "--d", "1", "--o", "1", "--n", "1", "--t", "1"}).code, 1);
}

TEST(Cli, MissingConfigIsRuntimeError) {
  const Outcome o = invoke({"run", "/nonexistent/config.json"});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("cannot open"), std::string::npos);
}

TEST(Cli, RunCompareTradeoffPrintPaths) {
  TempDir tmp("cli-run");
  const auto cfg = tmp.path() / "c.json";
  std::ofstream(cfg) << R"({"dataset": {"n_devices": 3, "samples_per_device": 6, "d": 2, "o": 2},
    "steps": 10, "replicates": 2, "schedule": {"kind": "theorem"},
    "output_dir": ")" << (tmp.path() / "out").string() << R"(",
    "compare": {"noise_levels": [1.0]},
    "tradeoff": {"sigma_grid": {"min": 0.1, "max": 10, "points": 3}, "fixed_alphas": [0.5]}})";

  const Outcome run = invoke({"run", cfg.string(), "--dump-dataset", (tmp.path() / "data").string()});
  EXPECT_EQ(run.code, 0) << run.err;
  EXPECT_NE(run.out.find("trace.csv"), std::string::npos);
  EXPECT_NE(run.out.find("summary.csv"), std::string::npos);
  EXPECT_NE(run.out.find("device_0000.csv"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "out" / "trace.csv"));

  const Outcome cmp = invoke({"compare", cfg.string(), "--out", (tmp.path() / "cmp").string()});
  EXPECT_EQ(cmp.code, 0) << cmp.err;
  EXPECT_NE(cmp.out.find("comparison.csv"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "cmp" / "comparison.csv"));

  const Outcome tr = invoke({"tradeoff", cfg.string()});
  EXPECT_EQ(tr.code, 0) << tr.err;
  EXPECT_NE(tr.out.find("tradeoff.csv"), std::string::npos);
  EXPECT_NE(tr.out.find("tradeoff_fixed_alpha_0.50.csv"), std::string::npos);
}

TEST(Cli, InvalidConfigIsRuntimeErrorWithFieldPath) {
  TempDir tmp("cli-invalid");
  const auto cfg = tmp.path() / "c.json";
  std::ofstream(cfg) << R"({"straggler_p": 2})";
  const Outcome o = invoke({"run", cfg.string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("straggler_p"), std::string::npos);
}
