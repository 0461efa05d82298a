// Train one federated least-squares problem three ways on the same data,
// coding noise and straggler masks, and print the loss every 250 steps.

#include <cstdio>

#include "acfl/acfl.hpp"

int main() {
  using namespace acfl;

  const std::size_t n = 20;
  const auto ds = generate(n, 50, 10, 10, RngStream(42, "dataset"));
  const ProblemFacts facts = optimum(ds);
  const Matrix w0 = uniform_matrix(RngStream(42, "w0"), 10, 10, 0.0, 1.0 / 30.0);

  const NoiseParams noise = NoiseParams::equal(10.0);
  const auto coded = encode_dataset(ds, noise, RngStream(42, "coding"));
  std::printf("noise sigma^2 = %g  ->  epsilon = %.3f nats\n", noise.sigma1_sq,
              epsilon_of(noise, 10, 10).epsilon);

  TrainingConfig tc;
  tc.straggler = {0.3};
  tc.noise = noise;
  tc.steps = 2000;

  const struct {
    const char* name;
    AggregationPolicy policy;
  } runs[] = {
      {"adaptive", AdaptiveEstimated{}},
      {"fixed 0.5", FixedAlpha{0.5}},
      {"uncoded", FixedAlpha{0.0}},
  };

  std::printf("%6s", "t");
  for (const auto& r : runs) std::printf("  %12s", r.name);
  std::printf("\n");

  std::vector<TrainingTrace> traces;
  for (const auto& r : runs) {
    tc.policy = r.policy;
    traces.push_back(train(ds, coded, tc, w0, RngStream(42, "straggler"), facts));
  }
  for (std::size_t t = 0; t < tc.steps; t += 250) {
    std::printf("%6zu", t);
    for (const auto& tr : traces) std::printf("  %12.5f", tr.records[t].loss);
    std::printf("\n");
  }
  std::printf("%6zu", tc.steps);
  for (const auto& tr : traces) std::printf("  %12.5f", tr.final_loss);
  std::printf("\n");
  std::printf("optimum loss %.5f\n", facts.loss_at_optimum);
}
