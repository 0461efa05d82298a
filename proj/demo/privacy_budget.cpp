// For a few privacy budgets, pick the matching coding noise and report the
// best coded-gradient weight and the resulting convergence bound.

#include <cstdio>

#include "acfl/acfl.hpp"

int main() {
  using namespace acfl;

  BoundInputs in;
  in.p = 0.1;
  in.n_devices = 5;
  in.beta_sq = 100.0;
  in.c_sq = 1.0;
  in.d = 100;
  in.o = 10;
  in.lambda = 1.0;
  in.steps = 1000;

  std::printf("%10s  %12s  %10s  %12s  %12s\n", "eps(nats)", "sigma^2", "alpha*", "bound", "fixed 0.5");
  for (double eps : {1.0, 10.0, 100.0, 1000.0}) {
    const NoiseParams noise = sigma_for_epsilon({eps}, in.d, in.o);
    in.sigma1_sq = noise.sigma1_sq;
    in.sigma2_sq = noise.sigma2_sq;
    const double a = alpha_star(in);
    std::printf("%10g  %12.5g  %10.5f  %12.5f  %12.5f\n", eps, noise.sigma1_sq, a,
                convergence_bound(in, u_of(in, a)), convergence_bound(in, u_of(in, 0.5)));
  }

  const CommOverhead c = comm_overhead(32, in.d, in.o, in.n_devices, in.steps);
  std::printf("upload bits: coded data %llu, gradients %llu\n",
              static_cast<unsigned long long>(c.psi1), static_cast<unsigned long long>(c.psi2));
}
