#pragma once

// Independent checks of the closed-form variance integral: the energy of the
// fundamental solution (time domain), the squared transfer-function magnitude
// integrated over frequency, and a seeded Euler-Maruyama simulation of the
// stochastically forced loop.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "delaykern/execution.hpp"
#include "delaykern/scalar_core.hpp"

namespace delaykern {

/// Fundamental solution x0 on t = 0, h, 2h, ... (x0(0) = 1, zero history on
/// [-T, 0)). energy includes tail_energy, the exponential extrapolation of the
/// signal beyond truncation_time.
struct FundamentalSolution {
  double step = 0.0;
  std::vector<double> values;
  double energy = 0.0;
  double tail_energy = 0.0;
  double truncation_time = 0.0;

  double time(std::size_t i) const noexcept { return step * static_cast<double>(i); }
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

struct OracleReport {
  double f_closed_form = 0.0;
  double f_time_domain = 0.0;
  double f_freq_domain = 0.0;
  double rel_err_time = 0.0;
  double rel_err_freq = 0.0;
};

/// Integrates dx/dt = a x(t) - k x(t - T) by the method of steps with RK4.
/// The delayed midpoint is a cubic Hermite interpolant of the stored solution.
/// h is shrunk to T/m with m even, so delay boundaries fall on Simpson panel
/// edges. Throws DivergenceError if |x0| exceeds 1e9 or the energy over the
/// last tenth of the horizon does not decay.
FundamentalSolution fundamental_solution(const ScalarPlant& plant, double k, double h,
                                         double horizon);

/// (1/2 pi) times the integral over the real line of 1 / |j w - a + k e^{-j T w}|^2.
/// Adaptive Gauss-Kronrod on [0, W] with the 1/w^2 tail added analytically.
/// Throws DomainError if k does not stabilize the plant.
double freq_domain_cost(const ScalarPlant& plant, double k);

/// Time-averaged second moment over the second half of the horizon, averaged
/// over independent Euler-Maruyama paths; each path draws from its own stream
/// derived from (seed, path index), so the result does not depend on the
/// execution policy or thread count.
MonteCarloEstimate monte_carlo_variance(const ScalarPlant& plant, double k, double h,
                                        double horizon, std::size_t paths, std::uint64_t seed,
                                        Execution exec = Execution::parallel);

/// Runs both deterministic oracles against the closed form. The horizon is
/// doubled until the extrapolated tail is below 1e-9 of the energy.
OracleReport cross_check(const ScalarPlant& plant, double k, double h = 1e-2);

}  // namespace delaykern
