#include "delaykern/dde_oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "delaykern/errors.hpp"

namespace delaykern {
namespace {

constexpr double kDivergenceLevel = 1e9;

void require_stabilizing(const ScalarPlant& plant, double k) {
  plant.validate();
  if (!plant.stabilizable() || !stability_interval(plant).contains(k)) {
    std::ostringstream os;
    os.precision(17);
    os << "gain " << k << " does not stabilize (a=" << plant.a << ", T=" << plant.T << ")";
    throw DomainError(os.str());
  }
}

// Composite Simpson for samples[first..last] (last - first even).
double simpson_energy(std::span<const double> x, std::size_t first, std::size_t last, double h) {
  double sum = x[first] * x[first] + x[last] * x[last];
  for (std::size_t i = first + 1; i < last; ++i) {
    sum += (i - first) % 2 == 1 ? 4.0 * x[i] * x[i] : 2.0 * x[i] * x[i];
  }
  return sum * h / 3.0;
}

[[noreturn]] void diverged(double t) {
  std::ostringstream os;
  os << "fundamental solution exceeded " << kDivergenceLevel << " at t=" << t;
  throw DivergenceError(os.str());
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

FundamentalSolution fundamental_solution(const ScalarPlant& plant, double k, double h,
                                         double horizon) {
  plant.validate();
  if (!(h > 0.0) || !(horizon > 0.0)) throw DomainError("step and horizon must be positive");
  const double a = plant.a;
  const double T = plant.T;

  std::size_t lag = 0;
  if (T > 0.0) {
    lag = static_cast<std::size_t>(std::ceil(T / h - 1e-9));
    lag += lag % 2;
    h = T / static_cast<double>(lag);
  }
  auto steps = static_cast<std::size_t>(std::ceil(horizon / h - 1e-9));
  steps = std::max<std::size_t>(steps + steps % 2, 20);

  FundamentalSolution out;
  out.step = h;
  out.truncation_time = h * static_cast<double>(steps);
  auto& x = out.values;
  x.assign(steps + 1, 0.0);
  x[0] = 1.0;

  if (T == 0.0) {
    const double rate = a - k;
    for (std::size_t n = 0; n < steps; ++n) {
      const double k1 = rate * x[n];
      const double k2 = rate * (x[n] + 0.5 * h * k1);
      const double k3 = rate * (x[n] + 0.5 * h * k2);
      const double k4 = rate * (x[n] + h * k3);
      x[n + 1] = x[n] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!(std::abs(x[n + 1]) <= kDivergenceLevel)) diverged(out.time(n + 1));
    }
  } else {
    // Slopes at both ends of every step; they differ at multiples of T where
    // the delayed signal has a kink.
    std::vector<double> slope_start(steps, 0.0);
    std::vector<double> slope_end(steps, 0.0);
    for (std::size_t n = 0; n < steps; ++n) {
      double d0 = 0.0;
      double dmid = 0.0;
      double d1 = 0.0;
      if (n >= lag) {
        const std::size_t j = n - lag;
        d0 = x[j];
        d1 = x[j + 1];
        dmid = 0.5 * (d0 + d1) + h * (slope_start[j] - slope_end[j]) / 8.0;
      }
      const double k1 = a * x[n] - k * d0;
      const double k2 = a * (x[n] + 0.5 * h * k1) - k * dmid;
      const double k3 = a * (x[n] + 0.5 * h * k2) - k * dmid;
      const double k4 = a * (x[n] + h * k3) - k * d1;
      x[n + 1] = x[n] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      slope_start[n] = k1;
      slope_end[n] = a * x[n + 1] - k * d1;
      if (!(std::abs(x[n + 1]) <= kDivergenceLevel)) diverged(out.time(n + 1));
    }
  }

  const double body = simpson_energy(x, 0, steps, h);

  // Tail: compare the energy in the last two tenths of the horizon and
  // continue the observed geometric decay.
  std::size_t window = std::max<std::size_t>(steps / 10, 2);
  window += window % 2;
  const double last = simpson_energy(x, steps - window, steps, h);
  const double prev = simpson_energy(x, steps - 2 * window, steps - window, h);
  double tail = 0.0;
  if (last > 0.0) {
    const double ratio = last / prev;
    if (!(ratio < 1.0)) {
      std::ostringstream os;
      os << "fundamental solution does not decay over the horizon " << out.truncation_time;
      throw DivergenceError(os.str());
    }
    tail = last * ratio / (1.0 - ratio);
  }
  out.tail_energy = tail;
  out.energy = body + tail;
  return out;
}

double freq_domain_cost(const ScalarPlant& plant, double k) {
  require_stabilizing(plant, k);
  const double a = plant.a;
  const double T = plant.T;
  auto integrand = [a, k, T](double w) {
    const double re = -a + k * std::cos(T * w);
    const double im = w - k * std::sin(T * w);
    return 1.0 / (re * re + im * im);
  };

  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double cutoff = std::max(1e4, 1e3 * (std::abs(a) + std::abs(k)));
  const double period = T > 0.0 ? std::numbers::pi / T : std::numeric_limits<double>::infinity();

  double total = 0.0;
  double lo = 0.0;
  while (lo < cutoff) {
    // Unit panels resolve the resonance near the origin; further out the
    // panels follow the oscillation period of the delay term, or grow
    // geometrically when there is none.
    double len = lo < 100.0 ? std::min(1.0, period) : std::min(period, lo);
    const double hi = std::min(cutoff, lo + len);
    total += Quad::integrate(integrand, lo, hi, 15, 1e-13);
    lo = hi;
  }
  // Beyond the cutoff, 1/|.|^2 = 1/w^2 + 2k sin(Tw)/w^3 + O(1/w^4); the
  // oscillating term integrates to O(1/W^3) and the mean of the quartic term
  // is (k^2 - a^2)/w^4.
  total += 1.0 / cutoff + (k * k - a * a) / (3.0 * cutoff * cutoff * cutoff);
  // The integrand is even in w; Parseval's constant is 1/(2 pi).
  return total / std::numbers::pi;
}

MonteCarloEstimate monte_carlo_variance(const ScalarPlant& plant, double k, double h,
                                        double horizon, std::size_t paths, std::uint64_t seed,
                                        Execution exec) {
  require_stabilizing(plant, k);
  if (paths < 100) throw DomainError("monte carlo needs at least 100 paths");
  if (!(h > 0.0) || !(horizon > 0.0)) throw DomainError("step and horizon must be positive");
  const double a = plant.a;
  const double T = plant.T;
  std::size_t lag = 0;
  if (T > 0.0) {
    lag = static_cast<std::size_t>(std::ceil(T / h - 1e-9));
    h = T / static_cast<double>(lag);
  }
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / h - 1e-9));
  const std::size_t burn_in = steps / 2;
  const double sqrt_h = std::sqrt(h);

  std::vector<double> path_means(paths, 0.0);
  std::atomic<bool> blew_up{false};
  detail::for_each_index(exec, paths, [&](std::size_t p) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(p)));
    std::normal_distribution<double> noise(0.0, 1.0);
    // Ring buffer of the last lag+1 states, zero history.
    std::vector<double> ring(lag + 1, 0.0);
    std::size_t head = 0;
    double x = 0.0;
    double acc = 0.0;
    for (std::size_t n = 0; n < steps; ++n) {
      const double delayed = lag == 0 ? x : ring[(head + 1) % (lag + 1)];
      x += h * (a * x - k * delayed) + sqrt_h * noise(rng);
      head = (head + 1) % (lag + 1);
      ring[head] = x;
      if (n + 1 > burn_in) acc += x * x;
      if (!(std::abs(x) <= kDivergenceLevel)) {
        blew_up = true;
        return;
      }
    }
    path_means[p] = acc / static_cast<double>(steps - burn_in);
  });
  if (blew_up) throw DivergenceError("Euler-Maruyama path exceeded 1e9");

  double mean = 0.0;
  for (double m : path_means) mean += m;
  mean /= static_cast<double>(paths);
  double ss = 0.0;
  for (double m : path_means) ss += (m - mean) * (m - mean);
  const double var = ss / static_cast<double>(paths - 1);
  return {mean, std::sqrt(var / static_cast<double>(paths))};
}

OracleReport cross_check(const ScalarPlant& plant, double k, double h) {
  OracleReport report;
  report.f_closed_form = variance_integral(plant, k).f_value;
  report.f_freq_domain = freq_domain_cost(plant, k);

  double horizon = 40.0 * std::max({1.0, plant.T, 1.0 / std::abs(plant.a - k)});
  for (int attempt = 0;; ++attempt) {
    const auto sol = fundamental_solution(plant, k, h, horizon);
    if (sol.tail_energy <= 1e-9 * sol.energy || attempt == 6) {
      report.f_time_domain = sol.energy;
      break;
    }
    horizon *= 2.0;
  }
  report.rel_err_time =
      std::abs(report.f_time_domain - report.f_closed_form) / report.f_closed_form;
  report.rel_err_freq =
      std::abs(report.f_freq_domain - report.f_closed_form) / report.f_closed_form;
  return report;
}

}  // namespace delaykern
