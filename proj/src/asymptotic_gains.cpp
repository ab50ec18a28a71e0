#include "delaykern/asymptotic_gains.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "delaykern/errors.hpp"

namespace delaykern {
namespace {

void require_weight(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("control weight must be positive");
}

void require_stable_open_loop(double a) {
  if (!(a < 0.0)) throw DomainError("formula requires a stable open loop (a < 0)");
}

// Real roots of c3 x^3 + c2 x^2 + c1 x + c0 with c3 != 0. Cardano (the
// trigonometric form when all roots are real) is accurate only relative to
// the largest root, which is the one kept; the other two come from the
// deflated quadratic, and every root gets a Newton polish.
std::vector<double> real_cubic_roots(double c3, double c2, double c1, double c0) {
  const double b = c2 / c3;
  const double c = c1 / c3;
  const double d = c0 / c3;
  // x = t - b/3 gives t^3 + p t + q = 0.
  const double shift = b / 3.0;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const double disc = q * q / 4.0 + p * p * p / 27.0;

  double dominant = 0.0;
  if (disc < 0.0) {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int j = 0; j < 3; ++j) {
      const double x = m * std::cos(theta - 2.0 * std::numbers::pi * j / 3.0) - shift;
      if (std::abs(x) > std::abs(dominant)) dominant = x;
    }
  } else {
    const double sq = std::sqrt(disc);
    dominant = std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq) - shift;
  }

  auto polish = [&](double x) {
    for (int it = 0; it < 4; ++it) {
      const double f = ((c3 * x + c2) * x + c1) * x + c0;
      const double df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
      if (df == 0.0) break;
      const double step = f / df;
      x -= step;
      if (std::abs(step) <= 1e-16 * std::abs(x)) break;
    }
    return x;
  };

  std::vector<double> roots{polish(dominant)};
  const double x3 = roots[0];
  // Remaining pair: x1 x2 = -d / x3 and x1 + x2 = (c - x1 x2) / x3, both
  // free of the cancellation in b + x3.
  double sum = 0.0;
  double prod = 0.0;
  if (x3 == 0.0) {
    sum = -b;
    prod = c;
  } else {
    prod = -d / x3;
    sum = (c - prod) / x3;
  }
  const double qd = sum * sum - 4.0 * prod;
  if (qd >= 0.0) {
    const double big = 0.5 * (sum + std::copysign(std::sqrt(qd), sum));
    if (big != 0.0) {
      roots.push_back(polish(big));
      roots.push_back(polish(prod / big));
    } else {
      roots.push_back(0.0);
    }
  }
  return roots;
}

}  // namespace

double delay_free_gain(double a, double r) {
  require_weight(r);
  const double root = std::sqrt(a * a + 1.0 / r);
  return a < 0.0 ? (1.0 / r) / (root - a) : a + root;
}

GainFormulaResult expensive_gain(double a, double T, double r) {
  require_weight(r);
  require_stable_open_loop(a);
  if (!(T >= 0.0)) throw DomainError("delay must be non-negative");
  return {std::exp(T * a) / (2.0 * r * std::abs(a)), GainRegime::expensive, r, false};
}

GainFormulaResult small_delay_gain(double a, double T, double r) {
  require_weight(r);
  if (!(T >= 0.0)) throw DomainError("delay must be non-negative");
  const double k0 = delay_free_gain(a, r);
  const double correction = a * k0 + 1.0 / r;
  return {k0 - correction * T, GainRegime::small_delay, T, std::abs(a) * T > 0.1};
}

double small_delay_cubic_root(double a, double T, double r) {
  require_weight(r);
  if (!(T > 0.0)) throw DomainError("cubic small-delay condition requires T > 0");
  const auto roots = real_cubic_roots(2.0 * r * T, (1.0 - 3.0 * T * a) * r, -2.0 * r * a,
                                      -1.0 - T * a);
  // Descartes' rule gives a single positive root in the regime of interest;
  // if a parameter choice produces several, take the one nearest the
  // delay-free gain the expansion perturbs.
  const double k0 = delay_free_gain(a, r);
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double x : roots) {
    if (!(x > 0.0) || !std::isfinite(x)) continue;
    if (std::isnan(best) || std::abs(x - k0) < std::abs(best - k0)) best = x;
  }
  if (std::isnan(best)) throw DomainError("small-delay cubic has no positive real root");
  return best;
}

CostGapResult expensive_cost_gap(double a, double T, double r) {
  require_weight(r);
  require_stable_open_loop(a);
  if (!(T >= 0.0)) throw DomainError("delay must be non-negative");
  const double scale = 8.0 * r * std::abs(a) * a * a;
  return {-std::expm1(2.0 * T * a) / scale, 1.0 / scale};
}

}  // namespace delaykern
