#include "delaykern/scalar_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "delaykern/asymptotic_gains.hpp"
#include "delaykern/errors.hpp"

namespace delaykern {
namespace {

constexpr std::size_t kCoarseGrid = 64;

std::string describe(const ScalarPlant& p) {
  std::ostringstream os;
  os.precision(17);
  os << "(a=" << p.a << ", T=" << p.T << ", r=" << p.r << ")";
  return os.str();
}

// sin(T sqrt z)/sqrt z, cos(T sqrt z) and d/dz of the former, all entire in z,
// together with the constant 1. Every member is multiplied by a common scale
// so the hyperbolic side does not overflow for large |z| T^2; the ratios that
// make up f are scale free.
struct DelayTerms {
  double one;
  double s;
  double c;
  double ds;
};

DelayTerms delay_terms(double T, double z) noexcept {
  const double w = T * T * z;
  if (std::abs(w) < 0.5) {
    // Power series in w: the closed-form branches cancel catastrophically as
    // k -> |a|, the series does not.
    double s = 0.0;
    double c = 0.0;
    double ds = 0.0;
    double power = 1.0;  // (-w)^n
    double fact_even = 1.0;  // (2n)!
    for (int n = 0; n < 16; ++n) {
      const double fact_odd = fact_even * (2 * n + 1);
      const double fact_next = fact_odd * (2 * n + 2) * (2 * n + 3);
      c += power / fact_even;
      s += power / fact_odd;
      ds += (n + 1) * power / fact_next;
      power *= -w;
      fact_even = fact_odd * (2 * n + 2);
    }
    return {1.0, T * s, c, -T * T * T * ds};
  }
  if (z > 0.0) {
    const double l = std::sqrt(z);
    const double s = std::sin(l * T) / l;
    const double c = std::cos(l * T);
    return {1.0, s, c, (T * c - s) / (2.0 * z)};
  }
  const double l = std::sqrt(-z);
  const double x = l * T;
  const double e2 = std::exp(-2.0 * x);
  const double sech = 2.0 * std::exp(-x) / (1.0 + e2);
  const double tanh = (1.0 - e2) / (1.0 + e2);
  const double s = tanh / l;
  return {sech, s, 1.0, (T - s) / (2.0 * z)};
}

CostBranch classify(double a, double k) noexcept {
  const double abs_a = std::abs(a);
  if (a != 0.0 && std::abs(k - abs_a) < 1e-10 * std::max(1.0, abs_a)) {
    return CostBranch::equal;
  }
  return k < abs_a ? CostBranch::below : CostBranch::above;
}

struct Weights {
  double w0;  // weight on f
  double w2;  // weight on k^2 f
};

double weighted_cost(double a, double T, Weights w, double k) noexcept {
  return (w.w0 + w.w2 * k * k) * detail::variance_and_slope(a, T, k).f;
}

double weighted_slope(double a, double T, Weights w, double k) noexcept {
  const auto v = detail::variance_and_slope(a, T, k);
  return 2.0 * w.w2 * k * v.f + (w.w0 + w.w2 * k * k) * v.df_dk;
}

// Minimizes (w0 + w2 k^2) f(k) over the open interval (lo, hi).
double minimize_weighted(double a, double T, Weights w, double lo, double hi) {
  const double width = hi - lo;
  std::array<double, kCoarseGrid + 2> knots{};
  knots.front() = lo + 1e-12 * width;
  knots.back() = hi - 1e-12 * width;
  std::size_t best = 1;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i <= kCoarseGrid; ++i) {
    knots[i] = lo + width * static_cast<double>(i) / static_cast<double>(kCoarseGrid + 1);
    const double value = weighted_cost(a, T, w, knots[i]);
    if (value < best_value) {
      best_value = value;
      best = i;
    }
  }
  double b_lo = knots[best - 1];
  double b_hi = knots[best + 1];

  auto cost = [&](double k) { return weighted_cost(a, T, w, k); };
  auto slope = [&](double k) { return weighted_slope(a, T, w, k); };

  const auto [x_brent, j_brent] = boost::math::tools::brent_find_minima(
      cost, b_lo, b_hi, std::numeric_limits<double>::digits);
  (void)j_brent;

  // Brent stalls at ~sqrt(eps) in k because J is flat at its minimum; the
  // slope root pins the minimizer to full precision.
  const double delta = 1e-6 * (b_hi - b_lo);
  double p_lo = std::max(b_lo, x_brent - delta);
  double p_hi = std::min(b_hi, x_brent + delta);
  double s_lo = slope(p_lo);
  double s_hi = slope(p_hi);
  if (!(s_lo < 0.0 && s_hi > 0.0)) {
    p_lo = b_lo;
    p_hi = b_hi;
    s_lo = slope(p_lo);
    s_hi = slope(p_hi);
  }
  if (s_lo < 0.0 && s_hi > 0.0) {
    std::uintmax_t iters = 500;
    const auto root = boost::math::tools::toms748_solve(
        slope, p_lo, p_hi, s_lo, s_hi,
        boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 1),
        iters);
    const double x = 0.5 * (root.first + root.second);
    // On a plateau both costs agree to rounding; the slope root is the
    // better estimate of the minimizer.
    if (cost(x) <= cost(x_brent) * (1.0 + 8.0 * std::numeric_limits<double>::epsilon())) return x;
  }
  return x_brent;
}

// Hyperbolic branch (a < 0, |k| < |a|) written as f = (1 + g)/(2|a|). J is
// flat to within exp(-2|a|T) near its minimizer when |a|T is large, so the
// deviation g and its slope must not be formed by subtracting O(1) terms.
detail::VarianceSlope deep_hyperbolic(double a, double T, double k) noexcept {
  const double A = -a;
  const double l = std::sqrt((A - k) * (A + k));
  const double x = l * T;
  const double e2 = std::exp(-2.0 * x);
  const double sech = 2.0 * std::exp(-x) / (1.0 + e2);
  const double tanh = (1.0 - e2) / (1.0 + e2);
  const double mu = 2.0 * e2 / (1.0 + e2);  // exp(-x) sech(x)
  const double lal = l * (A + l);
  const double m = tanh / lal;
  const double P = k * k * m - mu;
  const double Q = A * sech + k;

  const double dtanh = -T * sech * sech * k / l;
  const double dlal = -k * (A + 2.0 * l) / l;
  const double dm = (dtanh * lal - tanh * dlal) / (lal * lal);
  const double dmu = T * mu * (1.0 + tanh) * k / l;
  const double dP = 2.0 * k * m + k * k * dm - dmu;
  const double dQ = A * T * sech * tanh * k / l + 1.0;

  if (k == 0.0) {
    // Open loop: an OU process. Also covers sech underflowing to zero.
    return {0.5 / A, -std::exp(-x) / (2.0 * A * A)};
  }
  const double g = k * P / Q;
  const double dg = P / Q + k * (dP * Q - P * dQ) / (Q * Q);
  return {(1.0 + g) / (2.0 * A), dg / (2.0 * A)};
}

}  // namespace

namespace detail {

VarianceSlope variance_and_slope(double a, double T, double k) noexcept {
  const double z = k * k - a * a;
  if (a < 0.0 && T * T * z <= -0.5) return deep_hyperbolic(a, T, k);
  const DelayTerms t = delay_terms(T, z);
  const double num = -t.one - k * t.s;
  const double den = 2.0 * (a * t.one - k * t.c);
  const double num_dk = -t.s - 2.0 * k * k * t.ds;
  const double den_dk = 2.0 * (-t.c + T * k * k * t.s);
  return {num / den, (num_dk * den - num * den_dk) / (den * den)};
}

}  // namespace detail

void ScalarPlant::validate() const {
  if (!std::isfinite(a) || !std::isfinite(T) || !std::isfinite(r)) {
    throw DomainError("plant parameters must be finite " + describe(*this));
  }
  if (T < 0.0) throw DomainError("delay must be non-negative " + describe(*this));
  if (r <= 0.0) throw DomainError("control weight must be positive " + describe(*this));
}

double StabilizingBound::value() const {
  if (!value_) throw DomainError("stabilizing gains are unbounded without delay");
  return *value_;
}

StabilizingBound stabilizing_upper_bound(const ScalarPlant& plant) {
  plant.validate();
  if (plant.T == 0.0) return StabilizingBound::unbounded();
  if (!plant.stabilizable()) {
    throw NoSolutionError("a*T >= 1: no stabilizing gain " + describe(plant));
  }
  const double a = plant.a;
  const double T = plant.T;
  // In terms of l = sqrt(k^2 - a^2), arccos(a/k) = atan2(l, a), which stays
  // well conditioned when k is close to |a|. The root lies in (0, pi/T].
  auto residual = [a, T](double l) { return T * l - std::atan2(l, a); };
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::numbers::pi / T;
  const double f_lo = residual(lo);
  const double f_hi = residual(hi);
  if (!(f_lo < 0.0) || !(f_hi > 0.0)) {
    throw NoSolutionError("failed to bracket the stabilizing bound " + describe(plant));
  }
  std::uintmax_t iters = 300;
  const auto root = boost::math::tools::toms748_solve(
      residual, lo, hi, f_lo, f_hi,
      boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits), iters);
  const double l = 0.5 * (root.first + root.second);
  return StabilizingBound::at(std::hypot(l, a));
}

StabilityInterval stability_interval(const ScalarPlant& plant) {
  return {plant.a, stabilizing_upper_bound(plant)};
}

double upper_bound_derivative(const ScalarPlant& plant) {
  plant.validate();
  if (plant.T == 0.0) throw DomainError("upper bound derivative requires T > 0");
  if (!plant.stabilizable()) throw DomainError("a*T >= 1 " + describe(plant));
  const double ku = stabilizing_upper_bound(plant).value();
  return ku * (plant.a * plant.T - 1.0) / (ku * ku * plant.T - plant.a);
}

namespace {

void check_stabilizing(const ScalarPlant& plant, double k) {
  plant.validate();
  if (!std::isfinite(k)) throw DomainError("gain must be finite");
  if (plant.a == 0.0 && k == 0.0) {
    throw BoundaryError("k = |a| with a = 0: variance formula undefined");
  }
  if (!plant.stabilizable()) throw DomainError("a*T >= 1 " + describe(plant));
  if (!stability_interval(plant).contains(k)) {
    std::ostringstream os;
    os.precision(17);
    os << "gain " << k << " outside the stability interval of " << describe(plant);
    throw DomainError(os.str());
  }
}

}  // namespace

CostBreakdown variance_integral(const ScalarPlant& plant, double k) {
  check_stabilizing(plant, k);
  CostBreakdown out;
  out.branch = classify(plant.a, k);
  if (out.branch == CostBranch::equal) {
    out.f_value = plant.T / 4.0 + 1.0 / (4.0 * std::abs(plant.a));
  } else {
    out.f_value = detail::variance_and_slope(plant.a, plant.T, k).f;
  }
  out.j_value = (1.0 + plant.r * k * k) * out.f_value;
  return out;
}

double cost_slope(const ScalarPlant& plant, double k) {
  check_stabilizing(plant, k);
  return weighted_slope(plant.a, plant.T, {1.0, plant.r}, k);
}

OptimalGain optimal_gain(const ScalarPlant& plant) {
  plant.validate();
  if (!plant.stabilizable()) {
    throw NoSolutionError("a*T >= 1: no stabilizing gain " + describe(plant));
  }
  if (plant.T == 0.0) {
    const double k = delay_free_gain(plant.a, plant.r);
    return {k, (1.0 + plant.r * k * k) / (2.0 * (k - plant.a))};
  }
  const double hi = stabilizing_upper_bound(plant).value();
  const double k = minimize_weighted(plant.a, plant.T, {1.0, plant.r}, plant.a, hi);
  return {k, weighted_cost(plant.a, plant.T, {1.0, plant.r}, k)};
}

std::vector<RegionRow> region_boundaries(std::span<const double> a_grid, double T,
                                         Execution exec) {
  if (!std::isfinite(T) || T < 0.0) throw DomainError("delay must be non-negative");
  std::vector<RegionRow> rows(a_grid.size());
  detail::for_each_index(exec, a_grid.size(), [&](std::size_t i) {
    RegionRow& row = rows[i];
    const double a = a_grid[i];
    row.a = a;
    try {
      const ScalarPlant plant{a, T, 1.0};
      plant.validate();
      if (T == 0.0) {
        // f = 1/(2(k - a)) decreases without bound; k^2 f is minimized at
        // 2a for a > 0 and at 0 otherwise.
        row.k_expensive = a > 0.0 ? 2.0 * a : 0.0;
        row.note = "no delay: stabilizing and cheap-control gains unbounded";
        return;
      }
      if (!plant.stabilizable()) {
        row.note = "a*T >= 1: not stabilizable";
        return;
      }
      const double ku = stabilizing_upper_bound(plant).value();
      row.k_upper = ku;
      row.k_cheap = minimize_weighted(a, T, {1.0, 0.0}, a, ku);
      // k^2 f >= 0 vanishes at k = 0 whenever 0 is stabilizing.
      row.k_expensive = a < 0.0 ? 0.0 : minimize_weighted(a, T, {0.0, 1.0}, a, ku);
    } catch (const std::exception& e) {
      row.note = e.what();
    }
  });
  return rows;
}

}  // namespace delaykern
