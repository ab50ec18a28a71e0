#pragma once

// H2 cost and optimal proportional gain for the scalar retarded loop
//
//     dx = (a x(t) - k x(t - T)) dt + dw,
//
// which is what a spatially invariant plant reduces to at one spatial
// frequency once the feedback measurements arrive with a constant delay T.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delaykern/execution.hpp"

namespace delaykern {

/// One spatial-frequency subsystem: open-loop coefficient a, delay T >= 0 and
/// control weight r > 0.
struct ScalarPlant {
  double a = 0.0;
  double T = 0.0;
  double r = 1.0;

  /// Throws DomainError on non-finite fields, T < 0 or r <= 0.
  void validate() const;

  /// a*T < 1 (always true without delay).
  bool stabilizable() const noexcept { return T == 0.0 || a * T < 1.0; }
};

/// Upper end of the stabilizing-gain interval. Without delay there is no upper
/// bound; that case is an explicit state rather than an infinite double.
class StabilizingBound {
public:
  static StabilizingBound unbounded() noexcept { return StabilizingBound{}; }
  static StabilizingBound at(double k) noexcept { return StabilizingBound{k}; }

  bool bounded() const noexcept { return value_.has_value(); }
  /// Throws DomainError when unbounded.
  double value() const;
  /// k lies strictly below the bound.
  bool above(double k) const noexcept { return !value_ || k < *value_; }

private:
  StabilizingBound() = default;
  explicit StabilizingBound(double k) : value_(k) {}
  std::optional<double> value_;
};

/// Open interval (lower, upper) of gains that stabilize the delayed loop.
struct StabilityInterval {
  double lower = 0.0;
  StabilizingBound upper = StabilizingBound::unbounded();

  bool contains(double k) const noexcept { return k > lower && upper.above(k); }
};

enum class CostBranch { below, equal, above };

/// f is the stationary variance (energy of the fundamental solution) and
/// j = (1 + r k^2) f is the H2 cost; branch records which piece of the
/// closed form applies (|k| < -a, k = |a|, |a| < k).
struct CostBreakdown {
  double f_value = 0.0;
  double j_value = 0.0;
  CostBranch branch = CostBranch::above;
};

struct OptimalGain {
  double k = 0.0;
  double j = 0.0;
};

/// One row of the stability/optimality region table. Missing values carry a
/// note instead of a sentinel.
struct RegionRow {
  double a = 0.0;
  std::optional<double> k_upper;
  std::optional<double> k_cheap;
  std::optional<double> k_expensive;
  std::string note;
};

/// Unique k > |a| with T sqrt(k^2 - a^2) = arccos(a / k); unbounded for T = 0.
/// Throws NoSolutionError if a*T >= 1.
StabilizingBound stabilizing_upper_bound(const ScalarPlant& plant);

StabilityInterval stability_interval(const ScalarPlant& plant);

/// d k_u / d a by implicit differentiation; strictly negative. Requires T > 0.
double upper_bound_derivative(const ScalarPlant& plant);

/// Closed-form variance integral and H2 cost for a stabilizing gain.
///
/// Throws BoundaryError for a = k = 0, DomainError when k is not strictly
/// inside the stability interval or a*T >= 1.
CostBreakdown variance_integral(const ScalarPlant& plant, double k);

/// d J / d k at a stabilizing gain (same domain checks as variance_integral).
double cost_slope(const ScalarPlant& plant, double k);

/// Global minimizer of J over the stability interval. A coarse grid of 64
/// samples picks the basin, Brent's method refines it and the root of dJ/dk
/// polishes the result to full precision. Throws NoSolutionError if a*T >= 1.
OptimalGain optimal_gain(const ScalarPlant& plant);

/// Boundaries of the stability region (k_u) and of the optimality region:
/// the minimizers of f (cheap control, r -> 0) and of k^2 f (expensive
/// control, r -> infinity) for each a in the grid.
std::vector<RegionRow> region_boundaries(std::span<const double> a_grid, double T,
                                         Execution exec = Execution::parallel);

namespace detail {

struct VarianceSlope {
  double f;
  double df_dk;
};

// Closed form and its k-derivative without any domain checks. Callers must
// have established that k stabilizes (a, T).
VarianceSlope variance_and_slope(double a, double T, double k) noexcept;

}  // namespace detail
}  // namespace delaykern
