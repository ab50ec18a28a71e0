#pragma once

// Closed-form optimal gains in the asymptotic regimes of the scalar delayed
// loop, plus the expensive-control cost gap per spatial frequency.

namespace delaykern {

enum class GainRegime { delay_free, fast_dynamics, expensive, small_delay, small_delay_cubic };

/// validity_hint echoes the asymptotic parameter the formula was requested at
/// (r for the expensive regime, T for the small-delay regime).
/// outside_validity is a soft flag: the formula was evaluated where its
/// asymptotic assumption is doubtful (|a| T > 0.1 for small delays).
struct GainFormulaResult {
  double k = 0.0;
  GainRegime regime = GainRegime::delay_free;
  double validity_hint = 0.0;
  bool outside_validity = false;
};

/// Per-frequency integrand of the expensive-regime cost gap and its value as
/// T grows without bound.
struct CostGapResult {
  double gap = 0.0;
  double limit_T_inf = 0.0;
};

/// a + sqrt(a^2 + 1/r), evaluated without cancellation for a << 0.
double delay_free_gain(double a, double r);

/// e^{T a} / (2 r |a|). Also the fast-dynamics limit a -> -infinity, which has
/// the same expression. Throws DomainError unless a < 0.
GainFormulaResult expensive_gain(double a, double T, double r);

/// k0 - (a k0 + 1/r) T with k0 the delay-free gain.
GainFormulaResult small_delay_gain(double a, double T, double r);

/// Unique positive root of 2rT k^3 + (1 - 3Ta) r k^2 - 2ra k - 1 - Ta = 0,
/// the stationarity condition of the first-order-in-T cost. Solved with
/// Cardano's formula, trigonometric form when all three roots are real.
/// Throws DomainError if no positive real root exists.
double small_delay_cubic_root(double a, double T, double r);

/// (1 - e^{2 T a}) / (8 r |a|^3) and its T -> infinity limit 1 / (8 r |a|^3).
/// Throws DomainError unless a < 0.
CostGapResult expensive_cost_gap(double a, double T, double r);

}  // namespace delaykern
