#pragma once

// N agents on a ring coupled through a symmetric circulant matrix circ(a_row).
// The real DFT of the first row diagonalizes every circulant matrix, so gain
// design reduces to one scalar delayed loop per mode.
//
// Convention: modes are the unnormalized cosine sums
//     A_hat[l] = sum_j a_row[j] cos(2 pi l j / n),
// and the inverse is a_row[j] = (1/n) sum_l A_hat[l] cos(2 pi l j / n).

#include <cstddef>
#include <span>
#include <vector>

#include "delaykern/execution.hpp"

namespace delaykern {

struct CirculantSystem {
  std::vector<double> a_row;

  std::size_t n() const noexcept { return a_row.size(); }
  /// Throws DomainError if n < 2 or entries are not finite, SymmetryError if
  /// a_row[i] != a_row[n - i] beyond 1e-12 max(1, max |a_row|).
  void validate() const;
};

enum class GainMethod { numerical_opt, small_delay, delay_free };

const char* to_string(GainMethod m) noexcept;

struct CirculantGains {
  std::vector<double> k_row;
  std::vector<double> k_modes;
  double self_gain = 0.0;
  GainMethod method = GainMethod::delay_free;
  /// For small_delay: max |k_row - ((I - circ(a) T) k0_row - (T/r) e0)|, the
  /// gap between the mode-wise and matrix forms of the same gains.
  double algebra_residual = 0.0;
};

/// Unnormalized real DFT (cosine sums) of an even sequence.
std::vector<double> real_dft(std::span<const double> row);

/// Inverse of real_dft.
std::vector<double> inverse_real_dft(std::span<const double> modes);

/// circ(row) v, i.e. (circ(row) v)_i = sum_j row[(j - i) mod n] v[j].
std::vector<double> circulant_apply(std::span<const double> row, std::span<const double> v);

/// Open-loop mode eigenvalues in natural index order 0..n-1.
std::vector<double> modes_of(const CirculantSystem& sys);

/// Per-mode gain design. Only modes 0..floor(n/2) are designed; the rest are
/// mirrored. Throws UnstabilizableError naming the first mode with
/// A_hat T >= 1.
CirculantGains design_gains(const CirculantSystem& sys, double T, double r, GainMethod method,
                            Execution exec = Execution::parallel);

/// True iff every mode gain lies strictly inside its stability interval.
bool verify_closed_loop(const CirculantSystem& sys, const CirculantGains& gains, double T);

/// Sum over all n modes of J(k_mode). Throws InstabilityError if
/// verify_closed_loop fails.
double h2_cost(const CirculantSystem& sys, const CirculantGains& gains, double T, double r);

}  // namespace delaykern
