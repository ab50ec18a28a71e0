#pragma once

// Spatially invariant synthesis on the real line. Spatial frequency lambda
// decouples the plant into scalar delayed loops; the controller kernel is the
// inverse Fourier transform of the per-frequency gains.
//
// Fourier convention (unitary, even functions):
//     K(x)     = sqrt(2/pi) * int_0^inf k(lambda) cos(lambda x) dlambda
//     k(lambda) = sqrt(2/pi) * int_0^inf K(x) cos(lambda x) dx
// A constant symbol value w is the kernel sqrt(2 pi) w delta(x); such parts are
// kept as SpatialKernel::dirac_weight (in symbol units) and never sampled.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "delaykern/execution.hpp"

namespace delaykern {

/// Even Fourier symbol a(lambda) sampled on the uniform grid
/// lambda_i = i * lambda_max / (n_lambda - 1), i = 0..n_lambda-1.
struct SymbolFunction {
  std::function<double(double)> a_of_lambda;
  double lambda_max = 0.0;
  std::size_t n_lambda = 0;

  /// Throws DomainError unless lambda_max > 0, n_lambda >= 2 and a callable
  /// is set.
  void validate() const;
  double spacing() const noexcept { return lambda_max / static_cast<double>(n_lambda - 1); }
  double lambda(std::size_t i) const noexcept { return spacing() * static_cast<double>(i); }
};

/// Reaction-diffusion plant d psi/dt = d psi'' - c psi, symbol -d lambda^2 - c.
struct ReactionDiffusionParams {
  double c = 1.0;
  double d = 1.0;
  double T = 0.0;
  double r = 1.0;

  /// Throws DomainError unless c > 0, d > 0, T >= 0, r > 0 (all finite).
  void validate() const;
  double symbol(double lambda) const noexcept { return -d * lambda * lambda - c; }
  SymbolFunction symbol_function(double lambda_max, std::size_t n_lambda) const;
};

struct SpectralSample {
  double lambda = 0.0;
  double a = 0.0;
  std::optional<double> k;
  std::optional<double> j;
  std::string failure;
};

/// Per-frequency design on the symbol's lambda grid.
struct SpectralDesign {
  std::vector<SpectralSample> samples;
  double T = 0.0;
  double r = 1.0;

  bool complete() const noexcept;
};

enum class KernelProvenance { numerical_opt, expensive_closed_form, delay_free, truncated, small_delay };

const char* to_string(KernelProvenance p) noexcept;

/// Even kernel sampled at x_i = (i - m) dx, i = 0..2m, with m dx = half_width.
struct SpatialKernel {
  double dx = 0.0;
  double half_width = 0.0;
  std::vector<double> values;
  double dirac_weight = 0.0;
  KernelProvenance provenance = KernelProvenance::numerical_opt;
  std::vector<std::string> warnings;

  std::size_t center() const noexcept { return values.size() / 2; }
  double x(std::size_t i) const noexcept {
    return dx * (static_cast<double>(i) - static_cast<double>(center()));
  }
  double peak() const noexcept;
};

struct DesignThresholds {
  double D0 = 0.0;
  double D2 = 0.0;
  double D4 = 0.0;
  double x_th1 = 0.0;
  double x_th2 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
  /// gamma sqrt(d/c): truncation radius of the delay-free kernel.
  double x_th0 = 0.0;
  /// kappa sqrt(2 d T): radius holding most of the delay filter's mass.
  double x_thT = 0.0;
  double gain_gap = 0.0;
  bool delay_dominates = false;
  /// alpha x_th1 <= beta x_th2.
  bool consistent = false;
};

struct TruncationResult {
  /// nullopt when the truncated kernel destabilizes some sampled frequency.
  std::optional<double> j_truncated;
  double j_full = 0.0;
  bool stable = false;
  bool delay_dominates = false;
  std::optional<double> first_unstable_lambda;
};

/// Optimal gain and cost per sampled frequency. Failures (a T >= 1, optimizer
/// errors) are stored in the sample, not thrown.
SpectralDesign sweep_optimal_symbol(const SymbolFunction& sym, double T, double r,
                                    Execution exec = Execution::parallel);

/// Samples an arbitrary gain symbol on the grid of sym (j left empty).
SpectralDesign tabulate_symbol(const SymbolFunction& sym,
                               const std::function<double(double lambda)>& k_of_lambda);

/// Inverse cosine transform by the trapezoid rule on [0, lambda_max].
/// symbol_limit is subtracted from every sample and returned as the Dirac
/// weight. Samples are computed for x >= 0 and mirrored.
///
/// Throws AliasError if lambda_max < pi/dx or if the periodic images of the
/// discrete transform (period 2 pi / dlambda) fall inside [-L, L]; DomainError
/// if the design has missing samples.
SpatialKernel kernel_from_symbol(const SpectralDesign& design, double dx, double L,
                                 KernelProvenance provenance, double symbol_limit = 0.0,
                                 Execution exec = Execution::parallel);

/// Forward cosine transform of a sampled kernel at frequency lambda
/// (trapezoid over the grid, plus the Dirac weight).
double kernel_symbol(const SpatialKernel& kernel, double lambda);

/// (1/2r) sqrt(pi/(2dc)) exp(-sqrt(c/d)|x|).
double rd_delay_free_kernel(const ReactionDiffusionParams& p, double x);

/// Gaussian delay filter exp(-cT) / sqrt(2dT) * exp(-x^2/(4dT)), T > 0.
double rd_delay_filter(const ReactionDiffusionParams& p, double x);

/// Expensive-regime delay-aware kernel (1/2r) sqrt(pi/(2dc)) (phi(x) + phi(-x))
/// with phi(x) = exp(sqrt(c/d) x) erfc(x/(2 sqrt(dT)) + sqrt(cT)) / 2.
/// Evaluated in scaled form, finite for any x. Reduces to the delay-free
/// kernel at T = 0.
double rd_expensive_kernel(const ReactionDiffusionParams& p, double x);

/// Samples one of the closed-form kernels (delay_free or
/// expensive_closed_form) on the grid of spacing dx and half-width L.
SpatialKernel rd_sampled_kernel(const ReactionDiffusionParams& p, double dx, double L,
                                KernelProvenance which, Execution exec = Execution::parallel);

/// Max |sqrt(2 pi)^-1 (K0 * g_T)(x) - K_T(x)| over the grid, where * is the
/// plain convolution integral evaluated by the trapezoid rule on a grid
/// padded by 12 sqrt(2dT). Throws ResolutionError if dx > sqrt(2dT)/8 and
/// DomainError if T = 0.
double rd_convolution_check(const ReactionDiffusionParams& p, double dx, double L,
                            Execution exec = Execution::parallel);

/// Taylor coefficients at the origin, validity thresholds and truncation
/// radii. Throws DomainError unless 0 < alpha < 1, beta > 0, kappa > 0,
/// gamma >= 1 and T > 0.
DesignThresholds rd_thresholds(const ReactionDiffusionParams& p, double alpha, double beta,
                               double kappa, double gamma);

/// Piecewise design rule: parabola K0(0)(D0 + D2 x^2) for |x| <= alpha x_th1,
/// delay-free kernel for |x| >= beta x_th2, linear interpolation between the
/// two anchor values in the middle band. Throws DomainError if
/// !th.consistent.
double rd_design_approximation(const ReactionDiffusionParams& p, const DesignThresholds& th,
                               double x);

/// R(x) = K_T(x)/K_0(x) - 1, computed without cancellation.
double rd_tail_remainder(const ReactionDiffusionParams& p, double x);

/// Two-term lower bound on R(x), valid for |x| > 2 sqrt(dc) T.
/// Throws DomainError inside that band.
double rd_tail_remainder_bound(const ReactionDiffusionParams& p, double x);

/// Zeroes kernel samples with |x| > cutoff, transforms back to a symbol on
/// the grid of sym and integrates J over lambda in [-lambda_max, lambda_max]
/// (trapezoid, using evenness). The same computation without truncation
/// gives j_full. delay_dominates = sqrt(2cT) > gamma/kappa.
///
/// Throws AliasError if lambda_max exceeds pi/dx of the kernel grid,
/// DomainError if cutoff <= 0.
TruncationResult truncation_analysis(const ReactionDiffusionParams& p, const SpatialKernel& kernel,
                                     double cutoff, const SymbolFunction& sym, double kappa,
                                     double gamma, Execution exec = Execution::parallel);

/// Per-frequency small-delay gains (1 - a T) k0(lambda) - T/r from a
/// delay-free design.
SpectralDesign small_delay_symbol(const SpectralDesign& design0, double T, double r);

/// Small-delay kernel from a delay-free design: regular symbol
/// (1 - a T) k0(lambda) and Dirac weight -T/r. Adds a warning when the
/// symbol is unbounded over the window (|a(lambda_max)| T > 0.1), since
/// the expansion assumes uniformly bounded a.
SpatialKernel small_delay_kernel(const SpectralDesign& design0, const SymbolFunction& sym, double T,
                                 double r, double dx, double L,
                                 Execution exec = Execution::parallel);

}  // namespace delaykern
