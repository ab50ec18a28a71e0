#include "delaykern/spatial_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "delaykern/errors.hpp"
#include "delaykern/scalar_core.hpp"

namespace delaykern {
namespace {

const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);
const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);

// exp(u^2) erfc(u). The square is split exactly so the exponential does not
// amplify its rounding error for moderate u.
double erfcx(double u) {
  if (u < 26.0) {
    const double sq = u * u;
    const double sq_err = std::fma(u, u, -sq);
    return std::exp(sq) * (1.0 + sq_err) * std::erfc(u);
  }
  const double inv = 1.0 / (2.0 * u * u);
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n <= 7; ++n) {
    term *= -(2.0 * n - 1.0) * inv;
    sum += term;
  }
  return sum / (u * std::sqrt(std::numbers::pi));
}

double delay_free_peak(const ReactionDiffusionParams& p) {
  return 0.5 / p.r * std::sqrt(std::numbers::pi / (2.0 * p.d * p.c));
}

std::size_t half_points(double dx, double L) {
  if (!(dx > 0.0) || !(L > 0.0) || !std::isfinite(dx) || !std::isfinite(L)) {
    throw DomainError("grid spacing and half-width must be positive");
  }
  const auto m = static_cast<std::size_t>(std::llround(L / dx));
  if (m < 1) throw DomainError("half-width smaller than the grid spacing");
  return m;
}

SpatialKernel empty_kernel(double dx, std::size_t m, KernelProvenance provenance) {
  SpatialKernel k;
  k.dx = dx;
  k.half_width = dx * static_cast<double>(m);
  k.values.assign(2 * m + 1, 0.0);
  k.provenance = provenance;
  return k;
}

void mirror(SpatialKernel& k) {
  const std::size_t c = k.center();
  for (std::size_t i = 1; i <= c; ++i) k.values[c - i] = k.values[c + i];
}

double uniform_spacing(const SpectralDesign& design) {
  if (design.samples.size() < 2) throw DomainError("spectral design needs at least two samples");
  return design.samples[1].lambda - design.samples[0].lambda;
}

std::string format_lambda(const char* prefix, double lambda) {
  std::ostringstream os;
  os.precision(17);
  os << prefix << lambda;
  return os.str();
}

}  // namespace

void SymbolFunction::validate() const {
  if (!a_of_lambda) throw DomainError("symbol function is empty");
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
    throw DomainError("lambda_max must be positive");
  }
  if (n_lambda < 2) throw DomainError("need at least two frequency samples");
}

void ReactionDiffusionParams::validate() const {
  if (!(c > 0.0) || !(d > 0.0) || !(r > 0.0) || !(T >= 0.0) || !std::isfinite(c) ||
      !std::isfinite(d) || !std::isfinite(T) || !std::isfinite(r)) {
    throw DomainError("reaction-diffusion parameters need c, d, r > 0 and T >= 0");
  }
}

SymbolFunction ReactionDiffusionParams::symbol_function(double lambda_max,
                                                        std::size_t n_lambda) const {
  const double cc = c;
  const double dd = d;
  return {[cc, dd](double l) { return -dd * l * l - cc; }, lambda_max, n_lambda};
}

bool SpectralDesign::complete() const noexcept {
  return std::all_of(samples.begin(), samples.end(), [](const SpectralSample& s) {
    return s.k.has_value();
  });
}

const char* to_string(KernelProvenance p) noexcept {
  switch (p) {
    case KernelProvenance::numerical_opt: return "numerical_opt";
    case KernelProvenance::expensive_closed_form: return "expensive_closed_form";
    case KernelProvenance::delay_free: return "delay_free";
    case KernelProvenance::truncated: return "truncated";
    case KernelProvenance::small_delay: return "small_delay";
  }
  return "unknown";
}

double SpatialKernel::peak() const noexcept {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

SpectralDesign sweep_optimal_symbol(const SymbolFunction& sym, double T, double r,
                                    Execution exec) {
  sym.validate();
  SpectralDesign design;
  design.T = T;
  design.r = r;
  design.samples.resize(sym.n_lambda);
  for (std::size_t i = 0; i < sym.n_lambda; ++i) {
    design.samples[i].lambda = sym.lambda(i);
    design.samples[i].a = sym.a_of_lambda(design.samples[i].lambda);
  }
  detail::for_each_index(exec, sym.n_lambda, [&](std::size_t i) {
    SpectralSample& s = design.samples[i];
    try {
      const auto opt = optimal_gain(ScalarPlant{s.a, T, r});
      s.k = opt.k;
      s.j = opt.j;
    } catch (const std::exception& e) {
      s.failure = e.what();
    }
  });
  return design;
}

SpectralDesign tabulate_symbol(const SymbolFunction& sym,
                               const std::function<double(double lambda)>& k_of_lambda) {
  sym.validate();
  SpectralDesign design;
  design.samples.resize(sym.n_lambda);
  for (std::size_t i = 0; i < sym.n_lambda; ++i) {
    auto& s = design.samples[i];
    s.lambda = sym.lambda(i);
    s.a = sym.a_of_lambda(s.lambda);
    s.k = k_of_lambda(s.lambda);
  }
  return design;
}

SpatialKernel kernel_from_symbol(const SpectralDesign& design, double dx, double L,
                                 KernelProvenance provenance, double symbol_limit,
                                 Execution exec) {
  const std::size_t m = half_points(dx, L);
  const double dl = uniform_spacing(design);
  if (!design.complete()) throw DomainError("spectral design has missing gains");
  const std::size_t n = design.samples.size();
  const double lambda_max = design.samples.back().lambda;
  const double half_width = dx * static_cast<double>(m);
  if (lambda_max < std::numbers::pi / dx * (1.0 - 1e-12)) {
    throw AliasError("lambda_max below pi/dx: the grid resolves more than the symbol holds");
  }
  if (2.0 * std::numbers::pi / dl < 2.0 * half_width * (1.0 - 1e-12)) {
    throw AliasError("frequency spacing too coarse: periodic images overlap the grid");
  }

  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = *design.samples[j].k - symbol_limit;
  w.front() *= 0.5;
  w.back() *= 0.5;

  SpatialKernel out = empty_kernel(dx, m, provenance);
  out.dirac_weight = symbol_limit;
  const std::size_t c = out.center();
  detail::for_each_index(exec, m + 1, [&](std::size_t i) {
    const double x = dx * static_cast<double>(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += w[j] * std::cos(design.samples[j].lambda * x);
    out.values[c + i] = kSqrt2OverPi * dl * sum;
  });
  mirror(out);
  return out;
}

double kernel_symbol(const SpatialKernel& kernel, double lambda) {
  const std::size_t c = kernel.center();
  const std::size_t m = kernel.values.size() - 1 - c;
  double sum = 0.5 * kernel.values[c];
  for (std::size_t i = 1; i < m; ++i) {
    sum += kernel.values[c + i] * std::cos(lambda * kernel.dx * static_cast<double>(i));
  }
  sum += 0.5 * kernel.values[c + m] * std::cos(lambda * kernel.half_width);
  return kSqrt2OverPi * kernel.dx * sum + kernel.dirac_weight;
}

double rd_delay_free_kernel(const ReactionDiffusionParams& p, double x) {
  p.validate();
  return delay_free_peak(p) * std::exp(-std::sqrt(p.c / p.d) * std::abs(x));
}

double rd_delay_filter(const ReactionDiffusionParams& p, double x) {
  p.validate();
  if (!(p.T > 0.0)) throw DomainError("delay filter needs T > 0");
  return std::exp(-p.c * p.T) / std::sqrt(2.0 * p.d * p.T) *
         std::exp(-x * x / (4.0 * p.d * p.T));
}

double rd_expensive_kernel(const ReactionDiffusionParams& p, double x) {
  p.validate();
  if (p.T == 0.0) return rd_delay_free_kernel(p, x);
  x = std::abs(x);
  const double s = std::sqrt(p.c / p.d);
  const double h = 2.0 * std::sqrt(p.d * p.T);
  const double q = std::sqrt(p.c * p.T);
  const double gauss = std::exp(-x * x / (h * h) - p.c * p.T);
  const double u = x / h + q;  // argument of phi(x), positive
  const double v = q - x / h;  // argument of phi(-x)
  const double phi_plus = 0.5 * gauss * erfcx(u);
  const double phi_minus = v > 0.0 ? 0.5 * gauss * erfcx(v) : 0.5 * std::exp(-s * x) * std::erfc(v);
  return delay_free_peak(p) * (phi_plus + phi_minus);
}

SpatialKernel rd_sampled_kernel(const ReactionDiffusionParams& p, double dx, double L,
                                KernelProvenance which, Execution exec) {
  p.validate();
  if (which != KernelProvenance::delay_free && which != KernelProvenance::expensive_closed_form) {
    throw DomainError("closed-form kernels are delay_free or expensive_closed_form");
  }
  const std::size_t m = half_points(dx, L);
  SpatialKernel out = empty_kernel(dx, m, which);
  const std::size_t c = out.center();
  const bool delayed = which == KernelProvenance::expensive_closed_form;
  detail::for_each_index(exec, m + 1, [&](std::size_t i) {
    const double x = dx * static_cast<double>(i);
    out.values[c + i] = delayed ? rd_expensive_kernel(p, x) : rd_delay_free_kernel(p, x);
  });
  mirror(out);
  return out;
}

double rd_convolution_check(const ReactionDiffusionParams& p, double dx, double L,
                            Execution exec) {
  p.validate();
  if (!(p.T > 0.0)) throw DomainError("convolution check needs T > 0");
  const double sigma = std::sqrt(2.0 * p.d * p.T);
  if (dx > sigma / 8.0) {
    std::ostringstream os;
    os << "dx=" << dx << " does not resolve the delay filter (need dx <= " << sigma / 8.0 << ")";
    throw ResolutionError(os.str());
  }
  const std::size_t m = half_points(dx, L);
  const auto pad = static_cast<std::size_t>(std::ceil(12.0 * sigma / dx));

  // Kernel on [-(m + pad), m + pad] and filter on [0, pad], sharing nodes
  // with the output grid so the kink of K0 sits on a node.
  const std::size_t span = m + pad;
  std::vector<double> k0(2 * span + 1);
  for (std::size_t j = 0; j <= 2 * span; ++j) {
    const double y = dx * (static_cast<double>(j) - static_cast<double>(span));
    k0[j] = rd_delay_free_kernel(p, y);
  }
  std::vector<double> g(pad + 1);
  for (std::size_t q = 0; q <= pad; ++q) g[q] = rd_delay_filter(p, dx * static_cast<double>(q));

  std::vector<double> dev(m + 1, 0.0);
  detail::for_each_index(exec, m + 1, [&](std::size_t i) {
    // Output node x = i dx maps to index span + i of k0.
    const std::size_t centre = span + i;
    double sum = k0[centre] * g[0];
    for (std::size_t q = 1; q <= pad; ++q) sum += (k0[centre - q] + k0[centre + q]) * g[q];
    const double conv = dx * sum / kSqrt2Pi;
    dev[i] = std::abs(conv - rd_expensive_kernel(p, dx * static_cast<double>(i)));
  });
  return *std::max_element(dev.begin(), dev.end());
}

DesignThresholds rd_thresholds(const ReactionDiffusionParams& p, double alpha, double beta,
                               double kappa, double gamma) {
  p.validate();
  if (!(p.T > 0.0)) throw DomainError("thresholds need T > 0");
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0) || !(kappa > 0.0) || !(gamma >= 1.0)) {
    throw DomainError("need 0 < alpha < 1, beta > 0, kappa > 0, gamma >= 1");
  }
  const double c = p.c;
  const double d = p.d;
  const double T = p.T;
  DesignThresholds th;
  th.alpha = alpha;
  th.beta = beta;
  th.kappa = kappa;
  th.gamma = gamma;
  th.D0 = std::erfc(std::sqrt(c * T));
  const double decay = std::sqrt(c / (std::numbers::pi * T)) * std::exp(-c * T);
  th.D2 = c * th.D0 / (2.0 * d) - decay / (2.0 * d);
  th.D4 = 2.0 * c * c * th.D0 / (d * d) - decay / (d * d) * (c + 1.0 / (2.0 * T));
  const double D4 = std::abs(th.D4);
  th.x_th1 = std::sqrt(12.0 / D4 * (th.D2 + std::sqrt(th.D2 * th.D2 + th.D0 * D4 / 6.0)));
  th.x_th2 = 2.0 * (std::sqrt(d * T) + std::sqrt(c * d) * T);
  th.x_th0 = gamma * std::sqrt(d / c);
  th.x_thT = kappa * std::sqrt(2.0 * d * T);
  th.gain_gap = std::erf(std::sqrt(c * T));
  th.delay_dominates = std::sqrt(2.0 * c * T) > gamma / kappa;
  th.consistent = alpha * th.x_th1 <= beta * th.x_th2;
  return th;
}

double rd_design_approximation(const ReactionDiffusionParams& p, const DesignThresholds& th,
                               double x) {
  p.validate();
  if (!th.consistent) throw DomainError("alpha x_th1 exceeds beta x_th2");
  x = std::abs(x);
  const double k00 = delay_free_peak(p);
  const double inner = th.alpha * th.x_th1;
  const double outer = th.beta * th.x_th2;
  auto parabola = [&](double y) { return k00 * (th.D0 + th.D2 * y * y); };
  if (x <= inner) return parabola(x);
  if (x >= outer) return rd_delay_free_kernel(p, x);
  const double t = (x - inner) / (outer - inner);
  return (1.0 - t) * parabola(inner) + t * rd_delay_free_kernel(p, outer);
}

double rd_tail_remainder(const ReactionDiffusionParams& p, double x) {
  p.validate();
  if (p.T == 0.0) return 0.0;
  x = std::abs(x);
  const double h = 2.0 * std::sqrt(p.d * p.T);
  const double q = std::sqrt(p.c * p.T);
  const double u = x / h + q;
  const double v = x / h - q;
  // R = (exp(2 s x) erfc(u) - erfc(v)) / 2 with 2 s x - u^2 = -v^2.
  if (v > 0.0) return 0.5 * std::exp(-v * v) * (erfcx(u) - erfcx(v));
  return 0.5 * (std::exp(-v * v) * erfcx(u) - std::erfc(v));
}

double rd_tail_remainder_bound(const ReactionDiffusionParams& p, double x) {
  p.validate();
  if (!(p.T > 0.0)) throw DomainError("tail bound needs T > 0");
  x = std::abs(x);
  const double band = 2.0 * std::sqrt(p.d * p.c) * p.T;
  if (!(x > band)) {
    std::ostringstream os;
    os << "tail bound needs |x| > 2 sqrt(dc) T = " << band;
    throw DomainError(os.str());
  }
  const double sigma = std::sqrt(2.0 * p.d * p.T);
  const double plus = x + band;
  const double first = std::exp(-0.5 * (x * x / (sigma * sigma) + 2.0 * p.c * p.T)) / kSqrt2Pi *
                       (sigma / plus - sigma * sigma * sigma / (plus * plus * plus));
  const double shift = x / sigma - std::sqrt(2.0 * p.c * p.T);
  const double second = std::exp(-0.5 * shift * shift) / kSqrt2Pi * sigma / (x - band);
  return first - second;
}

TruncationResult truncation_analysis(const ReactionDiffusionParams& p, const SpatialKernel& kernel,
                                     double cutoff, const SymbolFunction& sym, double kappa,
                                     double gamma, Execution exec) {
  p.validate();
  sym.validate();
  if (!(cutoff > 0.0)) throw DomainError("cutoff must be positive");
  if (!(kappa > 0.0) || !(gamma > 0.0)) throw DomainError("kappa and gamma must be positive");
  if (kernel.values.size() < 3 || kernel.values.size() % 2 == 0) {
    throw DomainError("kernel grid must be symmetric about the origin");
  }
  if (sym.lambda_max > std::numbers::pi / kernel.dx * (1.0 + 1e-12)) {
    throw AliasError("lambda_max above the Nyquist frequency of the kernel grid");
  }

  SpatialKernel cut = kernel;
  cut.provenance = KernelProvenance::truncated;
  for (std::size_t i = 0; i < cut.values.size(); ++i) {
    if (std::abs(cut.x(i)) > cutoff) cut.values[i] = 0.0;
  }

  const std::size_t n = sym.n_lambda;
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = sym.a_of_lambda(sym.lambda(i));
  std::vector<double> j_cut(n, 0.0);
  std::vector<double> j_full(n, 0.0);
  std::vector<char> ok_cut(n, 0);
  std::vector<char> ok_full(n, 0);

  auto cost = [&](double ai, double k, double& j) {
    try {
      const ScalarPlant plant{ai, p.T, p.r};
      if (!plant.stabilizable() || !stability_interval(plant).contains(k)) return false;
      j = variance_integral(plant, k).j_value;
      return std::isfinite(j);
    } catch (const std::exception&) {
      return false;
    }
  };
  detail::for_each_index(exec, n, [&](std::size_t i) {
    const double lambda = sym.lambda(i);
    ok_cut[i] = cost(a[i], kernel_symbol(cut, lambda), j_cut[i]);
    ok_full[i] = cost(a[i], kernel_symbol(kernel, lambda), j_full[i]);
  });

  auto integrate = [&](const std::vector<double>& j) {
    double sum = 0.5 * (j.front() + j.back());
    for (std::size_t i = 1; i + 1 < n; ++i) sum += j[i];
    return 2.0 * sym.spacing() * sum;
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (!ok_full[i]) {
      throw InstabilityError(format_lambda("untruncated kernel does not stabilize lambda=",
                                           sym.lambda(i)));
    }
  }
  TruncationResult out;
  out.delay_dominates = std::sqrt(2.0 * p.c * p.T) > gamma / kappa;
  out.j_full = integrate(j_full);
  const auto bad = std::find(ok_cut.begin(), ok_cut.end(), 0);
  out.stable = bad == ok_cut.end();
  if (out.stable) {
    out.j_truncated = integrate(j_cut);
  } else {
    out.first_unstable_lambda = sym.lambda(static_cast<std::size_t>(bad - ok_cut.begin()));
  }
  return out;
}

SpectralDesign small_delay_symbol(const SpectralDesign& design0, double T, double r) {
  if (!(T >= 0.0) || !(r > 0.0)) throw DomainError("need T >= 0 and r > 0");
  if (!design0.complete()) throw DomainError("delay-free design has missing gains");
  SpectralDesign out = design0;
  out.T = T;
  out.r = r;
  for (auto& s : out.samples) {
    s.k = (1.0 - s.a * T) * *s.k - T / r;
    s.j.reset();
  }
  return out;
}

SpatialKernel small_delay_kernel(const SpectralDesign& design0, const SymbolFunction& sym, double T,
                                 double r, double dx, double L, Execution exec) {
  sym.validate();
  if (design0.samples.size() != sym.n_lambda) {
    throw DomainError("design and symbol grids differ");
  }
  const double weight = -T / r;
  SpatialKernel out = kernel_from_symbol(small_delay_symbol(design0, T, r), dx, L,
                                         KernelProvenance::small_delay, weight, exec);
  double a_max = 0.0;
  for (const auto& s : design0.samples) a_max = std::max(a_max, std::abs(s.a));
  if (a_max * T > 0.1) {
    std::ostringstream os;
    os << "symbol not uniformly bounded over the window: max |a| T = " << a_max * T
       << " > 0.1; small-delay expansion outside its hypothesis";
    out.warnings.push_back(os.str());
  }
  return out;
}

}  // namespace delaykern
