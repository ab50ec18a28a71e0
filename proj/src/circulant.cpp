#include "delaykern/circulant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "delaykern/asymptotic_gains.hpp"
#include "delaykern/errors.hpp"
#include "delaykern/scalar_core.hpp"

namespace delaykern {
namespace {

// cos(2 pi l j / n) with the angle reduced to an exact integer residue.
double ring_cos(std::size_t l, std::size_t j, std::size_t n) {
  const std::size_t t = (l * j) % n;
  return std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n));
}

void require_weight(double T, double r) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("delay must be non-negative");
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("control weight must be positive");
}

}  // namespace

void CirculantSystem::validate() const {
  const std::size_t len = n();
  if (len < 2) throw DomainError("a circulant system needs at least two agents");
  double scale = 1.0;
  for (double v : a_row) {
    if (!std::isfinite(v)) throw DomainError("coupling entries must be finite");
    scale = std::max(scale, std::abs(v));
  }
  for (std::size_t i = 1; i < len; ++i) {
    if (std::abs(a_row[i] - a_row[len - i]) > 1e-12 * scale) {
      std::ostringstream os;
      os << "coupling row is not symmetric at index " << i;
      throw SymmetryError(os.str());
    }
  }
}

const char* to_string(GainMethod m) noexcept {
  switch (m) {
    case GainMethod::numerical_opt: return "numerical_opt";
    case GainMethod::small_delay: return "small_delay";
    case GainMethod::delay_free: return "delay_free";
  }
  return "unknown";
}

std::vector<double> real_dft(std::span<const double> row) {
  const std::size_t n = row.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += row[j] * ring_cos(l, j, n);
    out[l] = sum;
  }
  return out;
}

std::vector<double> inverse_real_dft(std::span<const double> modes) {
  std::vector<double> out = real_dft(modes);
  const double scale = 1.0 / static_cast<double>(modes.size());
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> circulant_apply(std::span<const double> row, std::span<const double> v) {
  const std::size_t n = row.size();
  if (v.size() != n) throw DomainError("vector length differs from the circulant size");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += row[(j + n - i) % n] * v[j];
    out[i] = sum;
  }
  return out;
}

std::vector<double> modes_of(const CirculantSystem& sys) {
  sys.validate();
  const std::size_t n = sys.n();
  // The sine sums vanish for a symmetric row; check before discarding them.
  double scale = 1.0;
  for (double v : sys.a_row) scale = std::max(scale, std::abs(v));
  for (std::size_t l = 0; l < n; ++l) {
    double im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t t = (l * j) % n;
      im += sys.a_row[j] *
            std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n));
    }
    if (std::abs(im) > 1e-10 * scale * static_cast<double>(n)) {
      throw SymmetryError("coupling row has a non-real spectrum");
    }
  }
  return real_dft(sys.a_row);
}

CirculantGains design_gains(const CirculantSystem& sys, double T, double r, GainMethod method,
                            Execution exec) {
  require_weight(T, r);
  const std::vector<double> modes = modes_of(sys);
  const std::size_t n = sys.n();
  const std::size_t half = n / 2 + 1;
  for (std::size_t l = 0; l < half; ++l) {
    if (T > 0.0 && modes[l] * T >= 1.0) {
      std::ostringstream os;
      os.precision(17);
      os << "mode " << l << " has a*T = " << modes[l] * T << " >= 1";
      throw UnstabilizableError(os.str(), l);
    }
  }

  CirculantGains out;
  out.method = method;
  out.k_modes.assign(n, 0.0);
  std::vector<char> failed(half, 0);
  detail::for_each_index(exec, half, [&](std::size_t l) {
    const double a = modes[l];
    switch (method) {
      case GainMethod::delay_free:
        out.k_modes[l] = delay_free_gain(a, r);
        break;
      case GainMethod::small_delay:
        out.k_modes[l] = small_delay_gain(a, T, r).k;
        break;
      case GainMethod::numerical_opt:
        try {
          out.k_modes[l] = optimal_gain(ScalarPlant{a, T, r}).k;
        } catch (const std::exception&) {
          failed[l] = 1;
        }
        break;
    }
  });
  for (std::size_t l = 0; l < half; ++l) {
    if (failed[l]) throw UnstabilizableError("optimal gain failed for a mode", l);
  }
  for (std::size_t l = half; l < n; ++l) out.k_modes[l] = out.k_modes[n - l];

  out.k_row = inverse_real_dft(out.k_modes);
  out.self_gain = out.k_row[0];

  if (method == GainMethod::small_delay) {
    std::vector<double> k0_modes(n);
    for (std::size_t l = 0; l < n; ++l) k0_modes[l] = delay_free_gain(modes[l], r);
    const std::vector<double> k0_row = inverse_real_dft(k0_modes);
    const std::vector<double> ak0 = circulant_apply(sys.a_row, k0_row);
    double residual = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double direct = k0_row[j] - T * ak0[j] - (j == 0 ? T / r : 0.0);
      residual = std::max(residual, std::abs(direct - out.k_row[j]));
    }
    out.algebra_residual = residual;
  }
  return out;
}

bool verify_closed_loop(const CirculantSystem& sys, const CirculantGains& gains, double T) {
  std::vector<double> modes;
  try {
    modes = modes_of(sys);
  } catch (const Error&) {
    return false;
  }
  if (gains.k_modes.size() != modes.size()) return false;
  for (std::size_t l = 0; l < modes.size(); ++l) {
    const ScalarPlant plant{modes[l], T, 1.0};
    if (!plant.stabilizable()) return false;
    if (!stability_interval(plant).contains(gains.k_modes[l])) return false;
  }
  return true;
}

double h2_cost(const CirculantSystem& sys, const CirculantGains& gains, double T, double r) {
  require_weight(T, r);
  if (!verify_closed_loop(sys, gains, T)) {
    throw InstabilityError("gains do not stabilize every mode");
  }
  const std::vector<double> modes = modes_of(sys);
  double total = 0.0;
  for (std::size_t l = 0; l < modes.size(); ++l) {
    total += variance_integral(ScalarPlant{modes[l], T, r}, gains.k_modes[l]).j_value;
  }
  return total;
}

}  // namespace delaykern
