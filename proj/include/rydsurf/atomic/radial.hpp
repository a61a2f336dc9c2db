#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rydsurf/atomic/quantum_defects.hpp"
#include "rydsurf/atomic/state.hpp"
#include "rydsurf/error.hpp"

namespace rydsurf {

/// Radial integration domain in Bohr radii.
///
/// The integrator works on the scaled coordinate x = sqrt(r) with a uniform
/// step `step`; grid points sit at integer multiples of the step so that
/// wavefunctions computed on the same step share grid points. An unset
/// `r_max` is chosen per state as 2 nu (nu + 15).
struct RadialGrid {
  double r_min = 1e-3;
  std::optional<double> r_max;
  double step = 0.005;

  void validate() const {
    if (!(r_min > 0.0)) throw ModelError("radial grid: r_min must be positive");
    if (r_max && !(*r_max > r_min)) throw ModelError("radial grid: r_max must exceed r_min");
    if (!(step > 0.0)) throw ModelError("radial grid: step must be positive");
  }
};

/// Coulomb-approximation radial function sampled on x_k = k * step,
/// k = first_index .. first_index + size() - 1.
///
/// Stored as y(x) = r^{-1/4} u(r) with u = r R; normalized so that
/// 2 * integral x^2 y^2 dx = integral u^2 dr = 1.
struct RadialWavefunction {
  double nu = 0.0;
  int l = 0;
  double step = 0.0;
  std::size_t first_index = 0;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t last_index() const noexcept { return first_index + y.size() - 1; }
  double x(std::size_t k) const noexcept { return static_cast<double>(first_index + k) * step; }
  double r(std::size_t k) const noexcept { return x(k) * x(k); }
  double u(std::size_t k) const noexcept { return std::sqrt(x(k)) * y[k]; }
  /// Radial function R(r) = u(r) / r.
  double radial(std::size_t k) const noexcept { return u(k) / r(k); }
};

namespace detail {

// Composite Simpson on uniformly spaced samples; the last interval of an
// even-length sample falls back to the trapezoid rule.
inline double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * h * (f[0] + f[1]);
  const std::size_t m = (n % 2 == 1) ? n : n - 1;
  double s = f[0] + f[m - 1];
  for (std::size_t i = 1; i + 1 < m; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
  double total = s * h / 3.0;
  if (m != n) total += 0.5 * h * (f[n - 2] + f[n - 1]);
  return total;
}

}  // namespace detail

/// Classical inner turning point of the Coulomb problem, r = nu^2 (1 - sqrt(1 - l(l+1)/nu^2)).
inline double inner_turning_point(double nu, int l) {
  const double q = static_cast<double>(l * (l + 1)) / (nu * nu);
  if (q >= 1.0) return nu * nu;
  return nu * nu * (1.0 - std::sqrt(1.0 - q));
}

/// Integrates the Coulomb radial equation inward at E = -1/(2 nu^2).
///
/// With x = sqrt(r) and u = x^{1/2} y the equation reads
/// y'' = [(2l + 1/2)(2l + 3/2)/x^2 - 8 + 4 x^2/nu^2] y, solved by Numerov
/// from r_max towards r_min. Inside the inner classical turning point the
/// integration stops where |y| begins to grow again: for non-integer nu the
/// irregular Coulomb solution takes over there.
inline RadialWavefunction radial_wavefunction(double nu, int l, const RadialGrid& grid = {}) {
  grid.validate();
  if (!(nu > l + 0.5)) {
    throw UnsupportedStateError("effective quantum number " + std::to_string(nu) +
                                " too small for l=" + std::to_string(l));
  }
  const double h = grid.step;
  const double r_max = grid.r_max.value_or(2.0 * nu * (nu + 15.0));
  const auto i_first = static_cast<std::size_t>(std::max(1.0, std::ceil(std::sqrt(grid.r_min) / h)));
  const auto i_last = static_cast<std::size_t>(std::floor(std::sqrt(r_max) / h));
  if (i_last < i_first + 4) throw ModelError("radial grid too coarse for the requested range");

  const std::size_t n = i_last - i_first + 1;
  const double centrifugal = (2.0 * l + 0.5) * (2.0 * l + 1.5);
  const double inv_nu2 = 1.0 / (nu * nu);
  auto g = [&](std::size_t k) {
    const double x = static_cast<double>(i_first + k) * h;
    const double x2 = x * x;
    return centrifugal / x2 - 8.0 + 4.0 * x2 * inv_nu2;
  };

  std::vector<double> y(n, 0.0);
  std::vector<double> f(n);
  const double h12 = h * h / 12.0;
  for (std::size_t k = 0; k < n; ++k) f[k] = 1.0 - h12 * g(k);

  y[n - 1] = 0.0;
  y[n - 2] = 1e-10;
  for (std::size_t k = n - 2; k >= 1; --k) {
    y[k - 1] = ((12.0 - 10.0 * f[k]) * y[k] - f[k + 1] * y[k + 1]) / f[k - 1];
    if (std::abs(y[k - 1]) > 1e100) {
      for (std::size_t i = k - 1; i < n; ++i) y[i] *= 1e-100;
    }
  }

  // Divergence cut inside the inner turning point of the effective potential.
  std::size_t turning = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (g(k) < 0.0) {
      turning = k;
      break;
    }
  }
  std::size_t cut = 0;
  for (std::size_t k = turning; k >= 1; --k) {
    if (std::abs(y[k - 1]) > std::abs(y[k])) {
      cut = k;
      break;
    }
  }

  RadialWavefunction wf;
  wf.nu = nu;
  wf.l = l;
  wf.step = h;
  wf.first_index = i_first + cut;
  wf.y.assign(y.begin() + static_cast<std::ptrdiff_t>(cut), y.end());

  std::vector<double> integrand(wf.size());
  for (std::size_t k = 0; k < wf.size(); ++k) integrand[k] = 2.0 * wf.x(k) * wf.x(k) * wf.y[k] * wf.y[k];
  const double norm = std::sqrt(detail::simpson(integrand, h));
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ModelError("radial wavefunction normalization failed");
  for (auto& v : wf.y) v /= norm;
  return wf;
}

inline RadialWavefunction radial_wavefunction(const RydbergState& s, const QuantumDefectTable& table,
                                              const RadialGrid& grid = {}) {
  return radial_wavefunction(effective_n(s, table), s.l(), grid);
}

/// Integral of u_a r^power u_b dr over the common support of two functions
/// sampled with the same step.
inline double radial_integral(const RadialWavefunction& a, const RadialWavefunction& b, int power = 1) {
  if (a.step != b.step) throw ModelError("radial integral: wavefunctions use different grid steps");
  const std::size_t lo = std::max(a.first_index, b.first_index);
  const std::size_t hi = std::min(a.last_index(), b.last_index());
  if (hi <= lo) return 0.0;
  std::vector<double> integrand(hi - lo + 1);
  for (std::size_t i = lo; i <= hi; ++i) {
    const double x = static_cast<double>(i) * a.step;
    // u_a u_b r^p dr = x y_a y_b x^{2p} 2x dx
    integrand[i - lo] = 2.0 * x * x * std::pow(x, 2 * power) * a.y[i - a.first_index] * b.y[i - b.first_index];
  }
  return detail::simpson(integrand, a.step);
}

/// Radial dipole integral <a| r |b> in Bohr radii. Requires |l_a - l_b| = 1.
inline double radial_matrix_element(const RydbergState& a, const RydbergState& b,
                                    const QuantumDefectTable& table, const RadialGrid& grid = {}) {
  if (std::abs(a.l() - b.l()) != 1) {
    throw SelectionRuleError("radial dipole element needs |l_a - l_b| = 1: " + a.label() + ", " + b.label());
  }
  return radial_integral(radial_wavefunction(a, table, grid), radial_wavefunction(b, table, grid));
}

}  // namespace rydsurf
