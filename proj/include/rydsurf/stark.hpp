#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "rydsurf/atomic/dipole.hpp"
#include "rydsurf/atomic/quantum_defects.hpp"
#include "rydsurf/atomic/radial.hpp"
#include "rydsurf/atomic/state.hpp"
#include "rydsurf/error.hpp"
#include "rydsurf/units.hpp"

// Quadratic dc Stark effect of fine-structure Rydberg states.
//
// Sign convention. The stored polarizability alpha is the textbook one,
// W(F) = W(0) - alpha F^2 / 2, so alpha > 0 lowers the level. The EIT model
// parameter delta_c (the coupling detuning) obeys delta_c = alpha F^2 / 2,
// i.e. delta_c = -(W(F) - W(0)), which makes |F| = sqrt(2 delta_c / alpha)
// real exactly when delta_c and alpha share a sign.

namespace rydsurf {

/// Intermediate-state window of the second-order sum.
struct BasisWindow {
  int delta_n = 20;
  /// Intermediate states closer than this (MHz) abort the sum.
  double degeneracy_threshold_mhz = 10.0;
};

struct Polarizability {
  /// Signed alpha in MHz / (V/cm)^2.
  double value = 0.0;
  RydbergState state{5, 0, 0.5, 0.5};
  int delta_n = 0;
  std::vector<int> l_set;
  /// Contribution of the outermost n' shells, same units as value.
  double truncation_estimate = 0.0;

  bool converged(double rel = 0.01) const { return truncation_estimate < rel * std::abs(value); }
};

namespace detail {

// Radial functions keyed by (n, l, 2j), computed once per polarizability call.
class WavefunctionCache {
 public:
  WavefunctionCache(const QuantumDefectTable& table, const RadialGrid& grid) : table_(table), grid_(grid) {}

  const RadialWavefunction& get(const RydbergState& s) {
    const auto key = std::make_tuple(s.n(), s.l(), s.two_j());
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, radial_wavefunction(s, table_, grid_)).first;
    return it->second;
  }

 private:
  const QuantumDefectTable& table_;
  RadialGrid grid_;
  std::map<std::tuple<int, int, int>, RadialWavefunction> cache_;
};

// Lowest usable intermediate n: the series must be Rydberg-like (nu >= l + 1),
// which excludes occupied core shells of alkali atoms.
inline bool usable_intermediate(int n, int l, int two_j, const QuantumDefectTable& table) {
  if (n <= l) return false;
  const auto s = RydbergState::from_twice(n, l, two_j, two_j);
  double nu = 0.0;
  try {
    nu = effective_n(s, table);
  } catch (const UnsupportedStateError&) {
    return false;
  }
  return nu >= l + 1.0 - 1e-9;
}

}  // namespace detail

/// Second-order polarizability of `state` by direct summation over
/// dipole-coupled states with |n' - n| <= window.delta_n and every allowed (l', j').
inline Polarizability polarizability(const RydbergState& state, const QuantumDefectTable& table,
                                     const BasisWindow& window = {}, const RadialGrid& grid = {}) {
  if (window.delta_n < 1) throw ModelError("basis window must include neighbouring shells");
  detail::WavefunctionCache cache(table, grid);
  const auto& psi = cache.get(state);
  const double e_state = energy_level(state, table);

  Polarizability out{0.0, state, window.delta_n, {}, 0.0};
  double edge = 0.0;
  double sum = 0.0;  // atomic units
  for (int lp : {state.l() - 1, state.l() + 1}) {
    if (lp < 0) continue;
    out.l_set.push_back(lp);
    for (int two_jp : {2 * lp - 1, 2 * lp + 1}) {
      if (two_jp < 1 || std::abs(two_jp - state.two_j()) > 2 || std::abs(state.two_mj()) > two_jp) continue;
      const double angular = dipole_z_angular(state.l(), state.two_j(), state.two_mj(), lp, two_jp, state.two_mj());
      if (angular == 0.0) continue;
      for (int np = state.n() - window.delta_n; np <= state.n() + window.delta_n; ++np) {
        if (!detail::usable_intermediate(np, lp, two_jp, table)) continue;
        const auto k = RydbergState::from_twice(np, lp, two_jp, state.two_mj());
        const double de_mhz = energy_level(k, table) - e_state;
        if (std::abs(de_mhz) < window.degeneracy_threshold_mhz) {
          throw DegeneracyError("near-degenerate intermediate state " + k.label() + " for " + state.label());
        }
        const double d = angular * radial_integral(psi, cache.get(k));
        const double term = 2.0 * d * d / units::energy_mhz_to_au(de_mhz);
        sum += term;
        if (std::abs(np - state.n()) == window.delta_n) edge += std::abs(term);
      }
    }
  }
  out.value = sum * units::polarizability_au_to_mhz_per_vcm2;
  out.truncation_estimate = edge * units::polarizability_au_to_mhz_per_vcm2;
  return out;
}

/// Polarizabilities of every mj >= 1/2 component of (n, l, j).
inline std::vector<Polarizability> polarizability_components(const RydbergState& state,
                                                             const QuantumDefectTable& table,
                                                             const BasisWindow& window = {},
                                                             const RadialGrid& grid = {}) {
  std::vector<Polarizability> out;
  for (int tmj = 1; tmj <= state.two_j(); tmj += 2) {
    out.push_back(polarizability(RydbergState::from_twice(state.n(), state.l(), state.two_j(), tmj), table, window, grid));
  }
  return out;
}

struct ScalarTensor {
  double alpha0 = 0.0;
  double alpha2 = 0.0;
  double j = 0.5;
  /// False for j = 1/2, where the tensor part does not exist.
  bool tensor_defined = false;
  /// Largest relative deviation of the reconstruction from the inputs.
  double max_residual = 0.0;

  double at(double mj) const {
    if (!tensor_defined) return alpha0;
    return alpha0 + alpha2 * (3.0 * mj * mj - j * (j + 1.0)) / (j * (2.0 * j - 1.0));
  }
};

/// Least-squares split alpha(mj) = alpha0 + alpha2 (3 mj^2 - j(j+1)) / (j(2j-1)).
inline ScalarTensor scalar_tensor(std::span<const Polarizability> components) {
  if (components.empty()) throw ModelError("scalar_tensor: no components");
  const auto& first = components.front().state;
  std::vector<bool> seen(static_cast<std::size_t>(first.two_j() + 1), false);
  for (const auto& c : components) {
    if (c.state.n() != first.n() || c.state.l() != first.l() || c.state.two_j() != first.two_j()) {
      throw ModelError("scalar_tensor: components belong to different series");
    }
    seen[static_cast<std::size_t>(std::abs(c.state.two_mj()))] = true;
  }
  for (int tmj = 1; tmj <= first.two_j(); tmj += 2) {
    if (!seen[static_cast<std::size_t>(tmj)]) throw ModelError("scalar_tensor: missing |mj| component");
  }

  ScalarTensor out;
  out.j = first.j();
  if (first.two_j() == 1) {
    double mean = 0.0;
    for (const auto& c : components) mean += c.value;
    out.alpha0 = mean / static_cast<double>(components.size());
    out.alpha2 = 0.0;
    out.tensor_defined = false;
  } else {
    // Linear regression of alpha on the tensor factor t(mj).
    double st = 0, sa = 0, stt = 0, sta = 0;
    const double n = static_cast<double>(components.size());
    for (const auto& c : components) {
      const double mj = c.state.mj();
      const double t = (3.0 * mj * mj - out.j * (out.j + 1.0)) / (out.j * (2.0 * out.j - 1.0));
      st += t;
      sa += c.value;
      stt += t * t;
      sta += t * c.value;
    }
    out.alpha2 = (n * sta - st * sa) / (n * stt - st * st);
    out.alpha0 = (sa - out.alpha2 * st) / n;
    out.tensor_defined = true;
  }
  for (const auto& c : components) {
    const double scale = std::max(std::abs(c.value), 1e-300);
    out.max_residual = std::max(out.max_residual, std::abs(out.at(c.state.mj()) - c.value) / scale);
  }
  return out;
}

namespace detail {

inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || y[i] == 0.0) throw ModelError("log-log regression: non-positive input");
    const double lx = std::log(x[i]);
    const double ly = std::log(std::abs(y[i]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline void check_scaling_input(std::size_t count, double range) {
  if (count < 5) throw ModelError("scaling_exponent: need at least 5 points");
  if (range < 10.0) throw ModelError("scaling_exponent: n range must span at least 10");
}

}  // namespace detail

/// Least-squares slope of log|alpha| against log(n*).
inline double scaling_exponent(std::span<const double> n_eff, std::span<const double> alpha) {
  if (n_eff.size() != alpha.size()) throw ModelError("scaling_exponent: size mismatch");
  if (n_eff.empty()) throw ModelError("scaling_exponent: need at least 5 points");
  const auto [lo, hi] = std::minmax_element(n_eff.begin(), n_eff.end());
  detail::check_scaling_input(n_eff.size(), *hi - *lo);
  return detail::log_log_slope(n_eff, alpha);
}

/// Scaling exponent of a computed series against n*; the range
/// precondition applies to the principal quantum numbers.
inline double scaling_exponent(std::span<const Polarizability> series, const QuantumDefectTable& table) {
  if (series.empty()) throw ModelError("scaling_exponent: need at least 5 points");
  std::vector<double> nu;
  std::vector<double> a;
  int nmin = series.front().state.n();
  int nmax = nmin;
  for (const auto& p : series) {
    nu.push_back(effective_n(p.state, table));
    a.push_back(p.value);
    nmin = std::min(nmin, p.state.n());
    nmax = std::max(nmax, p.state.n());
  }
  detail::check_scaling_input(series.size(), static_cast<double>(nmax - nmin));
  return detail::log_log_slope(nu, a);
}

/// delta_c = alpha F^2 / 2 in MHz for a field in V/cm.
inline double stark_shift(double alpha_mhz_per_vcm2, double field_v_per_cm) {
  return 0.5 * alpha_mhz_per_vcm2 * field_v_per_cm * field_v_per_cm;
}

inline double stark_shift(const Polarizability& alpha, double field_v_per_cm) {
  return stark_shift(alpha.value, field_v_per_cm);
}

}  // namespace rydsurf
