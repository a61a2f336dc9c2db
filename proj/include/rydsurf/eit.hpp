#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rydsurf/error.hpp"

// Ladder-EIT probe susceptibility in the weak-probe limit.
//
//   chi(dp) = i Gp / (Gp + 2i dp + Oc^2 / (Gc + 2i (dp + dc)))
//
// normalized so that Im chi = 1 on resonance without coupling light. The
// transparency dip sits at dp = -dc.

namespace rydsurf {

struct EITParams {
  double gamma_p = 6.0666;  // MHz
  double gamma_c = 0.5;     // MHz
  double delta_c = 0.0;     // MHz
  double omega_c = 0.0;     // MHz
  double od0 = 1.0;
  double offset = 0.0;  // MHz

  void validate() const {
    if (!(gamma_p > 0.0)) throw ModelError("EIT: gamma_p must be positive");
    if (!(gamma_c >= 0.0)) throw ModelError("EIT: gamma_c must be non-negative");
    if (!(omega_c >= 0.0)) throw ModelError("EIT: omega_c must be non-negative");
    if (!(od0 >= 0.0)) throw ModelError("EIT: od0 must be non-negative");
    if (!std::isfinite(delta_c) || !std::isfinite(offset)) throw ModelError("EIT: non-finite detuning");
  }
};

/// Probe spectrum at one atom-surface distance. A sigma of zero marks an
/// unknown noise level.
struct Spectrum {
  std::vector<double> detunings;  // MHz
  std::vector<double> od;
  std::vector<double> sigma;
  double z_um = 0.0;

  std::size_t size() const noexcept { return detunings.size(); }

  void validate() const {
    if (detunings.empty()) throw ModelError("spectrum is empty");
    if (od.size() != detunings.size() || sigma.size() != detunings.size()) {
      throw ModelError("spectrum columns have different lengths");
    }
    for (std::size_t i = 0; i < size(); ++i) {
      if (!std::isfinite(od[i]) || !std::isfinite(sigma[i]) || sigma[i] < 0.0) {
        throw ModelError("spectrum contains invalid values");
      }
      if (i > 0 && !(detunings[i] > detunings[i - 1])) throw ModelError("spectrum detunings must increase strictly");
    }
  }

  bool has_sigma() const {
    for (double s : sigma) {
      if (!(s > 0.0)) return false;
    }
    return !sigma.empty();
  }
};

inline std::complex<double> susceptibility(double delta_p, const EITParams& p) {
  using namespace std::complex_literals;
  p.validate();
  std::complex<double> dressing = 0.0;
  if (p.omega_c > 0.0) {
    const std::complex<double> coherence = p.gamma_c + 2.0i * (delta_p + p.delta_c);
    if (coherence == 0.0) return 0.0;  // limit of a lossless two-photon resonance
    dressing = p.omega_c * p.omega_c / coherence;
  }
  return 1.0i * p.gamma_p / (p.gamma_p + 2.0i * delta_p + dressing);
}

inline double optical_density(double delta_p, const EITParams& p) {
  return p.od0 * susceptibility(delta_p - p.offset, p).imag();
}

/// n equally spaced detunings from lo to hi inclusive.
inline std::vector<double> detuning_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw ModelError("detuning grid needs n >= 2 and hi > lo");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

struct Noise {
  double rms = 0.0;
  std::uint64_t seed = 0;
};

/// One component of an inhomogeneous coupling-detuning distribution.
struct ShiftComponent {
  double delta_c = 0.0;
  double weight = 1.0;
};

namespace detail {

inline void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw ModelError("detuning grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ModelError("detuning grid must increase strictly");
  }
}

inline void add_noise(Spectrum& s, const std::optional<Noise>& noise) {
  if (!noise || noise->rms <= 0.0) return;
  std::mt19937_64 rng(noise->seed);
  std::normal_distribution<double> gauss(0.0, noise->rms);
  for (auto& v : s.od) v += gauss(rng);
  std::fill(s.sigma.begin(), s.sigma.end(), noise->rms);
}

}  // namespace detail

/// Synthetic spectrum on `grid`, optionally with seeded Gaussian noise.
inline Spectrum spectrum(const EITParams& p, std::span<const double> grid, const std::optional<Noise>& noise = {},
                         double z_um = 0.0) {
  p.validate();
  detail::check_grid(grid);
  Spectrum s{{grid.begin(), grid.end()}, std::vector<double>(grid.size()), std::vector<double>(grid.size(), 0.0), z_um};
  for (std::size_t i = 0; i < grid.size(); ++i) s.od[i] = optical_density(grid[i], p);
  detail::add_noise(s, noise);
  return s;
}

/// Spectrum averaged over a weighted distribution of delta_c; p.delta_c is ignored.
inline Spectrum averaged_spectrum(const EITParams& p, std::span<const double> grid,
                                  std::span<const ShiftComponent> shifts, const std::optional<Noise>& noise = {},
                                  double z_um = 0.0) {
  p.validate();
  detail::check_grid(grid);
  double total = 0.0;
  for (const auto& c : shifts) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.delta_c)) throw ModelError("shift distribution has invalid entries");
    total += c.weight;
  }
  if (!(total > 0.0)) throw ModelError("shift distribution weights must sum to a positive value");
  Spectrum s{{grid.begin(), grid.end()}, std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0),
             z_um};
  EITParams q = p;
  for (const auto& c : shifts) {
    if (c.weight == 0.0) continue;
    q.delta_c = c.delta_c;
    const double w = c.weight / total;
    for (std::size_t i = 0; i < grid.size(); ++i) s.od[i] += w * optical_density(grid[i], q);
  }
  detail::add_noise(s, noise);
  return s;
}

}  // namespace rydsurf
