#pragma once

#include <algorithm>
#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "rydsurf/error.hpp"
#include "rydsurf/lsq.hpp"
#include "rydsurf/samples.hpp"
#include "rydsurf/units.hpp"

// Electric field of a Gaussian patch of surface dipoles (normal to the
// surface, density d0 exp(-r^2 / 2w^2)). On the patch axis
//
//   E_z(Z) = d0 / (2 w eps0) [(1 + Z^2) sqrt(pi/2) e^{Z^2/2} erfc(Z/sqrt2) - Z],  Z = z/w.
//
// Off axis, with q = k w,
//
//   E_z   = d0/(2 w eps0) int q^2 e^{-qZ - q^2/2} J0(q rho/w) dq
//   E_rho = d0/(2 w eps0) int q^2 e^{-qZ - q^2/2} J1(q rho/w) dq.

namespace rydsurf {

struct PatchModel {
  double d0 = 7e5;       // Debye / um^2
  double w_um = 100.0;   // e^{-1/2} radius
  double sigma_y_um = 130.0;

  void validate() const {
    if (!(d0 >= 0.0) || !std::isfinite(d0)) throw ModelError("patch: d0 must be non-negative");
    if (!(w_um > 0.0) || !std::isfinite(w_um)) throw ModelError("patch: w must be positive");
    if (!(sigma_y_um >= 0.0)) throw ModelError("patch: sigma_y must be non-negative");
  }
};

struct FieldVector {
  double x = 0.0, y = 0.0, z = 0.0;  // V/cm
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

/// d0 / (2 w eps0) in V/cm.
inline double patch_prefactor(const PatchModel& m) {
  const double density = units::dipole_density_to_si(m.d0);  // C/m
  return density / (2.0 * m.w_um * units::um * units::vacuum_permittivity) / 100.0;
}

/// e^{x^2} erfc(x) for x >= 0.
inline double scaled_erfc(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // asymptotic series
  const double inv = 1.0 / (x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 12; ++k) {
    term *= -(2.0 * k - 1.0) * 0.5 * inv;
    sum += term;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

/// Bracket of the on-axis formula; tends to sqrt(pi/2) at Z = 0 and 2/Z^3 for large Z.
inline double patch_bracket(double Z) {
  if (Z < 0.0) throw ModelError("patch bracket needs Z >= 0");
  if (Z < 8.0) {
    return (1.0 + Z * Z) * std::sqrt(std::numbers::pi / 2.0) * scaled_erfc(Z / std::numbers::sqrt2) - Z;
  }
  // sum_k (-1/2)^k (2k+2)! / (k! Z^{2k+3}), summed until the smallest term
  const double inv2 = 1.0 / (Z * Z);
  double term = 2.0 / (Z * Z * Z);
  double sum = term;
  for (int k = 1; k < 60; ++k) {
    const double next = term * (-0.5) * (2.0 * k + 1.0) * (2.0 * k + 2.0) / k * inv2;
    if (std::abs(next) >= std::abs(term) || std::abs(next) < 1e-18 * std::abs(sum)) break;
    term = next;
    sum += term;
  }
  return sum;
}

inline double onaxis_field(double z_um, const PatchModel& m) {
  m.validate();
  if (z_um < 0.0) throw ModelError("on-axis field needs z >= 0");
  return patch_prefactor(m) * patch_bracket(z_um / m.w_um);
}

namespace detail {

// s-integrals along one azimuth, in patch units (w = 1), with the field
// point projected to rho0 = (px, py). Returns (I_z, I_lateral) such that
// E_z = pref / (2 pi) * sum_phi I_z and the lateral vector follows likewise.
struct RayIntegrals {
  double ez = 0.0;
  double lateral = 0.0;
};

inline RayIntegrals ray_integrals(double px, double py, double Z, double cphi, double sphi, double s_max,
                                  double tol, double& worst) {
  using boost::math::quadrature::gauss_kronrod;
  const double proj = px * cphi + py * sphi;
  const double r0sq = px * px + py * py;
  auto dP = [&](double s) {
    const double r2 = r0sq + 2.0 * s * proj + s * s;
    return -std::exp(-0.5 * r2) * (proj + s);
  };
  auto fz = [&](double s) {
    const double R2 = s * s + Z * Z;
    return -(s * s / (R2 * std::sqrt(R2))) * dP(s);
  };
  auto fl = [&](double s) {
    const double R2 = s * s + Z * Z;
    return (s * s * s / (Z * R2 * std::sqrt(R2))) * dP(s);
  };
  std::vector<double> cuts = {0.0};
  for (double c : {Z, 4.0 * Z, 16.0 * Z, 1.0, 2.0, 4.0}) {
    if (c > 0.0 && c < s_max) cuts.push_back(c);
  }
  cuts.push_back(s_max);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  RayIntegrals out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0, l1 = 0.0;
    out.ez += gauss_kronrod<double, 31>::integrate(fz, cuts[i], cuts[i + 1], 10, tol, &err, &l1);
    worst = std::max(worst, l1 > 0 ? err / l1 : 0.0);
    out.lateral += gauss_kronrod<double, 31>::integrate(fl, cuts[i], cuts[i + 1], 10, tol, &err, &l1);
    worst = std::max(worst, l1 > 0 ? err / l1 : 0.0);
  }
  return out;
}

}  // namespace detail

/// Field at (x, y, z) by direct quadrature over the dipole layer (patch
/// truncated at 6w beyond the field point's lateral offset). Integrates in
/// polar coordinates around the field point: adaptive Gauss-Kronrod in the
/// radius, periodic trapezoid in the azimuth.
inline FieldVector offaxis_field(double x_um, double y_um, double z_um, const PatchModel& m, double rel_tol = 1e-8) {
  m.validate();
  if (!(z_um > 0.0)) throw ModelError("off-axis field needs z > 0");
  const double px = x_um / m.w_um, py = y_um / m.w_um, Z = z_um / m.w_um;
  const double s_max = std::hypot(px, py) + 6.0;
  const double scale = patch_prefactor(m) / (2.0 * std::numbers::pi);

  auto sweep = [&](int n, double& worst) {
    FieldVector sum;
    for (int k = 0; k < n; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / n;
      const double c = std::cos(phi), s = std::sin(phi);
      const auto r = detail::ray_integrals(px, py, Z, c, s, s_max, rel_tol * 1e-2, worst);
      sum.z += r.ez;
      sum.x += c * r.lateral;
      sum.y += s * r.lateral;
    }
    const double dphi = 2.0 * std::numbers::pi / n;
    return FieldVector{scale * sum.x * dphi, scale * sum.y * dphi, scale * sum.z * dphi};
  };

  double worst = 0.0;
  int n = 16;
  FieldVector prev = sweep(n, worst);
  if (worst >= rel_tol && prev.norm() > 0.0) {
    throw QuadratureError("off-axis field: radial quadrature did not reach tolerance", worst);
  }
  double achieved = 1.0;
  while (n < 2048) {
    n *= 2;
    const FieldVector next = sweep(n, worst);
    const double diff = std::sqrt(std::pow(next.x - prev.x, 2) + std::pow(next.y - prev.y, 2) +
                                  std::pow(next.z - prev.z, 2));
    achieved = diff / std::max(next.norm(), 1e-300);
    prev = next;
    if (achieved < rel_tol && n >= 32) break;
  }
  achieved = std::max(achieved, worst);
  if (!(achieved < rel_tol) && prev.norm() > 0.0) {
    throw QuadratureError("off-axis field quadrature did not converge", achieved);
  }
  return prev;
}

namespace detail {

// double-precision evaluation; the default policy promotes to long double
using BesselPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

// Gauss-Legendre nodes for the Hankel integrals at height Z, valid for
// lateral distances up to rho_max (both in units of w). The weights absorb
// q^2 exp(-qZ - q^2/2).
struct HankelGrid {
  std::vector<double> q;
  std::vector<double> weight;

  HankelGrid(double Z, double rho_max) {
    using boost::math::quadrature::gauss;
    const double q_max = std::sqrt(Z * Z + 80.0) - Z;  // integrand below e^{-40}
    const int panels = 2 + static_cast<int>(std::ceil(q_max * std::max(rho_max, 1.0) / std::numbers::pi));
    const double width = q_max / panels;
    const auto& x = gauss<double, 10>::abscissa();
    const auto& wt = gauss<double, 10>::weights();
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * width;
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (double sgn : {-1.0, 1.0}) {
          if (i == 0 && sgn > 0 && x[0] == 0.0) continue;
          const double qq = mid + sgn * 0.5 * width * x[i];
          q.push_back(qq);
          weight.push_back(0.5 * width * wt[i] * qq * qq * std::exp(-qq * Z - 0.5 * qq * qq));
        }
      }
    }
  }

  // (E_z, E_rho) in units of the prefactor at lateral distance rho
  std::array<double, 2> components(double rho) const {
    double ez = 0.0, er = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      ez += weight[i] * boost::math::cyl_bessel_j(0, q[i] * rho, BesselPolicy());
      if (rho > 0.0) er += weight[i] * boost::math::cyl_bessel_j(1, q[i] * rho, BesselPolicy());
    }
    return {ez, er};
  }
};

}  // namespace detail

/// Field at lateral distance rho from the patch axis via the Hankel
/// representation; components (E_rho, E_z) in V/cm.
inline std::array<double, 2> layer_field(double rho_um, double z_um, const PatchModel& m) {
  m.validate();
  if (!(z_um >= 0.0) || !(rho_um >= 0.0)) throw ModelError("layer field needs rho, z >= 0");
  const double rho = rho_um / m.w_um;
  const auto c = detail::HankelGrid(z_um / m.w_um, rho).components(rho);
  const double pref = patch_prefactor(m);
  return {pref * c[1], pref * c[0]};
}

enum class CloudAverage { magnitude, rms };

/// Gaussian-weighted (sigma_y) average of |E| along the probe axis y at x = 0;
/// CloudAverage::rms returns sqrt(<E^2>) instead.
inline double cloud_averaged_field(double z_um, const PatchModel& m, CloudAverage mode = CloudAverage::magnitude) {
  m.validate();
  if (!(z_um > 0.0)) throw ModelError("cloud-averaged field needs z > 0");
  if (m.sigma_y_um == 0.0) return onaxis_field(z_um, m);
  using boost::math::quadrature::gauss;
  const double sy = m.sigma_y_um / m.w_um;
  constexpr double u_max = 6.0;  // the tail beyond 6 sigma carries < 1e-8 of the weight
  const detail::HankelGrid grid(z_um / m.w_um, u_max * sy);
  auto integrand = [&](double u) {  // u = y / sigma_y over one half of the symmetric line
    const auto c = grid.components(u * sy);
    const double e2 = c[0] * c[0] + c[1] * c[1];
    const double v = mode == CloudAverage::magnitude ? std::sqrt(e2) : e2;
    return v * std::exp(-0.5 * u * u);
  };
  auto weight = [](double u) { return std::exp(-0.5 * u * u); };
  double total = 0.0, norm = 0.0;
  for (double a = 0.0; a < u_max; a += 1.5) {
    total += gauss<double, 10>::integrate(integrand, a, a + 1.5);
    norm += gauss<double, 10>::integrate(weight, a, a + 1.5);
  }
  const double avg = total / norm;
  const double pref = patch_prefactor(m);
  return pref * (mode == CloudAverage::magnitude ? avg : std::sqrt(avg));
}

struct CloudSample {
  double y_um = 0.0;
  /// Normalized Gaussian weight; the weights of one z sum to 1.
  double weight = 0.0;
  double field = 0.0;  // |E|, V/cm
};

/// Quadrature nodes along the probe axis (y >= 0 half, symmetric) carrying
/// |E| at each node, for forward models that average over the cloud.
inline std::vector<CloudSample> cloud_field_samples(double z_um, const PatchModel& m) {
  m.validate();
  if (!(z_um > 0.0)) throw ModelError("cloud field samples need z > 0");
  if (m.sigma_y_um == 0.0) return {{0.0, 1.0, onaxis_field(z_um, m)}};
  using rule = boost::math::quadrature::gauss<double, 10>;
  const double sy = m.sigma_y_um / m.w_um;
  constexpr double u_max = 6.0, panel = 1.5;
  const detail::HankelGrid grid(z_um / m.w_um, u_max * sy);
  const double pref = patch_prefactor(m);
  std::vector<CloudSample> out;
  double norm = 0.0;
  for (double a = 0.0; a < u_max; a += panel) {
    const double mid = a + 0.5 * panel, half = 0.5 * panel;
    for (std::size_t k = 0; k < rule::abscissa().size(); ++k) {
      const double x = rule::abscissa()[k];
      for (double u : {mid - half * x, mid + half * x}) {
        const double w = half * rule::weights()[k] * std::exp(-0.5 * u * u);
        const auto c = grid.components(u * sy);
        out.push_back({u * m.sigma_y_um, w, pref * std::hypot(c[0], c[1])});
        norm += w;
        if (x == 0.0) break;
      }
    }
  }
  for (auto& c : out) c.weight /= norm;
  return out;
}

/// Least-squares slope of log|E| against log z.
inline double power_law_exponent(std::span<const double> z_um, std::span<const double> field) {
  if (z_um.size() != field.size() || z_um.size() < 2) throw ModelError("power law: need matching z and field, n >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(z_um.size());
  for (std::size_t i = 0; i < z_um.size(); ++i) {
    if (!(z_um[i] > 0.0) || field[i] == 0.0) throw ModelError("power law: z must be positive and field nonzero");
    const double lx = std::log(z_um[i]), ly = std::log(std::abs(field[i]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw ModelError("power law: z values must differ");
  return (n * sxy - sx * sy) / den;
}

/// Exponent of the cloud-averaged model over [z_lo, z_hi] on n log-spaced points.
inline double power_law_exponent(const PatchModel& m, double z_lo, double z_hi, int n = 24,
                                 CloudAverage mode = CloudAverage::magnitude) {
  if (!(z_lo > 0.0) || !(z_hi > z_lo) || n < 2) throw ModelError("power law: need 0 < z_lo < z_hi");
  std::vector<double> z, e;
  for (int i = 0; i < n; ++i) {
    z.push_back(z_lo * std::pow(z_hi / z_lo, static_cast<double>(i) / (n - 1)));
    e.push_back(cloud_averaged_field(z.back(), m, mode));
  }
  return power_law_exponent(z, e);
}

struct PatchFitOptions {
  CloudAverage mode = CloudAverage::magnitude;
  /// chi2 p-value below which the model is flagged as a poor description.
  double poor_fit_p_value = 1e-3;
};

struct PatchFit {
  PatchModel model;
  double d0_error = 0.0;
  double w_error = 0.0;
  double chi2 = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool converged = false;
  bool poor_fit = false;
  /// Fewer than 4 samples or a z span below a factor 3.
  bool ill_conditioned = false;
};

/// Fits (d0, w) with sigma_y held fixed. The field is linear in d0, so the
/// radius is located first on the profiled chi2(w) (log scan, then Brent),
/// and Levenberg-Marquardt polishes both parameters and supplies the covariance.
inline PatchFit fit_patch(std::span<const FieldSample> samples, const PatchModel& initial,
                          const PatchFitOptions& opt = {}) {
  initial.validate();
  if (samples.size() < 2) throw FitError("patch fit needs at least 2 samples");
  PatchFit out;
  double zmin = samples.front().z_um, zmax = zmin;
  for (const auto& s : samples) {
    if (!(s.z_um > 0.0)) throw FitError("patch fit: z must be positive");
    if (!(s.error_v_per_cm > 0.0)) throw FitError("patch fit: sample errors must be positive");
    zmin = std::min(zmin, s.z_um);
    zmax = std::max(zmax, s.z_um);
  }
  out.ill_conditioned = samples.size() < 4 || zmax < 3.0 * zmin;

  FitProblem pr;
  for (const auto& s : samples) {
    pr.x.push_back(s.z_um);
    pr.y.push_back(s.field_v_per_cm);
    pr.sigma.push_back(s.error_v_per_cm);
  }
  const double sigma_y = initial.sigma_y_um;
  constexpr double w_lo = 1.0, w_hi = 1e5;

  // best d0 and chi2 at fixed w
  auto profile = [&](double w) {
    double num = 0.0, den = 0.0;
    std::vector<double> g(pr.x.size());
    for (std::size_t i = 0; i < pr.x.size(); ++i) {
      g[i] = cloud_averaged_field(pr.x[i], PatchModel{1.0, w, sigma_y}, opt.mode);
      num += g[i] * pr.y[i] / (pr.sigma[i] * pr.sigma[i]);
      den += g[i] * g[i] / (pr.sigma[i] * pr.sigma[i]);
    }
    const double d0 = std::max(num / den, 0.0);
    double chi2 = 0.0;
    for (std::size_t i = 0; i < pr.x.size(); ++i) chi2 += std::pow((pr.y[i] - d0 * g[i]) / pr.sigma[i], 2);
    return std::pair{d0, chi2};
  };

  const double log_lo = std::log(w_lo), log_hi = std::log(w_hi);
  const int scan = 24;
  double best_log = std::log(std::clamp(initial.w_um, w_lo, w_hi));
  double best_chi2 = profile(initial.w_um).second;
  for (int i = 0; i <= scan; ++i) {
    const double lw = log_lo + (log_hi - log_lo) * i / scan;
    const double c = profile(std::exp(lw)).second;
    if (c < best_chi2) {
      best_chi2 = c;
      best_log = lw;
    }
  }
  const double cell = (log_hi - log_lo) / scan;
  const auto refined = boost::math::tools::brent_find_minima(
      [&](double lw) { return profile(std::exp(lw)).second; }, std::max(log_lo, best_log - cell),
      std::min(log_hi, best_log + cell), 40);
  const double w_start = std::exp(refined.first);
  const double d0_start = std::max(profile(w_start).first, 1e-9);

  pr.model = [sigma_y, mode = opt.mode](std::span<const double> p, double z) {
    return cloud_averaged_field(z, PatchModel{p[0], p[1], sigma_y}, mode);
  };
  pr.bounds = {{0.0, std::numeric_limits<double>::infinity()}, {w_lo, w_hi}};
  pr.initial = {d0_start, w_start};
  pr.options.max_iterations = 50;
  const auto best = lm_fit(pr);

  out.model = PatchModel{best.params(0), best.params(1), sigma_y};
  out.d0_error = profile_uncertainty(best, 0);
  out.w_error = profile_uncertainty(best, 1);
  out.chi2 = best.chi2;
  out.dof = best.dof();
  out.converged = best.converged;
  if (out.dof > 0) {
    out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.dof), out.chi2));
  }
  out.poor_fit = out.p_value < opt.poor_fit_p_value;
  return out;
}

struct AdsorbateBudget {
  double total = 0.0;
  double per_shot = 0.0;
};

/// Adsorbate count 2 pi w^2 d0 / p and the steady-state deposition per
/// experimental cycle, total * decay_rate * cycle_time.
inline AdsorbateBudget adsorbate_budget(const PatchModel& m, double dipole_per_adatom_debye,
                                        double decay_rate_per_s = 2e-6, double cycle_time_s = 30.0) {
  m.validate();
  if (!(dipole_per_adatom_debye > 0.0)) throw ModelError("adsorbate budget: dipole per adatom must be positive");
  AdsorbateBudget b;
  b.total = 2.0 * std::numbers::pi * m.w_um * m.w_um * m.d0 / dipole_per_adatom_debye;
  b.per_shot = b.total * decay_rate_per_s * cycle_time_s;
  return b;
}

}  // namespace rydsurf
