#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "rydsurf/eit.hpp"
#include "rydsurf/error.hpp"
#include "rydsurf/lsq.hpp"
#include "rydsurf/samples.hpp"

// Two-stage spectrum analysis: a coupling-free reference line fixes Gamma_p,
// od0 and the probe offset; the EIT fit then frees only the dip parameters.

namespace rydsurf {

struct ReferenceFit {
  double gamma_p = 0.0, gamma_p_error = 0.0;
  double od0 = 0.0, od0_error = 0.0;
  double offset = 0.0, offset_error = 0.0;
  /// Covariance of (gamma_p, od0, offset), already scaled for unknown sigma.
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double chi2 = 0.0;
  std::size_t n_data = 0;
  bool converged = false;

  EITParams params() const {
    EITParams p;
    p.gamma_p = gamma_p;
    p.od0 = od0;
    p.offset = offset;
    return p;
  }
};

struct EITFitOptions {
  /// Minimum chi2 improvement over the coupling-free model for a dip claim.
  double null_delta_chi2 = 25.0;
  Bounds gamma_c{1e-4, 50.0};
  Bounds omega_c{1e-3, 100.0};
};

struct EITFit {
  /// False when the spectrum holds no significant dip inside the scan; the dip fields are then unset.
  bool dip_found = false;
  double delta_c = 0.0, delta_c_error = 0.0;
  double gamma_c = 0.0, gamma_c_error = 0.0;
  double omega_c = 0.0, omega_c_error = 0.0;
  double chi2 = 0.0;
  double chi2_null = 0.0;
  /// chi2_null - chi2, normalized by the reduced chi2 when sigma is unknown.
  double delta_chi2 = 0.0;
  bool converged = false;
};

namespace detail {

inline std::vector<double> sigma_or_empty(const Spectrum& s) { return s.has_sigma() ? s.sigma : std::vector<double>{}; }

inline double chi2_of(const Spectrum& s, const EITParams& p) {
  const bool w = s.has_sigma();
  double c = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = (s.od[i] - optical_density(s.detunings[i], p)) / (w ? s.sigma[i] : 1.0);
    c += r * r;
  }
  return c;
}

}  // namespace detail

/// Lorentzian (Omega_c = 0) fit of a reference spectrum.
inline ReferenceFit fit_reference(const Spectrum& s) {
  s.validate();
  if (s.size() < 4) throw FitError("reference spectrum needs at least 4 points");
  const auto peak = std::max_element(s.od.begin(), s.od.end());
  const double top = *peak;
  if (!(top > 0.0)) throw NoLineError("reference spectrum shows no absorption line");
  const double x_peak = s.detunings[static_cast<std::size_t>(peak - s.od.begin())];

  // Half-maximum crossings give the starting width.
  double lo = s.detunings.front(), hi = s.detunings.back();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.od[i] >= 0.5 * top) {
      lo = s.detunings[i];
      break;
    }
  }
  for (std::size_t i = s.size(); i-- > 0;) {
    if (s.od[i] >= 0.5 * top) {
      hi = s.detunings[i];
      break;
    }
  }
  const Bounds gp_bounds{1.0, 20.0};

  FitProblem pr;
  pr.model = [](std::span<const double> q, double x) {
    const double d = 2.0 * (x - q[2]) / q[0];
    return q[1] / (1.0 + d * d);
  };
  pr.x = s.detunings;
  pr.y = s.od;
  pr.sigma = detail::sigma_or_empty(s);
  pr.initial = {gp_bounds.clamp(hi - lo), top, x_peak};
  pr.bounds = {gp_bounds, {0.0, 10.0 * std::abs(top) + 1.0}, {s.detunings.front(), s.detunings.back()}};
  const auto r = lm_fit(pr);
  const auto err = profile_uncertainties(r);

  ReferenceFit out;
  out.gamma_p = r.params[0];
  out.od0 = r.params[1];
  out.offset = r.params[2];
  out.gamma_p_error = err[0];
  out.od0_error = err[1];
  out.offset_error = err[2];
  out.covariance = r.covariance;
  if (r.unit_weights) out.covariance *= r.reduced_chi2();
  out.chi2 = r.chi2;
  out.n_data = r.n_data;
  out.converged = r.converged;
  if (!(out.od0 > 0.0) || (out.od0_error > 0.0 && out.od0 < 3.0 * out.od0_error)) {
    throw NoLineError("reference spectrum shows no significant absorption line");
  }
  if (s.detunings.back() - s.detunings.front() < 3.0 * out.gamma_p) {
    throw FitError("reference spectrum spans less than three linewidths");
  }
  return out;
}

/// Dip fit with Gamma_p, od0 and offset frozen at the reference values.
inline EITFit fit_eit(const Spectrum& s, const ReferenceFit& ref, const EITFitOptions& opt = {}) {
  s.validate();
  const EITParams base = ref.params();
  base.validate();
  if (s.size() < 6) throw FitError("EIT spectrum needs at least 6 points");

  EITFit out;
  out.chi2_null = detail::chi2_of(s, base);

  // Parameters: gamma_c, delta_c, omega_c.
  const ScalarModel model = [base](std::span<const double> q, double x) {
    EITParams p = base;
    p.gamma_c = q[0];
    p.delta_c = q[1];
    p.omega_c = q[2];
    return optical_density(x, p);
  };
  const double span = s.detunings.back() - s.detunings.front();
  const Bounds dc_bounds{base.offset - s.detunings.back() - 0.1 * span, base.offset - s.detunings.front() + 0.1 * span};

  // Starting points: the largest residual dip and a coarse comb across the scan.
  std::vector<double> resid(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) resid[i] = optical_density(s.detunings[i], base) - s.od[i];
  std::size_t best_i = 0;
  double best_r = -1e300;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double r = resid[i];
    if (i > 0 && i + 1 < s.size()) r = (resid[i - 1] + 2.0 * resid[i] + resid[i + 1]) / 4.0;
    if (r > best_r) {
      best_r = r;
      best_i = i;
    }
  }
  const double line_at = optical_density(s.detunings[best_i], base);
  const double depth = line_at > 0.0 ? std::clamp(best_r / line_at, 0.02, 0.98) : 0.5;
  const double gc0 = 0.5;
  const double oc0 = opt.omega_c.clamp(std::sqrt(base.gamma_p * gc0 * depth / (1.0 - depth)));

  std::vector<std::vector<double>> starts;
  const double dc_peak = dc_bounds.clamp(base.offset - s.detunings[best_i]);
  for (double gc : {0.3, 1.5}) starts.push_back({opt.gamma_c.clamp(gc), dc_peak, oc0});
  const int comb = std::clamp(static_cast<int>(span / (0.5 * base.gamma_p)), 4, 40);
  for (int k = 0; k <= comb; ++k) {
    const double x = s.detunings.front() + span * k / comb;
    starts.push_back({opt.gamma_c.clamp(gc0), dc_bounds.clamp(base.offset - x), oc0});
  }

  std::optional<FitResult> best;
  for (const auto& st : starts) {
    FitProblem pr;
    pr.model = model;
    pr.x = s.detunings;
    pr.y = s.od;
    pr.sigma = detail::sigma_or_empty(s);
    pr.initial = st;
    pr.bounds = {opt.gamma_c, dc_bounds, opt.omega_c};
    try {
      auto r = lm_fit(pr);
      if (!best || r.chi2 < best->chi2) best = std::move(r);
    } catch (const FitError&) {
    }
  }
  if (!best) throw FitError("EIT fit failed from every starting point");

  out.chi2 = best->chi2;
  out.converged = best->converged;
  double scale = 1.0;
  if (best->unit_weights) scale = best->reduced_chi2();
  out.delta_chi2 = out.chi2_null - out.chi2;
  if (scale > 0.0) out.delta_chi2 /= scale;
  else if (out.delta_chi2 > 0.0) out.delta_chi2 = std::numeric_limits<double>::infinity();
  // A dip centred outside the scan, or one whose width ran into its upper
  // bound, reshapes the line wings rather than measuring a transparency window.
  const double centre = base.offset - best->params[1];
  const bool inside = centre >= s.detunings.front() && centre <= s.detunings.back();
  const bool pinned = best->params[0] >= opt.gamma_c.hi * (1.0 - 1e-9);
  out.dip_found = out.delta_chi2 >= opt.null_delta_chi2 && inside && !pinned;
  if (!out.dip_found) return out;

  // Dip covariance plus the frozen reference uncertainty, propagated linearly:
  // d(dip) = -(J^T W J)^-1 J^T W J_ref d(ref).
  const std::vector<double> full{best->params[0], best->params[1], best->params[2], base.gamma_p, base.od0, base.offset};
  const ScalarModel full_model = [](std::span<const double> q, double x) {
    EITParams p;
    p.gamma_c = q[0];
    p.delta_c = q[1];
    p.omega_c = q[2];
    p.gamma_p = q[3];
    p.od0 = q[4];
    p.offset = q[5];
    return optical_density(x, p);
  };
  const Eigen::MatrixXd j = finite_difference_jacobian(full_model, full, s.detunings);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s.size()));
  if (s.has_sigma()) {
    for (std::size_t i = 0; i < s.size(); ++i) w[static_cast<Eigen::Index>(i)] = 1.0 / (s.sigma[i] * s.sigma[i]);
  }
  const Eigen::MatrixXd jd = j.leftCols(3), jr = j.rightCols(3);
  const Eigen::MatrixXd gain = -best->covariance * (jd.transpose() * w.asDiagonal() * jr);
  Eigen::Matrix3d cov = best->covariance;
  if (best->unit_weights) cov *= best->reduced_chi2();
  cov += gain * ref.covariance * gain.transpose();

  out.gamma_c = best->params[0];
  out.delta_c = best->params[1];
  out.omega_c = best->params[2];
  out.gamma_c_error = std::sqrt(std::max(cov(0, 0), 0.0));
  out.delta_c_error = std::sqrt(std::max(cov(1, 1), 0.0));
  out.omega_c_error = std::sqrt(std::max(cov(2, 2), 0.0));
  return out;
}

struct FieldEstimate {
  double field = 0.0;  // V/cm
  double error = 0.0;  // V/cm
};

/// |E| = sqrt(2 delta_c / alpha). The error maps the delta_c +- sigma interval
/// through the square root, so it stays finite at delta_c = 0.
inline FieldEstimate infer_field(double delta_c_mhz, double alpha_mhz_per_vcm2, double delta_c_error_mhz = 0.0) {
  if (!std::isfinite(delta_c_mhz) || !std::isfinite(alpha_mhz_per_vcm2) || !(delta_c_error_mhz >= 0.0)) {
    throw ModelError("infer_field: invalid input");
  }
  if (alpha_mhz_per_vcm2 == 0.0) throw ModelError("infer_field: zero polarizability");
  if (delta_c_mhz != 0.0 && (delta_c_mhz > 0.0) != (alpha_mhz_per_vcm2 > 0.0)) {
    throw SignMismatchError("shift and polarizability have opposite signs; check the |mj| assignment");
  }
  const double a = std::abs(alpha_mhz_per_vcm2), d = std::abs(delta_c_mhz);
  FieldEstimate out{std::sqrt(2.0 * d / a), 0.0};
  if (delta_c_error_mhz > 0.0) {
    const double up = std::sqrt(2.0 * (d + delta_c_error_mhz) / a);
    const double down = std::sqrt(2.0 * std::max(d - delta_c_error_mhz, 0.0) / a);
    out.error = 0.5 * (up - down);
  }
  return out;
}

/// EIT spectrum at one distance with the reference recorded alongside it.
struct TaggedSpectrum {
  RydbergState state{5, 0, 0.5, 0.5};
  double z_um = 0.0;
  Spectrum eit;
  Spectrum reference;
};

struct ShiftCurveOptions {
  /// Distances at or above this quantile of the z set define the offset.
  double offset_quantile = 0.75;
  EITFitOptions eit;
};

/// Per-distance dip fits of one state, with the large-distance offset removed.
inline ShiftCurve build_shift_curve(std::span<const TaggedSpectrum> spectra, const ShiftCurveOptions& opt = {}) {
  if (spectra.empty()) throw ModelError("shift curve needs spectra");
  ShiftCurve curve;
  curve.state = spectra.front().state;
  std::map<double, int> distances;
  for (const auto& t : spectra) {
    if (t.state != curve.state) throw ModelError("shift curve spectra mix states");
    if (!(t.z_um > 0.0)) throw ModelError("shift curve distances must be positive");
    ++distances[t.z_um];
  }
  if (distances.size() < 3) throw ModelError("shift curve needs at least 3 distances");
  if (!(opt.offset_quantile >= 0.0 && opt.offset_quantile < 1.0)) throw ModelError("offset quantile must lie in [0, 1)");

  std::vector<ShiftPoint> raw;
  for (const auto& t : spectra) {
    const auto ref = fit_reference(t.reference);
    const auto f = fit_eit(t.eit, ref, opt.eit);
    if (!f.dip_found) {
      curve.null_z_um.push_back(t.z_um);
      continue;
    }
    raw.push_back({t.z_um, f.delta_c, f.delta_c_error, t.state});
  }
  if (raw.empty()) throw FitError("no spectrum of " + curve.state.label() + " shows a transparency dip");
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.z_um < b.z_um; });

  const auto n_top = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround((1.0 - opt.offset_quantile) * static_cast<double>(raw.size()))));
  const double z_cut = raw[raw.size() - n_top].z_um;
  double sw = 0.0, swx = 0.0, sx = 0.0;
  int count = 0;
  for (const auto& p : raw) {
    if (p.z_um < z_cut) continue;
    ++count;
    sx += p.delta_c_mhz;
    if (p.error_mhz > 0.0) {
      const double w = 1.0 / (p.error_mhz * p.error_mhz);
      sw += w;
      swx += w * p.delta_c_mhz;
    }
  }
  if (sw > 0.0) {
    curve.offset_mhz = swx / sw;
    curve.offset_error_mhz = 1.0 / std::sqrt(sw);
  } else {
    curve.offset_mhz = sx / count;
  }
  for (auto p : raw) {
    p.delta_c_mhz -= curve.offset_mhz;
    p.error_mhz = std::hypot(p.error_mhz, curve.offset_error_mhz);
    curve.points.push_back(p);
  }
  std::sort(curve.null_z_um.begin(), curve.null_z_um.end());
  return curve;
}

struct StateCurve {
  ShiftCurve curve;
  double alpha_mhz_per_vcm2 = 0.0;
};

struct CollapseOptions {
  /// Opposite-sign shifts within this many errors of zero map to zero field.
  double zero_tolerance_sigma = 2.0;
};

/// Field samples from every curve, sorted by distance.
inline std::vector<FieldSample> collapse_to_field(std::span<const StateCurve> curves, const CollapseOptions& opt = {}) {
  std::vector<FieldSample> out;
  for (const auto& c : curves) {
    for (const auto& p : c.curve.points) {
      const bool opposite = p.delta_c_mhz != 0.0 && (p.delta_c_mhz > 0.0) != (c.alpha_mhz_per_vcm2 > 0.0);
      FieldEstimate e;
      if (opposite && std::abs(p.delta_c_mhz) <= opt.zero_tolerance_sigma * p.error_mhz) {
        e = infer_field(0.0, c.alpha_mhz_per_vcm2, p.error_mhz);
      } else {
        e = infer_field(p.delta_c_mhz, c.alpha_mhz_per_vcm2, p.error_mhz);
      }
      out.push_back({p.z_um, e.field, e.error, p.state});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.z_um < b.z_um; });
  return out;
}

}  // namespace rydsurf
