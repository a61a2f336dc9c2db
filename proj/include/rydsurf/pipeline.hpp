#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rydsurf/analysis.hpp"
#include "rydsurf/atomic/quantum_defects.hpp"
#include "rydsurf/config.hpp"
#include "rydsurf/io/csv.hpp"
#include "rydsurf/patch.hpp"
#include "rydsurf/stark.hpp"
#include "rydsurf/units.hpp"

#ifndef RYDSURF_DATA_DIR
#define RYDSURF_DATA_DIR "data"
#endif

// End-to-end orchestration: synthetic experiments from a patch-field truth,
// and the analysis chain spectra -> shifts -> fields -> patch model.

namespace rydsurf {

inline QuantumDefectTable defect_table(const RunConfig& c) {
  const auto path = c.quantum_defects_file.empty()
                        ? std::filesystem::path(RYDSURF_DATA_DIR) / "rb87_quantum_defects.txt"
                        : c.quantum_defects_file;
  return QuantumDefectTable::load(path.string());
}

/// File-name tag of a state, e.g. n23_l0_j1-2_mj1-2.
inline std::string state_tag(const RydbergState& s) {
  std::ostringstream os;
  os << 'n' << s.n() << "_l" << s.l() << "_j" << s.two_j() << "-2_mj" << (s.two_mj() < 0 ? "m" : "") << std::abs(s.two_mj())
     << "-2";
  return os.str();
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix64(seed ^ splitmix64(stream)); }

inline double state_alpha(const StateSpec& s, const QuantumDefectTable& table, int delta_n) {
  if (s.alpha_mhz_per_vcm2) return *s.alpha_mhz_per_vcm2;
  return polarizability(s.state, table, BasisWindow{delta_n}).value;
}

}  // namespace detail

struct SynthResult {
  json manifest;
  std::filesystem::path manifest_path;
  /// Extremes of the cloud-mean delta_c over all (state, z), MHz.
  double min_shift_mhz = 0.0;
  double max_shift_mhz = 0.0;
};

/// Writes one EIT and one reference CSV per state (all distances) and a
/// manifest that doubles as the configuration of the matching analysis.
inline SynthResult synth_experiment(const RunConfig& c, const std::filesystem::path& out_dir) {
  if (!c.truth) throw ModelError("synth needs a 'truth' section");
  if (c.states.empty()) throw ModelError("synth needs at least one state");
  if (c.z_grid_um.empty()) throw ModelError("synth needs a z grid");
  const auto& truth = *c.truth;
  truth.patch.validate();
  const auto table = defect_table(c);
  const auto grid = detuning_grid(c.scan.start_mhz, c.scan.stop_mhz, c.scan.points);

  EITParams base;
  base.gamma_p = truth.eit.gamma_p_mhz;
  base.gamma_c = truth.eit.gamma_c_mhz;
  base.omega_c = truth.eit.omega_c_mhz;
  base.od0 = truth.eit.od0;
  base.offset = truth.eit.offset_mhz;
  base.validate();

  std::vector<std::vector<CloudSample>> cloud;
  for (double z : c.z_grid_um) cloud.push_back(cloud_field_samples(z, truth.patch));

  RunConfig manifest_cfg = c;
  manifest_cfg.inputs.clear();
  manifest_cfg.analysis.sigma_y_um = truth.patch.sigma_y_um;
  json ground = json::array();
  SynthResult out;
  out.min_shift_mhz = std::numeric_limits<double>::infinity();
  out.max_shift_mhz = -std::numeric_limits<double>::infinity();
  const std::size_t nz = c.z_grid_um.size();

  for (std::size_t si = 0; si < c.states.size(); ++si) {
    const auto& spec = c.states[si];
    const double alpha = detail::state_alpha(spec, table, c.basis_delta_n);
    std::vector<Spectrum> eit, ref;
    json rows = json::array();
    for (std::size_t zi = 0; zi < nz; ++zi) {
      const double z = c.z_grid_um[zi];
      std::vector<ShiftComponent> shifts;
      double mean = 0.0;
      for (const auto& s : cloud[zi]) {
        const double dc = stark_shift(alpha, s.field) + truth.eit.lock_offset_mhz;
        shifts.push_back({dc, s.weight});
        mean += s.weight * dc;
      }
      const std::uint64_t stream = 2 * (si * nz + zi);
      std::optional<Noise> n_eit, n_ref;
      if (c.noise_rms_od > 0.0) {
        n_eit = Noise{c.noise_rms_od, detail::stream_seed(c.seed, stream)};
        n_ref = Noise{c.noise_rms_od, detail::stream_seed(c.seed, stream + 1)};
      }
      eit.push_back(averaged_spectrum(base, grid, shifts, n_eit, z));
      EITParams r = base;
      r.omega_c = 0.0;
      ref.push_back(spectrum(r, grid, n_ref, z));
      out.min_shift_mhz = std::min(out.min_shift_mhz, mean);
      out.max_shift_mhz = std::max(out.max_shift_mhz, mean);
      rows.push_back({{"z_um", z},
                      {"mean_delta_c_mhz", mean},
                      {"peak_field_v_per_cm", onaxis_field(z, truth.patch)},
                      {"cloud_field_v_per_cm", cloud_averaged_field(z, truth.patch, CloudAverage::magnitude)},
                      {"rms_field_v_per_cm", cloud_averaged_field(z, truth.patch, CloudAverage::rms)}});
    }
    const auto tag = state_tag(spec.state);
    const auto eit_path = out_dir / "spectra" / (tag + "_eit.csv");
    const auto ref_path = out_dir / "spectra" / (tag + "_reference.csv");
    io::write_spectra(eit_path, eit);
    io::write_spectra(ref_path, ref);
    manifest_cfg.inputs.push_back({spec.state, eit_path, ref_path});
    ground.push_back({{"state", detail::state_json(spec.state)},
                      {"label", spec.state.label()},
                      {"alpha_mhz_per_vcm2", alpha},
                      {"distances", rows}});
  }

  out.manifest = config_json(manifest_cfg, out_dir);
  out.manifest["ground_truth"] = ground;
  out.manifest_path = out_dir / "manifest.json";
  // ground_truth is informational; parse_config would reject it, so strip it on reuse.
  io::write_atomic(out.manifest_path, out.manifest.dump(2) + "\n");
  return out;
}

/// Reads a manifest or config, ignoring the informational ground_truth block.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.is_object()) j.erase("ground_truth");
  return parse_config(j, path.parent_path());
}

struct AnalysisResult {
  json report;
  std::vector<ShiftCurve> curves;
  std::vector<FieldSample> samples;
  PatchFit patch;
};

namespace detail {

inline json patch_json(const PatchFit& f) {
  return {{"d0_debye_per_um2", f.model.d0},
          {"d0_error_debye_per_um2", f.d0_error},
          {"w_um", f.model.w_um},
          {"w_error_um", f.w_error},
          {"sigma_y_um", f.model.sigma_y_um},
          {"chi2", f.chi2},
          {"dof", f.dof},
          {"p_value", f.p_value},
          {"converged", f.converged},
          {"poor_fit", f.poor_fit},
          {"ill_conditioned", f.ill_conditioned}};
}

// Exponent of |alpha| (equivalently of the shift at fixed field) against n*
// for every distinct (l, j, |mj|) series among the configured states.
inline json n_scaling(const RunConfig& c, const QuantumDefectTable& table, double field_v_per_cm) {
  json out = json::array();
  std::set<std::tuple<int, int, int>> series;
  for (const auto& s : c.states) series.insert({s.state.l(), s.state.two_j(), std::abs(s.state.two_mj())});
  for (const auto& [l, two_j, two_mj] : series) {
    std::vector<double> nstar, shift;
    for (int n = c.analysis.scaling_n_min; n <= c.analysis.scaling_n_max; ++n) {
      if (l >= n) continue;
      try {
        const auto st = RydbergState::from_twice(n, l, two_j, two_mj);
        const double a = polarizability(st, table, BasisWindow{c.basis_delta_n}).value;
        nstar.push_back(effective_n(st, table));
        shift.push_back(stark_shift(a, field_v_per_cm));
      } catch (const ModelError&) {
      }
    }
    json e{{"l", l}, {"j", 0.5 * two_j}, {"abs_mj", 0.5 * two_mj}, {"n_min", c.analysis.scaling_n_min},
           {"n_max", c.analysis.scaling_n_max}, {"points", nstar.size()}};
    if (nstar.size() >= 3) {
      e["shift_exponent_vs_nstar"] = scaling_exponent(nstar, shift);
      e["sign"] = shift.front() > 0 ? 1 : -1;
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace detail

/// fit_reference -> fit_eit -> shift curves -> field samples -> fit_patch.
/// On failure the report is written with status "failed" and the stage that
/// failed, listing whichever outputs were already complete, then the error propagates.
inline AnalysisResult run_analysis(const RunConfig& c, const std::filesystem::path& out_dir) {
  AnalysisResult res;
  json& report = res.report;
  report["status"] = "running";
  report["outputs"] = json::array();
  std::string stage = "setup";
  auto fail = [&](const std::exception& e) {
    report["status"] = "failed";
    report["failed_stage"] = stage;
    report["error"] = e.what();
    io::write_atomic(out_dir / "report.json", report.dump(2) + "\n");
  };
  try {
    if (c.inputs.empty()) throw ParseError("analysis config lists no inputs");
    const auto table = defect_table(c);

    stage = "polarizability";
    std::map<RydbergState, double> alpha;
    for (const auto& s : c.states) alpha[s.state] = detail::state_alpha(s, table, c.basis_delta_n);
    for (const auto& in : c.inputs) {
      if (!alpha.contains(in.state)) alpha[in.state] = detail::state_alpha(StateSpec{in.state, {}}, table, c.basis_delta_n);
    }

    stage = "shift_curves";
    ShiftCurveOptions sopt;
    sopt.offset_quantile = c.analysis.offset_quantile;
    sopt.eit.null_delta_chi2 = c.analysis.null_delta_chi2;
    std::vector<StateCurve> state_curves;
    json states = json::array();
    for (const auto& in : c.inputs) {
      const auto eit = io::read_spectra(in.eit_csv);
      const auto ref = io::read_spectra(in.reference_csv);
      std::map<double, const Spectrum*> ref_by_z;
      for (const auto& r : ref) ref_by_z[r.z_um] = &r;
      std::vector<TaggedSpectrum> tagged;
      for (const auto& e : eit) {
        const auto it = ref_by_z.find(e.z_um);
        if (it == ref_by_z.end()) {
          throw ParseError(in.eit_csv.string() + ": no reference spectrum at z = " + io::format_number(e.z_um));
        }
        tagged.push_back({in.state, e.z_um, e, *it->second});
      }
      auto curve = build_shift_curve(tagged, sopt);
      states.push_back({{"state", detail::state_json(in.state)},
                        {"label", in.state.label()},
                        {"alpha_mhz_per_vcm2", alpha[in.state]},
                        {"offset_mhz", curve.offset_mhz},
                        {"offset_error_mhz", curve.offset_error_mhz},
                        {"points", curve.points.size()},
                        {"null_z_um", curve.null_z_um}});
      res.curves.push_back(curve);
      state_curves.push_back({std::move(curve), alpha[in.state]});
    }
    report["states"] = states;
    io::write_shift_curves(out_dir / "shift_curves.csv", res.curves);
    report["outputs"].push_back("shift_curves.csv");

    stage = "field_samples";
    res.samples = collapse_to_field(state_curves);
    io::write_field_samples(out_dir / "field_samples.csv", res.samples);
    report["outputs"].push_back("field_samples.csv");

    stage = "patch_fit";
    const PatchModel initial{c.analysis.initial_d0_debye_per_um2, c.analysis.initial_w_um, c.analysis.sigma_y_um};
    res.patch = fit_patch(res.samples, initial, PatchFitOptions{c.analysis.cloud_average});
    io::write_atomic(out_dir / "patch_model.json", detail::patch_json(res.patch).dump(2) + "\n");
    report["outputs"].push_back("patch_model.json");
    report["patch"] = detail::patch_json(res.patch);

    stage = "diagnostics";
    const auto& m = res.patch.model;
    double zlo = res.samples.front().z_um, zhi = res.samples.back().z_um;
    json diag;
    diag["field_exponent_data_range"] = {{"z_min_um", zlo}, {"z_max_um", zhi}};
    if (zhi > zlo) diag["field_exponent_data_range"]["exponent"] = power_law_exponent(m, zlo, zhi);
    diag["field_exponent_20_200_um"] = power_law_exponent(m, 20.0, 200.0);
    json pva = json::array();
    for (double z : {20.0, 40.0, 60.0, 100.0, 150.0, 200.0}) {
      const double peak = onaxis_field(z, m), avg = cloud_averaged_field(z, m, c.analysis.cloud_average);
      pva.push_back({{"z_um", z},
                     {"peak_v_per_cm", peak},
                     {"cloud_v_per_cm", avg},
                     {"difference_percent_of_peak", 100.0 * (peak - avg) / peak}});
    }
    diag["peak_vs_cloud_average"] = pva;
    const double e_ref = cloud_averaged_field(c.analysis.scaling_z_um, m, c.analysis.cloud_average);
    diag["n_scaling"] = detail::n_scaling(c, table, e_ref);
    diag["n_scaling_z_um"] = c.analysis.scaling_z_um;
    const auto budget = adsorbate_budget(m, c.analysis.adatom_dipole_debye);
    diag["adsorbates"] = {{"dipole_per_adatom_debye", c.analysis.adatom_dipole_debye},
                          {"total", budget.total},
                          {"per_shot", budget.per_shot}};
    report["diagnostics"] = diag;
    report["status"] = "ok";
  } catch (const std::exception& e) {
    fail(e);
    throw;
  }

  io::write_atomic(out_dir / "report.json", report.dump(2) + "\n");
  std::ostringstream txt;
  const auto& m = res.patch.model;
  txt << "patch fit: d0 = " << m.d0 << " +- " << res.patch.d0_error << " Debye/um^2, w = " << m.w_um << " +- "
      << res.patch.w_error << " um (sigma_y = " << m.sigma_y_um << " um)\n";
  txt << "  chi2 = " << res.patch.chi2 << " / " << res.patch.dof << " dof, p = " << res.patch.p_value
      << (res.patch.poor_fit ? "  [poor fit]" : "") << (res.patch.ill_conditioned ? "  [ill-conditioned]" : "") << "\n";
  const auto& d = report["diagnostics"];
  txt << "field exponent over 20-200 um: " << d["field_exponent_20_200_um"].get<double>() << "\n";
  txt << "peak vs cloud average:\n";
  for (const auto& p : d["peak_vs_cloud_average"]) {
    txt << "  z = " << p["z_um"].get<double>() << " um: " << p["difference_percent_of_peak"].get<double>() << " %\n";
  }
  txt << "shift scaling with n* at z = " << c.analysis.scaling_z_um << " um:\n";
  for (const auto& s : d["n_scaling"]) {
    txt << "  l = " << s["l"].get<int>() << ", j = " << s["j"].get<double>() << ", |mj| = " << s["abs_mj"].get<double>();
    if (s.contains("shift_exponent_vs_nstar")) txt << ": " << s["shift_exponent_vs_nstar"].get<double>();
    txt << "\n";
  }
  txt << "adsorbates: " << d["adsorbates"]["total"].get<double>() << " total, " << d["adsorbates"]["per_shot"].get<double>()
      << " per shot\n";
  io::write_atomic(out_dir / "summary.txt", txt.str());
  return res;
}

/// Polarizabilities of the configured states, with scalar/tensor parts for j > 1/2.
inline json run_stark(const RunConfig& c, const std::filesystem::path& out_dir) {
  if (c.states.empty()) throw ModelError("stark needs at least one state");
  const auto table = defect_table(c);
  json out = json::array();
  for (const auto& s : c.states) {
    const auto p = polarizability(s.state, table, BasisWindow{c.basis_delta_n});
    json e{{"state", detail::state_json(s.state)},
           {"label", s.state.label()},
           {"n_star", effective_n(s.state, table)},
           {"alpha_mhz_per_vcm2", p.value},
           {"truncation_estimate_mhz_per_vcm2", p.truncation_estimate},
           {"converged", p.converged()},
           {"delta_n", p.delta_n}};
    if (s.state.two_j() > 1) {
      const auto comps = polarizability_components(s.state, table, BasisWindow{c.basis_delta_n});
      const auto st = scalar_tensor(comps);
      e["alpha0_mhz_per_vcm2"] = st.alpha0;
      e["alpha2_mhz_per_vcm2"] = st.alpha2;
    }
    out.push_back(e);
  }
  const json doc{{"polarizabilities", out}};
  io::write_atomic(out_dir / "stark.json", doc.dump(2) + "\n");
  return doc;
}

/// Patch fit of an existing field-sample CSV.
inline PatchFit run_patch_fit(const RunConfig& c, const std::filesystem::path& out_dir) {
  if (c.field_samples_csv.empty()) throw ParseError("patch-fit needs 'field_samples_csv' in the config");
  const auto samples = io::read_field_samples(c.field_samples_csv);
  if (samples.empty()) throw ParseError(c.field_samples_csv.string() + ": no samples");
  const PatchModel initial{c.analysis.initial_d0_debye_per_um2, c.analysis.initial_w_um, c.analysis.sigma_y_um};
  const auto fit = fit_patch(samples, initial, PatchFitOptions{c.analysis.cloud_average});
  io::write_atomic(out_dir / "patch_model.json", detail::patch_json(fit).dump(2) + "\n");
  return fit;
}

struct ConstantCheck {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;  // relative

  double relative_error() const { return std::abs(value - expected) / std::max(std::abs(expected), 1e-300); }
  bool ok() const { return relative_error() <= tolerance; }
};

/// Shipped constants against their definitions, plus unit round trips.
inline std::vector<ConstantCheck> validate_constants(const std::filesystem::path& defects = {}) {
  using namespace units;
  std::vector<ConstantCheck> out;
  out.push_back({"debye_si", debye, 3.33564095198152e-30, 1e-12});
  out.push_back({"debye_round_trip", si_to_debye(debye_to_si(2.7)), 2.7, 1e-10});
  out.push_back({"field_round_trip_v_per_cm", field_au_to_v_per_cm(field_v_per_cm_to_au(3.3)), 3.3, 1e-10});
  out.push_back({"energy_round_trip_mhz", energy_au_to_mhz(energy_mhz_to_au(123.4)), 123.4, 1e-10});
  out.push_back({"epsilon0_from_mu0", vacuum_permittivity, 1.0 / (vacuum_permeability * speed_of_light * speed_of_light), 1e-9});
  out.push_back({"hartree_mhz_from_joule", hartree_mhz, hartree_energy / planck * 1e-6, 1e-10});
  out.push_back({"hartree_is_two_rydberg", hartree_mhz, 2.0 * rydberg_infinity_mhz, 1e-10});
  out.push_back({"atomic_field_v_per_cm", atomic_field_v_per_cm, 5.14220674763e9, 1e-10});
  // D2 lifetime 26.2348 ns (Steck): Gamma / 2pi = 1 / (2 pi tau).
  out.push_back({"probe_linewidth_mhz", rb87_d2_linewidth_mhz, 1.0 / (2.0 * std::numbers::pi * 26.2348e-9) * 1e-6, 1e-4});
  const auto table = QuantumDefectTable::load(
      (defects.empty() ? std::filesystem::path(RYDSURF_DATA_DIR) / "rb87_quantum_defects.txt" : defects).string());
  out.push_back({"rb87_reduced_rydberg_mhz", table.rydberg_mhz(), reduced_rydberg_mhz(rb87_mass_u), 1e-9});
  // d0 / (2 w eps0) through atomic units: eps0 = 1/(4 pi), lengths in a0, dipoles in e a0.
  const double um_in_a0 = 1e-6 / bohr_radius;
  const double d0_au = (debye / atomic_dipole_cm) / (um_in_a0 * um_in_a0);
  const double e_au = d0_au * 4.0 * std::numbers::pi / (2.0 * um_in_a0);
  out.push_back({"patch_prefactor_v_per_cm", patch_prefactor(PatchModel{1.0, 1.0, 0.0}), field_au_to_v_per_cm(e_au), 1e-10});
  return out;
}

}  // namespace rydsurf
