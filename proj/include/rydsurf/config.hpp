#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "rydsurf/atomic/state.hpp"
#include "rydsurf/error.hpp"
#include "rydsurf/patch.hpp"

// Run configuration: one JSON document, every physical value carrying its unit
// in the key name. Unknown keys are rejected.

namespace rydsurf {

using json = nlohmann::json;

struct StateSpec {
  RydbergState state{5, 0, 0.5, 0.5};
  /// Overrides the computed polarizability when set.
  std::optional<double> alpha_mhz_per_vcm2;
};

struct ScanGrid {
  double start_mhz = -20.0;
  double stop_mhz = 20.0;
  std::size_t points = 161;
};

struct EITTruth {
  double gamma_p_mhz = 6.0666;
  double gamma_c_mhz = 0.5;
  double omega_c_mhz = 6.0;
  double od0 = 1.0;
  /// Probe detuning offset, common to reference and EIT spectra.
  double offset_mhz = 0.0;
  /// Coupling-laser lock offset added to every delta_c.
  double lock_offset_mhz = 0.0;
};

struct Truth {
  PatchModel patch;
  EITTruth eit;
};

struct SpectrumInput {
  RydbergState state{5, 0, 0.5, 0.5};
  std::filesystem::path eit_csv;
  std::filesystem::path reference_csv;
};

struct AnalysisSettings {
  double offset_quantile = 0.75;
  double null_delta_chi2 = 25.0;
  CloudAverage cloud_average = CloudAverage::magnitude;
  double sigma_y_um = 130.0;
  double initial_d0_debye_per_um2 = 1e5;
  double initial_w_um = 50.0;
  /// Distance at which shift-vs-n scaling is reported.
  double scaling_z_um = 80.0;
  int scaling_n_min = 22;
  int scaling_n_max = 36;
  double adatom_dipole_debye = 10.0;
};

struct RunConfig {
  std::vector<StateSpec> states;
  std::vector<double> z_grid_um;
  ScanGrid scan;
  std::optional<Truth> truth;
  std::uint64_t seed = 1;
  double noise_rms_od = 0.0;
  /// Empty selects the shipped rubidium table.
  std::filesystem::path quantum_defects_file;
  int basis_delta_n = 20;
  AnalysisSettings analysis;
  std::vector<SpectrumInput> inputs;
  std::filesystem::path field_samples_csv;
};

namespace detail {

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.contains(item.key())) throw ParseError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  return get_or<T>(j, key, T{}, where);
}

inline RydbergState parse_state(const json& j, const std::string& where, bool allow_alpha = false) {
  if (allow_alpha) {
    only_keys(j, {"n", "l", "j", "mj", "alpha_mhz_per_vcm2"}, where);
  } else {
    only_keys(j, {"n", "l", "j", "mj"}, where);
  }
  try {
    return RydbergState(get_required<int>(j, "n", where), get_required<int>(j, "l", where),
                        get_required<double>(j, "j", where), get_required<double>(j, "mj", where));
  } catch (const ModelError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline json state_json(const RydbergState& s) { return {{"n", s.n()}, {"l", s.l()}, {"j", s.j()}, {"mj", s.mj()}}; }

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// Relative paths resolve against `base_dir`.
inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  only_keys(j, {"states", "z_grid_um", "scan", "truth", "seed", "noise_rms_od", "quantum_defects_file", "basis_delta_n",
                "analysis", "inputs", "field_samples_csv"},
            "config");
  RunConfig c;
  if (j.contains("states")) {
    if (!j["states"].is_array()) throw ParseError("config.states: expected an array");
    for (std::size_t i = 0; i < j["states"].size(); ++i) {
      const auto& s = j["states"][i];
      const std::string where = "config.states[" + std::to_string(i) + "]";
      StateSpec spec{parse_state(s, where, true), std::nullopt};
      if (s.contains("alpha_mhz_per_vcm2")) spec.alpha_mhz_per_vcm2 = get_required<double>(s, "alpha_mhz_per_vcm2", where);
      c.states.push_back(spec);
    }
  }
  c.z_grid_um = get_or<std::vector<double>>(j, "z_grid_um", {}, "config");
  for (double z : c.z_grid_um) {
    if (!(z > 0.0)) throw ParseError("config.z_grid_um: distances must be positive");
  }
  if (j.contains("scan")) {
    const auto& s = j["scan"];
    only_keys(s, {"start_mhz", "stop_mhz", "points"}, "config.scan");
    c.scan.start_mhz = get_or(s, "start_mhz", c.scan.start_mhz, "config.scan");
    c.scan.stop_mhz = get_or(s, "stop_mhz", c.scan.stop_mhz, "config.scan");
    c.scan.points = get_or<std::size_t>(s, "points", c.scan.points, "config.scan");
  }
  if (c.scan.points < 2 || !(c.scan.stop_mhz > c.scan.start_mhz)) {
    throw ParseError("config.scan: need points >= 2 and stop_mhz > start_mhz");
  }
  if (j.contains("truth")) {
    const auto& t = j["truth"];
    only_keys(t, {"patch", "eit"}, "config.truth");
    Truth truth;
    if (t.contains("patch")) {
      const auto& p = t["patch"];
      only_keys(p, {"d0_debye_per_um2", "w_um", "sigma_y_um"}, "config.truth.patch");
      truth.patch.d0 = get_or(p, "d0_debye_per_um2", truth.patch.d0, "config.truth.patch");
      truth.patch.w_um = get_or(p, "w_um", truth.patch.w_um, "config.truth.patch");
      truth.patch.sigma_y_um = get_or(p, "sigma_y_um", truth.patch.sigma_y_um, "config.truth.patch");
    }
    if (t.contains("eit")) {
      const auto& e = t["eit"];
      const std::string w = "config.truth.eit";
      only_keys(e, {"gamma_p_mhz", "gamma_c_mhz", "omega_c_mhz", "od0", "offset_mhz", "lock_offset_mhz"}, w);
      truth.eit.gamma_p_mhz = get_or(e, "gamma_p_mhz", truth.eit.gamma_p_mhz, w);
      truth.eit.gamma_c_mhz = get_or(e, "gamma_c_mhz", truth.eit.gamma_c_mhz, w);
      truth.eit.omega_c_mhz = get_or(e, "omega_c_mhz", truth.eit.omega_c_mhz, w);
      truth.eit.od0 = get_or(e, "od0", truth.eit.od0, w);
      truth.eit.offset_mhz = get_or(e, "offset_mhz", truth.eit.offset_mhz, w);
      truth.eit.lock_offset_mhz = get_or(e, "lock_offset_mhz", truth.eit.lock_offset_mhz, w);
    }
    c.truth = truth;
  }
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
  c.noise_rms_od = get_or(j, "noise_rms_od", c.noise_rms_od, "config");
  if (!(c.noise_rms_od >= 0.0)) throw ParseError("config.noise_rms_od must be non-negative");
  if (j.contains("quantum_defects_file")) {
    c.quantum_defects_file = resolve(base_dir, get_required<std::string>(j, "quantum_defects_file", "config"));
  }
  c.basis_delta_n = get_or(j, "basis_delta_n", c.basis_delta_n, "config");
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    const std::string w = "config.analysis";
    only_keys(a, {"offset_quantile", "null_delta_chi2", "cloud_average", "sigma_y_um", "initial_d0_debye_per_um2",
                  "initial_w_um", "scaling_z_um", "scaling_n_min", "scaling_n_max", "adatom_dipole_debye"},
              w);
    auto& s = c.analysis;
    s.offset_quantile = get_or(a, "offset_quantile", s.offset_quantile, w);
    s.null_delta_chi2 = get_or(a, "null_delta_chi2", s.null_delta_chi2, w);
    const auto mode = get_or<std::string>(a, "cloud_average", "magnitude", w);
    if (mode == "magnitude") {
      s.cloud_average = CloudAverage::magnitude;
    } else if (mode == "rms") {
      s.cloud_average = CloudAverage::rms;
    } else {
      throw ParseError(w + ".cloud_average: expected 'magnitude' or 'rms'");
    }
    s.sigma_y_um = get_or(a, "sigma_y_um", s.sigma_y_um, w);
    s.initial_d0_debye_per_um2 = get_or(a, "initial_d0_debye_per_um2", s.initial_d0_debye_per_um2, w);
    s.initial_w_um = get_or(a, "initial_w_um", s.initial_w_um, w);
    s.scaling_z_um = get_or(a, "scaling_z_um", s.scaling_z_um, w);
    s.scaling_n_min = get_or(a, "scaling_n_min", s.scaling_n_min, w);
    s.scaling_n_max = get_or(a, "scaling_n_max", s.scaling_n_max, w);
    s.adatom_dipole_debye = get_or(a, "adatom_dipole_debye", s.adatom_dipole_debye, w);
  }
  if (j.contains("inputs")) {
    if (!j["inputs"].is_array()) throw ParseError("config.inputs: expected an array");
    for (std::size_t i = 0; i < j["inputs"].size(); ++i) {
      const auto& in = j["inputs"][i];
      const std::string where = "config.inputs[" + std::to_string(i) + "]";
      only_keys(in, {"state", "eit_csv", "reference_csv"}, where);
      if (!in.contains("state")) throw ParseError(where + ": missing key 'state'");
      c.inputs.push_back({parse_state(in["state"], where + ".state"),
                          resolve(base_dir, get_required<std::string>(in, "eit_csv", where)),
                          resolve(base_dir, get_required<std::string>(in, "reference_csv", where))});
    }
  }
  if (j.contains("field_samples_csv")) {
    c.field_samples_csv = resolve(base_dir, get_required<std::string>(j, "field_samples_csv", "config"));
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

/// Config as JSON; paths are written relative to `base_dir` when below it.
inline json config_json(const RunConfig& c, const std::filesystem::path& base_dir = {}) {
  auto rel = [&](const std::filesystem::path& p) {
    if (base_dir.empty()) return p.generic_string();
    const auto r = p.lexically_relative(base_dir);
    return (r.empty() || *r.begin() == "..") ? p.generic_string() : r.generic_string();
  };
  json j;
  j["states"] = json::array();
  for (const auto& s : c.states) {
    auto e = detail::state_json(s.state);
    if (s.alpha_mhz_per_vcm2) e["alpha_mhz_per_vcm2"] = *s.alpha_mhz_per_vcm2;
    j["states"].push_back(e);
  }
  j["z_grid_um"] = c.z_grid_um;
  j["scan"] = {{"start_mhz", c.scan.start_mhz}, {"stop_mhz", c.scan.stop_mhz}, {"points", c.scan.points}};
  if (c.truth) {
    const auto& t = *c.truth;
    j["truth"] = {{"patch", {{"d0_debye_per_um2", t.patch.d0}, {"w_um", t.patch.w_um}, {"sigma_y_um", t.patch.sigma_y_um}}},
                  {"eit",
                   {{"gamma_p_mhz", t.eit.gamma_p_mhz},
                    {"gamma_c_mhz", t.eit.gamma_c_mhz},
                    {"omega_c_mhz", t.eit.omega_c_mhz},
                    {"od0", t.eit.od0},
                    {"offset_mhz", t.eit.offset_mhz},
                    {"lock_offset_mhz", t.eit.lock_offset_mhz}}}};
  }
  j["seed"] = c.seed;
  j["noise_rms_od"] = c.noise_rms_od;
  if (!c.quantum_defects_file.empty()) j["quantum_defects_file"] = rel(c.quantum_defects_file);
  j["basis_delta_n"] = c.basis_delta_n;
  const auto& a = c.analysis;
  j["analysis"] = {{"offset_quantile", a.offset_quantile},
                   {"null_delta_chi2", a.null_delta_chi2},
                   {"cloud_average", a.cloud_average == CloudAverage::magnitude ? "magnitude" : "rms"},
                   {"sigma_y_um", a.sigma_y_um},
                   {"initial_d0_debye_per_um2", a.initial_d0_debye_per_um2},
                   {"initial_w_um", a.initial_w_um},
                   {"scaling_z_um", a.scaling_z_um},
                   {"scaling_n_min", a.scaling_n_min},
                   {"scaling_n_max", a.scaling_n_max},
                   {"adatom_dipole_debye", a.adatom_dipole_debye}};
  if (!c.inputs.empty()) {
    j["inputs"] = json::array();
    for (const auto& in : c.inputs) {
      j["inputs"].push_back(
          {{"state", detail::state_json(in.state)}, {"eit_csv", rel(in.eit_csv)}, {"reference_csv", rel(in.reference_csv)}});
    }
  }
  if (!c.field_samples_csv.empty()) j["field_samples_csv"] = rel(c.field_samples_csv);
  return j;
}

}  // namespace rydsurf
