// Shared physical constants and unit conversions.
//
// Every module converts through this table: atomic units inside the atomic
// structure code, MHz / V/cm / um / Debye at the public interfaces.
// Values are CODATA 2018 unless noted otherwise.
#pragma once

#include <numbers>

namespace rydsurf::units {

inline constexpr double speed_of_light = 299792458.0;           // m/s
inline constexpr double elementary_charge = 1.602176634e-19;    // C
inline constexpr double planck = 6.62607015e-34;                 // J s
inline constexpr double bohr_radius = 5.29177210903e-11;         // m
inline constexpr double hartree_energy = 4.3597447222071e-18;    // J
inline constexpr double hartree_mhz = 6.579683920502e9;          // Eh/h in MHz
inline constexpr double rydberg_infinity_mhz = 3.2898419602508e9;  // R_inf c in MHz
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double vacuum_permeability = 1.25663706212e-6; // N/A^2
inline constexpr double electron_mass_u = 5.48579909065e-4;      // u
inline constexpr double rb87_mass_u = 86.909180531;              // u (AME 2016)

// 1 D = 1e-21 C m^2/s / c, by definition.
inline constexpr double debye = 1e-21 / speed_of_light;  // C m

// Natural linewidth of the Rb D2 (5s1/2 -> 5p3/2) probe transition,
// Gamma / 2pi in MHz (Steck, Rubidium 87 D Line Data).
inline constexpr double rb87_d2_linewidth_mhz = 6.0666;

// Atomic unit of electric field, Eh / (e a0).
inline constexpr double atomic_field_v_per_m =
    hartree_energy / (elementary_charge * bohr_radius);
inline constexpr double atomic_field_v_per_cm = atomic_field_v_per_m / 100.0;

// Atomic unit of electric dipole moment, e a0.
inline constexpr double atomic_dipole_cm = elementary_charge * bohr_radius;

inline constexpr double um = 1e-6;  // m

// Polarizability conversion: alpha[a.u.] -> MHz / (V/cm)^2.
inline constexpr double polarizability_au_to_mhz_per_vcm2 =
    hartree_mhz / (atomic_field_v_per_cm * atomic_field_v_per_cm);

constexpr double field_v_per_cm_to_au(double f) { return f / atomic_field_v_per_cm; }
constexpr double field_au_to_v_per_cm(double f) { return f * atomic_field_v_per_cm; }
constexpr double debye_to_si(double d) { return d * debye; }
constexpr double si_to_debye(double d) { return d / debye; }
constexpr double energy_au_to_mhz(double e) { return e * hartree_mhz; }
constexpr double energy_mhz_to_au(double e) { return e / hartree_mhz; }

/// Surface dipole density d0 [Debye/um^2] -> surface polarization [C/m].
constexpr double dipole_density_to_si(double d0_debye_per_um2) {
  return d0_debye_per_um2 * debye / (um * um);
}

/// Reduced-mass Rydberg constant for a nucleus of mass `mass_u` (MHz).
constexpr double reduced_rydberg_mhz(double mass_u) {
  return rydberg_infinity_mhz / (1.0 + electron_mass_u / mass_u);
}

}  // namespace rydsurf::units
