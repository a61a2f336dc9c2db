#pragma once

#include <cmath>

#include "rydsurf/atomic/quantum_defects.hpp"
#include "rydsurf/atomic/radial.hpp"
#include "rydsurf/atomic/state.hpp"
#include "rydsurf/atomic/wigner.hpp"

namespace rydsurf {

/// Angular part of <l_a j_a mj| cos(theta) |l_b j_b mj> in the coupled basis,
/// via Wigner-Eckart and the j -> j' recoupling of the rank-1 operator.
/// Zero unless |l_a - l_b| = 1, |j_a - j_b| <= 1 and mj_a = mj_b.
inline double dipole_z_angular(int l_a, int two_j_a, int two_mj_a, int l_b, int two_j_b, int two_mj_b) {
  if (two_mj_a != two_mj_b || std::abs(l_a - l_b) != 1) return 0.0;
  const int tla = 2 * l_a;
  const int tlb = 2 * l_b;
  // <j_a mj| T^1_0 |j_b mj> = (-1)^{j_a - mj} (j_a 1 j_b; -mj 0 mj) <j_a||T^1||j_b>
  const double threej = wigner3j_twice(two_j_a, 2, two_j_b, -two_mj_a, 0, two_mj_b);
  if (threej == 0.0) return 0.0;
  // <l_a s j_a||C^1||l_b s j_b> = (-1)^{l_a+s+j_b+1} sqrt((2j_a+1)(2j_b+1)) {l_a j_a s; j_b l_b 1} <l_a||C^1||l_b>
  const double sixj = wigner6j_twice(tla, two_j_a, 1, two_j_b, tlb, 2);
  // <l_a||C^1||l_b> = (-1)^{l_a} sqrt((2l_a+1)(2l_b+1)) (l_a 1 l_b; 0 0 0)
  const double reduced_l = detail::phase(l_a) * std::sqrt((2.0 * l_a + 1.0) * (2.0 * l_b + 1.0)) *
                           wigner3j_twice(tla, 2, tlb, 0, 0, 0);
  const double reduced_j = detail::phase((tla + 1 + two_j_b + 2) / 2) *
                           std::sqrt((two_j_a + 1.0) * (two_j_b + 1.0)) * sixj * reduced_l;
  return detail::phase((two_j_a - two_mj_a) / 2) * threej * reduced_j;
}

inline double dipole_z_angular(const RydbergState& a, const RydbergState& b) {
  return dipole_z_angular(a.l(), a.two_j(), a.two_mj(), b.l(), b.two_j(), b.two_mj());
}

/// <a| z |b> in atomic units (e a0); zero outside the dipole selection rules.
inline double dipole_z_matrix_element(const RydbergState& a, const RydbergState& b,
                                      const QuantumDefectTable& table, const RadialGrid& grid = {}) {
  const double angular = dipole_z_angular(a, b);
  if (angular == 0.0) return 0.0;
  return angular * radial_matrix_element(a, b, table, grid);
}

}  // namespace rydsurf
