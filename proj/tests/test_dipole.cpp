#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "rydsurf/atomic/dipole.hpp"

namespace rydsurf {
namespace {

// Clebsch-Gordan amplitudes <l, mj - ms; 1/2, ms | j mj>, closed form for j = l +- 1/2.
double spin_orbit_cg(int l, int two_j, int two_mj, int two_ms) {
  const double m = two_mj / 2.0;
  const double d = 2.0 * l + 1.0;
  const bool up = two_ms > 0;
  if (two_j == 2 * l + 1) return up ? std::sqrt((l + m + 0.5) / d) : std::sqrt((l - m + 0.5) / d);
  return up ? -std::sqrt((l - m + 0.5) / d) : std::sqrt((l + m + 0.5) / d);
}

// <l m| cos(theta) |l' m> for spherical harmonics with the Condon-Shortley phase.
double cos_theta(int l, int lp, double m) {
  if (lp == l - 1) return std::sqrt((l * l - m * m) / ((2.0 * l + 1.0) * (2.0 * l - 1.0)));
  if (lp == l + 1) return cos_theta(lp, l, m);
  return 0.0;
}

double uncoupled_oracle(int la, int tja, int lb, int tjb, int tmj) {
  double s = 0.0;
  for (int tms : {1, -1}) {
    const double ml = (tmj - tms) / 2.0;
    if (std::abs(ml) > la || std::abs(ml) > lb) continue;
    s += spin_orbit_cg(la, tja, tmj, tms) * spin_orbit_cg(lb, tjb, tmj, tms) * cos_theta(la, lb, ml);
  }
  return s;
}

TEST(DipoleAngular, MatchesUncoupledBasis) {
  int checked = 0;
  for (int la = 0; la <= 6; ++la) {
    for (int lb : {la - 1, la + 1}) {
      if (lb < 0) continue;
      for (int tja : {2 * la - 1, 2 * la + 1}) {
        for (int tjb : {2 * lb - 1, 2 * lb + 1}) {
          if (tja < 1 || tjb < 1) continue;
          for (int tmj = -std::min(tja, tjb); tmj <= std::min(tja, tjb); tmj += 2) {
            EXPECT_NEAR(dipole_z_angular(la, tja, tmj, lb, tjb, tmj), uncoupled_oracle(la, tja, lb, tjb, tmj), 1e-13)
                << la << " " << tja << " " << lb << " " << tjb << " " << tmj;
            ++checked;
          }
        }
      }
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(DipoleAngular, KnownValues) {
  // s1/2 -> p1/2 and p3/2 for mj = 1/2
  EXPECT_NEAR(std::abs(dipole_z_angular(0, 1, 1, 1, 1, 1)), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(std::abs(dipole_z_angular(0, 1, 1, 1, 3, 1)), std::sqrt(2.0) / 3.0, 1e-14);
}

TEST(DipoleAngular, SelectionRules) {
  EXPECT_EQ(dipole_z_angular(1, 3, 1, 2, 5, 3), 0.0);   // mj changes
  EXPECT_EQ(dipole_z_angular(1, 1, 1, 3, 5, 1), 0.0);   // |dl| = 2
  EXPECT_EQ(dipole_z_angular(2, 5, 1, 2, 5, 1), 0.0);   // dl = 0
  EXPECT_EQ(dipole_z_angular(1, 1, 1, 2, 5, 1), 0.0);   // |dj| = 2
  EXPECT_EQ(dipole_z_angular(2, 5, 5, 1, 3, 5), 0.0);   // |mj| > j'
}

TEST(DipoleAngular, Hermitian) {
  for (int la = 0; la <= 5; ++la) {
    const int lb = la + 1;
    for (int tja : {2 * la - 1, 2 * la + 1}) {
      for (int tjb : {2 * lb - 1, 2 * lb + 1}) {
        if (tja < 1) continue;
        for (int tmj = -tja; tmj <= tja; tmj += 2) {
          EXPECT_NEAR(dipole_z_angular(la, tja, tmj, lb, tjb, tmj), dipole_z_angular(lb, tjb, tmj, la, tja, tmj), 1e-14);
        }
      }
    }
  }
}

TEST(DipoleMatrixElement, CombinesAngularAndRadial) {
  const auto rb = QuantumDefectTable::load(RYDSURF_DATA_DIR "/rb87_quantum_defects.txt");
  const RydbergState a(30, 2, 2.5, 0.5), b(30, 3, 3.5, 0.5);
  const double radial = radial_matrix_element(a, b, rb);
  EXPECT_NEAR(dipole_z_matrix_element(a, b, rb), dipole_z_angular(a, b) * radial, 1e-12 * std::abs(radial));
  EXPECT_NEAR(dipole_z_matrix_element(a, b, rb), dipole_z_matrix_element(b, a, rb), 1e-10);
  EXPECT_EQ(dipole_z_matrix_element(a, b.with_mj(1.5), rb), 0.0);
  EXPECT_EQ(dipole_z_matrix_element(a, RydbergState(30, 0, 0.5, 0.5), rb), 0.0);
}

}  // namespace
}  // namespace rydsurf
