#include <gtest/gtest.h>

#include <sstream>

#include "rydsurf/atomic/quantum_defects.hpp"

namespace rydsurf {
namespace {

QuantumDefectTable rubidium() { return QuantumDefectTable::load(RYDSURF_DATA_DIR "/rb87_quantum_defects.txt"); }

TEST(QuantumDefects, ShippedTableParses) {
  const auto table = rubidium();
  EXPECT_EQ(table.species(), "Rb87");
  EXPECT_EQ(table.entries().size(), 7u);
  EXPECT_NEAR(table.rydberg_mhz(), units::reduced_rydberg_mhz(units::rb87_mass_u), 0.01);
  EXPECT_DOUBLE_EQ(table.series(2, 5).delta0, 1.34646572);
}

TEST(QuantumDefects, ZeroDefectSeriesAboveF) {
  const auto table = rubidium();
  EXPECT_DOUBLE_EQ(effective_n(RydbergState(30, 5, 5.5, 0.5), table), 30.0);
  EXPECT_DOUBLE_EQ(effective_n(RydbergState(30, 5, 4.5, 0.5), table), 30.0);
}

TEST(QuantumDefects, RydbergRitzEvaluation) {
  const auto table = rubidium();
  // nu = n - d0 - d2 / (n - d0)^2, evaluated by hand from the file values.
  const double core23 = 23.0 - 3.1311804;
  EXPECT_NEAR(effective_n(RydbergState(23, 0, 0.5, 0.5), table), core23 - 0.1784 / (core23 * core23), 1e-12);
  EXPECT_NEAR(effective_n(RydbergState(23, 0, 0.5, 0.5), table), 19.87, 0.01);
  const double core38 = 38.0 - 1.34646572;
  EXPECT_NEAR(effective_n(RydbergState(38, 2, 2.5, 0.5), table), core38 + 0.596 / (core38 * core38), 1e-12);
  EXPECT_NEAR(effective_n(RydbergState(38, 2, 2.5, 0.5), table), 36.65, 0.01);
}

TEST(QuantumDefects, EnergyLevels) {
  const auto h = QuantumDefectTable::hydrogen();
  EXPECT_DOUBLE_EQ(energy_level(RydbergState(2, 1, 0.5, 0.5), h), -h.rydberg_mhz() / 4.0);

  const auto rb = rubidium();
  const double nu = effective_n(RydbergState(26, 0, 0.5, 0.5), rb);
  EXPECT_DOUBLE_EQ(energy_level(RydbergState(26, 0, 0.5, 0.5), rb), -rb.rydberg_mhz() / (nu * nu));

  for (auto [l, tj] : {std::pair{0, 1}, {1, 1}, {1, 3}, {2, 3}, {2, 5}, {3, 5}, {3, 7}, {5, 11}}) {
    for (int n = 20; n < 40; ++n) {
      const auto a = RydbergState::from_twice(n, l, tj, 1);
      EXPECT_GT(energy_level(a.with_n(n + 1), rb) - energy_level(a, rb), 0.0);
    }
  }
}

TEST(QuantumDefects, MissingSeriesIsExplicitError) {
  std::istringstream in("RYDBERG X 1e9\nX 0 1/2 1.0 0.0\n");
  const auto table = QuantumDefectTable::parse(in);
  EXPECT_THROW(effective_n(RydbergState(20, 1, 0.5, 0.5), table), LookupError);
  EXPECT_NO_THROW(effective_n(RydbergState(20, 0, 0.5, 0.5), table));
}

TEST(QuantumDefects, ParserRejectsMalformedRecords) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return QuantumDefectTable::parse(in);
  };
  EXPECT_THROW(parse("X 0 1/2 1.0 0.0\n"), ParseError);                      // no RYDBERG
  EXPECT_THROW(parse("RYDBERG X 1e9\nX 0 1/2 1.0 0.0 extra\n"), ParseError);  // unknown field
  EXPECT_THROW(parse("RYDBERG X 1e9\nY 0 1/2 1.0 0.0\n"), ParseError);        // other species
  EXPECT_THROW(parse("RYDBERG X 1e9\nX 0 3/2 1.0 0.0\n"), ParseError);        // j != l +- 1/2
  EXPECT_THROW(parse("RYDBERG X 1e9\nX 0 1/2 -1.0 0.0\n"), ParseError);       // negative delta0
  EXPECT_THROW(parse("RYDBERG X 1e9\nX 0 1/2 abc 0.0\n"), ParseError);
  EXPECT_THROW(parse("RYDBERG X 1e9\nX 0 1/2 1.0 0.0\nX 0 0.5 1.0 0.0\n"), ParseError);  // duplicate
  EXPECT_NO_THROW(parse("# header\n\nRYDBERG X 1e9  # comment\nX 1 1.5 0.5 0.01 # with comment\n"));
}

}  // namespace
}  // namespace rydsurf
