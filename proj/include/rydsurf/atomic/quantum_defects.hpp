#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rydsurf/atomic/state.hpp"
#include "rydsurf/error.hpp"
#include "rydsurf/units.hpp"

namespace rydsurf {

/// Rydberg-Ritz coefficients of one (l, j) series.
struct DefectSeries {
  int l = 0;
  int two_j = 1;
  double delta0 = 0.0;
  double delta2 = 0.0;
  std::string comment;
};

/// Quantum defects of one species, immutable after construction.
///
/// Text format, one record per line, `#` starts a comment:
///
///     RYDBERG <species> <rydberg_constant_mhz>
///     <species> <l> <j> <delta0> <delta2> [# comment]
///
/// `j` may be written as a fraction (`5/2`) or decimal (`2.5`). Exactly one
/// RYDBERG record must precede the series records. Any additional field on a
/// line is rejected. Series with l at or above `default_zero_from_l` that are
/// not listed have zero defect.
class QuantumDefectTable {
 public:
  QuantumDefectTable(std::string species, double rydberg_mhz,
                     std::vector<DefectSeries> series, int default_zero_from_l = 4)
      : species_(std::move(species)),
        rydberg_mhz_(rydberg_mhz),
        default_zero_from_l_(default_zero_from_l) {
    if (!(rydberg_mhz_ > 0.0)) throw ModelError("Rydberg constant must be positive");
    for (auto& s : series) {
      if (s.delta0 < 0.0) throw ModelError("delta0 must be non-negative");
      const auto key = std::make_pair(s.l, s.two_j);
      if (series_.contains(key)) throw ModelError("duplicate series in defect table");
      series_.emplace(key, std::move(s));
    }
  }

  /// Zero defects for every series.
  static QuantumDefectTable hydrogen() {
    return QuantumDefectTable("H", units::rydberg_infinity_mhz / (1.0 + 1.0 / 1836.15267343), {}, 0);
  }

  static QuantumDefectTable parse(std::istream& in);

  static QuantumDefectTable load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open quantum defect file: " + path);
    return parse(f);
  }

  const std::string& species() const noexcept { return species_; }
  double rydberg_mhz() const noexcept { return rydberg_mhz_; }
  int default_zero_from_l() const noexcept { return default_zero_from_l_; }
  const std::map<std::pair<int, int>, DefectSeries>& entries() const noexcept { return series_; }

  /// Coefficients for (l, j); throws LookupError when the series is missing.
  DefectSeries series(int l, int two_j) const {
    if (auto it = series_.find({l, two_j}); it != series_.end()) return it->second;
    if (l >= default_zero_from_l_) return DefectSeries{l, two_j, 0.0, 0.0, "zero-defect default"};
    throw LookupError("no quantum defect series for l=" + std::to_string(l) +
                      " j=" + std::to_string(two_j) + "/2 in table " + species_);
  }

 private:
  std::string species_;
  double rydberg_mhz_;
  int default_zero_from_l_;
  std::map<std::pair<int, int>, DefectSeries> series_;
};

namespace detail {

inline double parse_number(const std::string& tok, int line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + tok + "'");
  }
  return v;
}

inline double parse_half_integer(const std::string& tok, int line) {
  if (auto slash = tok.find('/'); slash != std::string::npos) {
    return parse_number(tok.substr(0, slash), line) / parse_number(tok.substr(slash + 1), line);
  }
  return parse_number(tok, line);
}

inline int parse_int(const std::string& tok, int line) {
  const double v = parse_number(tok, line);
  if (v != std::floor(v)) throw ParseError("line " + std::to_string(line) + ": expected integer");
  return static_cast<int>(v);
}

}  // namespace detail

inline QuantumDefectTable QuantumDefectTable::parse(std::istream& in) {
  std::string species;
  double rydberg = 0.0;
  std::vector<DefectSeries> records;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string comment;
    if (auto hash = raw.find('#'); hash != std::string::npos) {
      comment = raw.substr(hash + 1);
      raw.resize(hash);
      const auto first = comment.find_first_not_of(" \t");
      comment = first == std::string::npos ? std::string{} : comment.substr(first);
    }
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    const auto where = "line " + std::to_string(line_no) + ": ";
    if (tok[0] == "RYDBERG") {
      if (tok.size() != 3) throw ParseError(where + "RYDBERG record takes <species> <value_mhz>");
      if (!species.empty()) throw ParseError(where + "duplicate RYDBERG record");
      species = tok[1];
      rydberg = detail::parse_number(tok[2], line_no);
      continue;
    }
    if (species.empty()) throw ParseError(where + "series record before RYDBERG record");
    if (tok[0] != species) throw ParseError(where + "unknown species '" + tok[0] + "'");
    if (tok.size() != 5) {
      throw ParseError(where + "expected <species> <l> <j> <delta0> <delta2>, got " +
                       std::to_string(tok.size()) + " fields");
    }
    DefectSeries s;
    s.l = detail::parse_int(tok[1], line_no);
    try {
      s.two_j = twice_half_integer(detail::parse_half_integer(tok[2], line_no));
    } catch (const InvalidStateError& e) {
      throw ParseError(where + e.what());
    }
    if (s.l < 0 || (s.two_j != 2 * s.l + 1 && s.two_j != 2 * s.l - 1)) {
      throw ParseError(where + "j must be l +- 1/2");
    }
    s.delta0 = detail::parse_number(tok[3], line_no);
    s.delta2 = detail::parse_number(tok[4], line_no);
    if (s.delta0 < 0.0) throw ParseError(where + "delta0 must be non-negative");
    s.comment = comment;
    records.push_back(std::move(s));
  }
  if (species.empty()) throw ParseError("quantum defect file has no RYDBERG record");
  try {
    return QuantumDefectTable(species, rydberg, std::move(records));
  } catch (const ModelError& e) {
    throw ParseError(e.what());
  }
}

/// Effective principal quantum number nu = n - delta(n) (Rydberg-Ritz).
inline double effective_n(const RydbergState& s, const QuantumDefectTable& table) {
  const auto series = table.series(s.l(), s.two_j());
  const double core = s.n() - series.delta0;
  const double nu = s.n() - series.delta0 - series.delta2 / (core * core);
  if (!(nu > 0.0)) {
    throw UnsupportedStateError("non-positive effective quantum number for " + s.label());
  }
  return nu;
}

/// Binding energy -Ry/nu^2 relative to the ionization threshold, in MHz.
inline double energy_level(const RydbergState& s, const QuantumDefectTable& table) {
  const double nu = effective_n(s, table);
  return -table.rydberg_mhz() / (nu * nu);
}

}  // namespace rydsurf
