#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rydsurf/eit.hpp"
#include "rydsurf/error.hpp"
#include "rydsurf/samples.hpp"

// Plain comma-separated files with a fixed header line. Numbers are written in
// shortest round-trip form, so equal inputs give byte-identical files.

namespace rydsurf::io {

inline constexpr std::string_view kSpectrumHeader = "detuning_mhz,od,sigma,z_um";
inline constexpr std::string_view kFieldHeader = "z_um,field_v_per_cm,error_v_per_cm,n,l,j,mj";
inline constexpr std::string_view kShiftHeader = "z_um,delta_c_mhz,error_mhz,n,l,j,mj,offset_mhz,offset_error_mhz";

inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_number(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw ParseError(where + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// Writes `content` to a sibling temporary and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.flush()) throw Error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Rows of numbers under an exact header; blank lines and '#' comments skipped.
inline std::vector<std::vector<double>> read_table(const std::filesystem::path& path, std::string_view header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  bool seen_header = false;
  const std::size_t columns = split(header).size();
  for (int number = 1; std::getline(in, line); ++number) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(number);
    if (!seen_header) {
      if (line != header) throw ParseError(where + ": expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != columns) throw ParseError(where + ": expected " + std::to_string(columns) + " columns");
    std::vector<double> row;
    for (auto c : cells) row.push_back(parse_number(c, where));
    rows.push_back(std::move(row));
  }
  if (!seen_header) throw ParseError(path.string() + ": missing header");
  return rows;
}

inline RydbergState state_from(const std::vector<double>& row, std::size_t at, const std::string& where) {
  try {
    const auto n = static_cast<int>(row[at]), l = static_cast<int>(row[at + 1]);
    if (n != row[at] || l != row[at + 1]) throw ParseError(where + ": n and l must be integers");
    return RydbergState(n, l, row[at + 2], row[at + 3]);
  } catch (const ModelError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline std::string state_cells(const RydbergState& s) {
  return std::to_string(s.n()) + "," + std::to_string(s.l()) + "," + format_number(s.j()) + "," + format_number(s.mj());
}

}  // namespace detail

inline std::string spectrum_csv(const Spectrum& s) {
  std::ostringstream os;
  os << kSpectrumHeader << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << format_number(s.detunings[i]) << ',' << format_number(s.od[i]) << ',' << format_number(s.sigma[i]) << ','
       << format_number(s.z_um) << '\n';
  }
  return os.str();
}

inline std::string spectra_csv(const std::vector<Spectrum>& spectra) {
  std::string out = spectrum_csv(Spectrum{});
  for (const auto& s : spectra) out += spectrum_csv(s).substr(kSpectrumHeader.size() + 1);
  return out;
}

inline void write_spectrum(const std::filesystem::path& path, const Spectrum& s) { write_atomic(path, spectrum_csv(s)); }

inline void write_spectra(const std::filesystem::path& path, const std::vector<Spectrum>& spectra) {
  write_atomic(path, spectra_csv(spectra));
}

/// All spectra in one file, grouped by the z column in ascending order.
inline std::vector<Spectrum> read_spectra(const std::filesystem::path& path) {
  std::map<double, Spectrum> by_z;
  for (const auto& row : detail::read_table(path, kSpectrumHeader)) {
    auto& s = by_z[row[3]];
    s.z_um = row[3];
    s.detunings.push_back(row[0]);
    s.od.push_back(row[1]);
    s.sigma.push_back(row[2]);
  }
  if (by_z.empty()) throw ParseError(path.string() + ": no data rows");
  std::vector<Spectrum> out;
  for (auto& [z, s] : by_z) {
    try {
      s.validate();
    } catch (const ModelError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline Spectrum read_spectrum(const std::filesystem::path& path) {
  auto all = read_spectra(path);
  if (all.size() != 1) throw ParseError(path.string() + ": expected a single distance");
  return std::move(all.front());
}

inline std::string field_csv(const std::vector<FieldSample>& samples) {
  std::ostringstream os;
  os << kFieldHeader << '\n';
  for (const auto& f : samples) {
    os << format_number(f.z_um) << ',' << format_number(f.field_v_per_cm) << ',' << format_number(f.error_v_per_cm)
       << ',' << detail::state_cells(f.state) << '\n';
  }
  return os.str();
}

inline void write_field_samples(const std::filesystem::path& path, const std::vector<FieldSample>& samples) {
  write_atomic(path, field_csv(samples));
}

inline std::vector<FieldSample> read_field_samples(const std::filesystem::path& path) {
  std::vector<FieldSample> out;
  int row_number = 0;
  for (const auto& row : detail::read_table(path, kFieldHeader)) {
    const std::string where = path.string() + " row " + std::to_string(++row_number);
    FieldSample f{row[0], row[1], row[2], detail::state_from(row, 3, where)};
    if (!(f.z_um > 0.0) || !(f.field_v_per_cm >= 0.0) || !(f.error_v_per_cm >= 0.0)) {
      throw ParseError(where + ": need z > 0, field >= 0, error >= 0");
    }
    out.push_back(f);
  }
  return out;
}

inline std::string shift_csv(const std::vector<ShiftCurve>& curves) {
  std::ostringstream os;
  os << kShiftHeader << '\n';
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      os << format_number(p.z_um) << ',' << format_number(p.delta_c_mhz) << ',' << format_number(p.error_mhz) << ','
         << detail::state_cells(p.state) << ',' << format_number(c.offset_mhz) << ','
         << format_number(c.offset_error_mhz) << '\n';
    }
  }
  return os.str();
}

inline void write_shift_curves(const std::filesystem::path& path, const std::vector<ShiftCurve>& curves) {
  write_atomic(path, shift_csv(curves));
}

inline std::vector<ShiftCurve> read_shift_curves(const std::filesystem::path& path) {
  std::vector<ShiftCurve> out;
  int row_number = 0;
  for (const auto& row : detail::read_table(path, kShiftHeader)) {
    const std::string where = path.string() + " row " + std::to_string(++row_number);
    const auto state = detail::state_from(row, 3, where);
    if (out.empty() || out.back().state != state) {
      out.push_back({});
      out.back().state = state;
      out.back().offset_mhz = row[7];
      out.back().offset_error_mhz = row[8];
    }
    out.back().points.push_back({row[0], row[1], row[2], state});
  }
  return out;
}

}  // namespace rydsurf::io
