#pragma once

#include <cmath>
#include <compare>
#include <cstdlib>
#include <sstream>
#include <string>

#include "rydsurf/error.hpp"

namespace rydsurf {

/// Converts a half-integer quantum number to twice its value, rejecting
/// anything that is not a multiple of 1/2.
inline int twice_half_integer(double v) {
  const double t = 2.0 * v;
  const long r = std::lround(t);
  if (std::abs(t - static_cast<double>(r)) > 1e-9) {
    throw InvalidStateError("not a half-integer: " + std::to_string(v));
  }
  return static_cast<int>(r);
}

/// One fine-structure Stark component |n l j mj>.
///
/// Half-integers are stored doubled so comparisons and hashing are exact.
class RydbergState {
 public:
  RydbergState(int n, int l, double j, double mj)
      : n_(n), l_(l), two_j_(twice_half_integer(j)), two_mj_(twice_half_integer(mj)) {
    validate();
  }

  static RydbergState from_twice(int n, int l, int two_j, int two_mj) {
    return RydbergState(n, l, 0.5 * two_j, 0.5 * two_mj);
  }

  int n() const noexcept { return n_; }
  int l() const noexcept { return l_; }
  double j() const noexcept { return 0.5 * two_j_; }
  double mj() const noexcept { return 0.5 * two_mj_; }
  int two_j() const noexcept { return two_j_; }
  int two_mj() const noexcept { return two_mj_; }

  RydbergState with_mj(double mj) const { return RydbergState(n_, l_, j(), mj); }
  RydbergState with_n(int n) const { return RydbergState(n, l_, j(), mj()); }

  std::string label() const {
    static constexpr const char* letters = "spdfghiklmnoqrtuv";
    std::ostringstream os;
    os << n_;
    if (l_ < 17) {
      os << letters[l_];
    } else {
      os << "[l=" << l_ << "]";
    }
    os << two_j_ << "/2,mj=" << two_mj_ << "/2";
    return os.str();
  }

  auto operator<=>(const RydbergState&) const = default;

 private:
  void validate() const {
    if (n_ < 1) throw InvalidStateError("n must be positive");
    if (l_ < 0 || l_ >= n_) throw InvalidStateError("l must satisfy 0 <= l < n");
    if (two_j_ != 2 * l_ + 1 && two_j_ != 2 * l_ - 1) {
      throw InvalidStateError("j must be l +- 1/2");
    }
    if (std::abs(two_mj_) > two_j_ || (two_j_ - two_mj_) % 2 != 0) {
      throw InvalidStateError("|mj| must not exceed j");
    }
  }

  int n_;
  int l_;
  int two_j_;
  int two_mj_;
};

}  // namespace rydsurf
