#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "rydsurf/atomic/state.hpp"

// Wigner 3j and 6j symbols from the Racah sums. Factorials are tabulated in
// long double; arguments are passed doubled (two_j = 2j) so that half-integer
// spins are exact.

namespace rydsurf {

namespace detail {

inline constexpr int max_factorial = 300;

inline const std::array<long double, max_factorial + 1>& factorial_table() {
  static const auto table = [] {
    std::array<long double, max_factorial + 1> t{};
    t[0] = 1.0L;
    for (int i = 1; i <= max_factorial; ++i) t[i] = t[i - 1] * static_cast<long double>(i);
    return t;
  }();
  return table;
}

inline long double fact(int n) { return factorial_table()[static_cast<std::size_t>(n)]; }

// Triangle condition on doubled arguments, including integer perimeter.
inline bool triangle(int ta, int tb, int tc) {
  return ta >= 0 && tb >= 0 && tc >= 0 && tc >= std::abs(ta - tb) && tc <= ta + tb &&
         (ta + tb + tc) % 2 == 0;
}

// Delta(abc) = sqrt((a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!)
inline long double triangle_coefficient(int ta, int tb, int tc) {
  return std::sqrt(fact((ta + tb - tc) / 2) * fact((ta - tb + tc) / 2) * fact((-ta + tb + tc) / 2) /
                   fact((ta + tb + tc) / 2 + 1));
}

inline int phase(int k) { return (k % 2 == 0) ? 1 : -1; }

}  // namespace detail

/// (j1 j2 j3; m1 m2 m3) with all arguments doubled.
inline double wigner3j_twice(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3) {
  using detail::fact;
  if (tm1 + tm2 + tm3 != 0) return 0.0;
  if (!detail::triangle(tj1, tj2, tj3)) return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tm3) > tj3) return 0.0;
  if ((tj1 + tm1) % 2 || (tj2 + tm2) % 2 || (tj3 + tm3) % 2) return 0.0;
  if (std::max({tj1, tj2, tj3}) > detail::max_factorial / 2 - 2) return 0.0;

  // Racah: sum over k of (-1)^k / [k! (j3-j2+k+m1)! (j3-j1+k-m2)! (j1+j2-j3-k)! (j1-k-m1)! (j2-k+m2)!]
  const int a = (tj3 - tj2 + tm1) / 2;
  const int b = (tj3 - tj1 - tm2) / 2;
  const int c = (tj1 + tj2 - tj3) / 2;
  const int d = (tj1 - tm1) / 2;
  const int e = (tj2 + tm2) / 2;
  const int kmin = std::max({0, -a, -b});
  const int kmax = std::min({c, d, e});
  long double sum = 0.0L;
  for (int k = kmin; k <= kmax; ++k) {
    sum += detail::phase(k) / (fact(k) * fact(a + k) * fact(b + k) * fact(c - k) * fact(d - k) * fact(e - k));
  }
  const long double norm =
      std::sqrt(fact((tj1 + tm1) / 2) * fact((tj1 - tm1) / 2) * fact((tj2 + tm2) / 2) *
                fact((tj2 - tm2) / 2) * fact((tj3 + tm3) / 2) * fact((tj3 - tm3) / 2));
  const int overall = detail::phase((tj1 - tj2 - tm3) / 2);
  return static_cast<double>(overall * detail::triangle_coefficient(tj1, tj2, tj3) * norm * sum);
}

/// Wigner 3j symbol; zero whenever a selection rule fails.
inline double wigner3j(double j1, double j2, double j3, double m1, double m2, double m3) {
  return wigner3j_twice(twice_half_integer(j1), twice_half_integer(j2), twice_half_integer(j3),
                        twice_half_integer(m1), twice_half_integer(m2), twice_half_integer(m3));
}

/// {j1 j2 j3; j4 j5 j6} with all arguments doubled.
inline double wigner6j_twice(int tj1, int tj2, int tj3, int tj4, int tj5, int tj6) {
  using detail::fact;
  using detail::triangle;
  if (!triangle(tj1, tj2, tj3) || !triangle(tj1, tj5, tj6) || !triangle(tj4, tj2, tj6) ||
      !triangle(tj4, tj5, tj3)) {
    return 0.0;
  }
  if (std::max({tj1, tj2, tj3, tj4, tj5, tj6}) > detail::max_factorial / 3) return 0.0;

  const int a1 = (tj1 + tj2 + tj3) / 2;
  const int a2 = (tj1 + tj5 + tj6) / 2;
  const int a3 = (tj4 + tj2 + tj6) / 2;
  const int a4 = (tj4 + tj5 + tj3) / 2;
  const int b1 = (tj1 + tj2 + tj4 + tj5) / 2;
  const int b2 = (tj2 + tj3 + tj5 + tj6) / 2;
  const int b3 = (tj3 + tj1 + tj6 + tj4) / 2;
  const int tmin = std::max({a1, a2, a3, a4});
  const int tmax = std::min({b1, b2, b3});
  long double sum = 0.0L;
  for (int t = tmin; t <= tmax; ++t) {
    sum += detail::phase(t) * fact(t + 1) /
           (fact(t - a1) * fact(t - a2) * fact(t - a3) * fact(t - a4) * fact(b1 - t) * fact(b2 - t) *
            fact(b3 - t));
  }
  const long double delta = detail::triangle_coefficient(tj1, tj2, tj3) * detail::triangle_coefficient(tj1, tj5, tj6) *
                            detail::triangle_coefficient(tj4, tj2, tj6) * detail::triangle_coefficient(tj4, tj5, tj3);
  return static_cast<double>(delta * sum);
}

/// Wigner 6j symbol; zero whenever a triangle condition fails.
inline double wigner6j(double j1, double j2, double j3, double j4, double j5, double j6) {
  return wigner6j_twice(twice_half_integer(j1), twice_half_integer(j2), twice_half_integer(j3),
                        twice_half_integer(j4), twice_half_integer(j5), twice_half_integer(j6));
}

}  // namespace rydsurf
