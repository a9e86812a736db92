#pragma once

#include <cmath>
#include <limits>

#include "petmood/error.hpp"

namespace petmood::stats {

namespace detail {

inline constexpr int kMaxIterations = 10000;
inline constexpr double kEpsilon = 1e-16;

// log(x^a e^-x / Gamma(a)), the common prefactor of both expansions.
inline double log_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

// P(a, x) by its power series; converges quickly for x < a + 1.
inline double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxIterations; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEpsilon) break;
  }
  return sum * std::exp(log_prefactor(a, x));
}

// Q(a, x) by the Legendre continued fraction, evaluated with modified Lentz;
// converges quickly for x >= a + 1.
inline double upper_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEpsilon;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEpsilon) break;
  }
  return std::exp(log_prefactor(a, x)) * h;
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0) || !(x >= 0)) throw ValidationError("incomplete gamma requires a > 0 and x >= 0");
  if (x == 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return detail::lower_series(a, x);
  return 1.0 - detail::upper_continued_fraction(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly
// in the tail so small values keep full relative precision.
inline double gamma_q(double a, double x) {
  if (!(a > 0) || !(x >= 0)) throw ValidationError("incomplete gamma requires a > 0 and x >= 0");
  if (x == 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::lower_series(a, x);
  return detail::upper_continued_fraction(a, x);
}

// Upper tail of the chi-square distribution.
inline double chi_square_sf(double statistic, int df) {
  if (df < 1) throw ValidationError("chi-square needs df >= 1");
  if (!(statistic >= 0)) throw ValidationError("chi-square statistic must be >= 0");
  return gamma_q(0.5 * df, 0.5 * statistic);
}

}  // namespace petmood::stats
