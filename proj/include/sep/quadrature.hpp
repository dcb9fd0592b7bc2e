#pragma once

// Adaptive Simpson quadrature and Gaussian-weighted integrals.

#include <cmath>
#include <functional>

#include "sep/common.hpp"

namespace sep::quadrature {

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double fa, double b, double fb,
                    double m, double fm, double whole, double tol, int depth,
                    int max_depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (depth >= max_depth || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, fa, m, fm, lm, flm, left, tol / 2, depth + 1,
                      max_depth) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, tol / 2, depth + 1,
                      max_depth);
}

}  // namespace detail

// Integral of f over [a,b] to absolute tolerance tol.
template <class F>
double integrate(const F& f, double a, double b, double tol,
                 int max_depth = 48) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, tol, 0, max_depth);
}

// Integral of g against the standard normal density over the whole line.
// The tails beyond +-9 contribute below 1e-18 for bounded g.
template <class G>
double gauss_expect(const G& g, double tol) {
  auto f = [&](double x) {
    return g(x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  };
  return integrate(f, -9.0, 9.0, tol);
}

}  // namespace sep::quadrature
