// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations shared by the unit and acceptance
// suites. Nothing here calls into the library under test.
#pragma once

#include <cmath>
#include <functional>
#include <numbers>

namespace gob::oracle {

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-10) {
  const double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
  return adaptive_simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb),
                          eps, 40);
}

/// KL(N(mu1, var1) || N(mu2, var2)) by quadrature of p log(p / q).
inline double quadrature_kl(double mu1, double var1, double mu2, double var2) {
  const auto logpdf = [](double x, double mu, double var) {
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - (x - mu) * (x - mu) / (2.0 * var);
  };
  const auto f = [&](double x) {
    const double lp = logpdf(x, mu1, var1);
    return std::exp(lp) * (lp - logpdf(x, mu2, var2));
  };
  const double s = std::sqrt(var1);
  return integrate(f, mu1 - 14.0 * s, mu1 + 14.0 * s);
}

}  // namespace gob::oracle
