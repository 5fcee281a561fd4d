#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <functional>
#include <numbers>

#include "snrforge/schedule.hpp"

namespace oracle {

/// Root of f on [lo, hi] for a monotone f with a sign change.
inline double bisect(const std::function<double(double)> &f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(mid))) {
      break;
    }
  }
  return 0.5 * (lo + hi);
}

/// lambda with survival(lambda) = t, found by bisection (survival is non-increasing).
inline double bisect_survival(const snrforge::ScheduleSpec &spec, double t) {
  return bisect([&](double l) { return snrforge::survival(spec, l) - t; }, -200.0, 200.0);
}

/// -dP/dlambda by central differences.
inline double neg_derivative(const snrforge::ScheduleSpec &spec, double lam, double h) {
  return (snrforge::survival(spec, lam - h) - snrforge::survival(spec, lam + h)) / (2.0 * h);
}

/// Composite Simpson rule.
inline double simpson(const std::function<double(double)> &f, double a, double b, int n) {
  if (n % 2 == 1) {
    ++n;
  }
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  }
  return s * h / 3.0;
}

/// Integral of the Cauchy density over (lam, inf) for lam > mu, via u = 1 / (x - mu).
inline double cauchy_upper_tail_quadrature(double mu, double gamma, double lam) {
  const double umax = 1.0 / (lam - mu);
  auto integrand = [gamma](double u) {
    // p(mu + 1/u) / u^2 = gamma / (pi (1 + gamma^2 u^2))
    return gamma / (std::numbers::pi * (1.0 + gamma * gamma * u * u));
  };
  return simpson(integrand, 0.0, umax, 20000);
}

/// Standard normal quantile by bisection on the erfc-based CDF.
inline double bisect_normal_quantile(double p) {
  return bisect([p](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2) - p; }, -40.0,
                40.0);
}

/// Standard normal CDF by Simpson quadrature of the density from -12.
inline double normal_cdf_quadrature(double x) {
  return simpson(
      [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }, -12.0,
      x, 40000);
}

} // namespace oracle
