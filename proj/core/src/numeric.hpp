#pragma once

// Internal quadrature helpers shared by the core sources.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <array>
#include <limits>
#include <cmath>
#include <utility>

namespace mfpe::detail {

/// Adaptive Gauss-Kronrod (61 point) integral on [a, b]; infinite limits allowed.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-12, double* error = nullptr) {
  if (a == b) return 0.0;
  double err = 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double value;
  if (std::isfinite(a) && std::isfinite(b)) {
    // Boost compares an unscaled error estimate against a scaled tolerance, so
    // short intervals never terminate early; integrate on [-1, 1] instead.
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    value = half * GK::integrate([&](double t) { return f(mid + half * t); }, -1.0, 1.0, 12, tol, &err);
    err *= std::abs(half);
  } else {
    value = GK::integrate(std::forward<F>(f), a, b, 12, tol, &err);
  }
  if (error) *error = err;
  return value;
}

/// Integral on (a, b) with integrable endpoint singularities.
template <class F>
double integrate_singular(F&& f, double a, double b, double tol = 1e-12) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(std::forward<F>(f), a, b, tol);
}

/// Integral on [a, inf).
template <class F>
double integrate_to_infinity(F&& f, double a, double tol = 1e-12) {
  boost::math::quadrature::exp_sinh<double> es;
  return es.integrate([&](double t) { return f(a + t); }, 0.0, std::numeric_limits<double>::infinity(), tol);
}

/// Eight point Gauss-Legendre nodes/weights on [-1, 1].
struct GaussLegendre8 {
  std::array<double, 8> x{};
  std::array<double, 8> w{};
  GaussLegendre8() {
    using G = boost::math::quadrature::gauss<double, 8>;
    const auto& ax = G::abscissa();
    const auto& aw = G::weights();
    for (int i = 0; i < 4; ++i) {
      x[i] = -ax[i];
      w[i] = aw[i];
      x[7 - i] = ax[i];
      w[7 - i] = aw[i];
    }
  }
};

}  // namespace mfpe::detail
