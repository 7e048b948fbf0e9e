#include "mfpe/transform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "mfpe/error.hpp"
#include "numeric.hpp"

namespace mfpe {

namespace {

constexpr double kQuadTol = 1e-13;

double sign_of(double v) { return v > 0.0 ? 1.0 : -1.0; }

// sigma(e + d) near a zero e, linearized when e + d would lose the digits of d.
double sigma_near(const SigmaFunction& s, double e, double d) {
  if (std::abs(d) < 1e-6 * std::max(1.0, std::abs(e))) return d * (s.derivative1(e) + 0.5 * d * s.derivative2(e));
  return s.value(e + d);
}

double inside(double z, const Interval& iv, double toward) {
  if (z <= iv.lo) return std::nextafter(iv.lo, toward);
  if (z >= iv.hi) return std::nextafter(iv.hi, toward);
  return z;
}

}  // namespace

TransformAtlas::TransformAtlas(SigmaFunction sigma, std::vector<double> anchors, int series_order)
    : sigma_(std::move(sigma)), anchors_(std::move(anchors)), series_order_(series_order) {
  if (series_order_ < 0) throw Error(ErrorCode::kInvalidArgument, "series order must be nonnegative");
  if (sigma_.identically_zero()) {
    anchors_.clear();
    return;
  }
  const auto& z = sigma_.zeros();
  const std::size_t n = z.size() + 1;
  if (anchors_.empty()) {
    anchors_.resize(n);
    if (z.empty()) {
      anchors_[0] = 0.0;
    } else {
      anchors_[0] = z.front() - 1.0;
      anchors_[n - 1] = z.back() + 1.0;
      for (std::size_t i = 1; i + 1 < n; ++i) anchors_[i] = 0.5 * (z[i - 1] + z[i]);
    }
  }
  if (anchors_.size() != n) throw Error(ErrorCode::kInvalidArgument, "need one anchor per sigma interval");
  for (int i = 0; i < interval_count(); ++i) {
    const Interval iv = interval(i);
    if (!(anchors_[i] > iv.lo && anchors_[i] < iv.hi))
      throw Error(ErrorCode::kInvalidArgument, "anchor " + std::to_string(i) + " is not inside its interval");
  }
  phi_.reserve(z.size());
  for (double zero : z) phi_.push_back(phi_coefficients(sigma_, zero, series_order_));
}

Interval TransformAtlas::interval(int i) const {
  if (i < 0 || i >= interval_count()) throw Error(ErrorCode::kInvalidArgument, "interval index out of range");
  const auto& z = sigma_.zeros();
  Interval iv;
  if (i > 0) iv.lo = z[static_cast<std::size_t>(i) - 1];
  if (i < static_cast<int>(z.size())) iv.hi = z[static_cast<std::size_t>(i)];
  return iv;
}

double TransformAtlas::anchor(int i) const {
  if (i < 0 || i >= interval_count()) throw Error(ErrorCode::kInvalidArgument, "interval index out of range");
  return anchors_[static_cast<std::size_t>(i)];
}

const std::vector<double>& TransformAtlas::phi_series(int zero_index) const {
  if (zero_index < 0 || zero_index >= static_cast<int>(phi_.size()))
    throw Error(ErrorCode::kInvalidArgument, "zero index out of range");
  return phi_[static_cast<std::size_t>(zero_index)];
}

std::optional<int> TransformAtlas::zero_index(double x) const {
  const auto& z = sigma_.zeros();
  const auto it = std::lower_bound(z.begin(), z.end(), x);
  if (it != z.end() && *it == x) return static_cast<int>(it - z.begin());
  return std::nullopt;
}

int TransformAtlas::locate(double x) const {
  if (!std::isfinite(x)) throw Error(ErrorCode::kOutOfDomain, "non-finite argument");
  if (!sigma_.domain().contains(x)) throw Error(ErrorCode::kOutOfDomain, "x = " + std::to_string(x) + " outside the sigma window");
  if (sigma_.identically_zero() || zero_index(x)) throw Error(ErrorCode::kZeroOfSigma, "x = " + std::to_string(x) + " is a zero of sigma");
  const auto& z = sigma_.zeros();
  return static_cast<int>(std::upper_bound(z.begin(), z.end(), x) - z.begin());
}

double TransformAtlas::integral(int i, double from, double to) const {
  if (from == to) return 0.0;
  const Interval iv = interval(i);
  const bool lo_finite = std::isfinite(iv.lo), hi_finite = std::isfinite(iv.hi);
  const auto& s = sigma_;

  auto from_lo = [&](double a, double b) {  // t = lo + e^u
    const double e = iv.lo;
    auto g = [&](double u) {
      const double d = std::exp(u);
      return d / sigma_near(s, e, d);
    };
    return detail::integrate(g, std::log(a - e), std::log(b - e), kQuadTol);
  };
  auto from_hi = [&](double a, double b) {  // t = hi - e^u
    const double e = iv.hi;
    auto g = [&](double u) {
      const double d = std::exp(u);
      return -d / sigma_near(s, e, -d);
    };
    return detail::integrate(g, std::log(e - a), std::log(e - b), kQuadTol);
  };
  auto unbounded = [&](double a, double b) {  // t = sinh(u)
    auto g = [&](double u) { return std::cosh(u) / s.value(std::sinh(u)); };
    return detail::integrate(g, std::asinh(a), std::asinh(b), kQuadTol);
  };

  // Segments short relative to their distance from the zeros are smooth in x.
  const double gap = std::min({std::abs(from - iv.lo), std::abs(from - iv.hi), std::abs(to - iv.lo), std::abs(to - iv.hi)});
  if (std::abs(to - from) <= 0.25 * gap) {
    auto g = [&](double t) { return 1.0 / s.value(t); };
    return detail::integrate(g, from, to, kQuadTol);
  }

  if (lo_finite && hi_finite) {
    const double mid = 0.5 * (iv.lo + iv.hi);
    auto piece = [&](double a, double b) { return (b <= mid) ? from_lo(a, b) : from_hi(a, b); };
    if ((from <= mid) == (to <= mid)) return piece(from, to);
    return piece(from, mid) + piece(mid, to);
  }
  if (lo_finite) return from_lo(from, to);
  if (hi_finite) return from_hi(from, to);
  return unbounded(from, to);
}

double TransformAtlas::solve_flow(int i, double start, double target) const {
  if (target == 0.0) return start;
  const Interval iv = interval(i);
  const double orientation = sign_of(sigma_.value(anchor(i)));
  const double dir = sign_of(target) * orientation;
  const double end = dir > 0 ? iv.hi : iv.lo;
  const bool finite_end = std::isfinite(end);

  double prev = start, acc = 0.0;
  double step = std::max(1.0, std::abs(start));
  for (int k = 1; k <= 2000; ++k) {
    double next;
    if (finite_end) {
      next = end - (end - start) * std::ldexp(1.0, -k);
      if (next == prev || next == end) return std::nextafter(end, start);
    } else {
      next = prev + dir * step;
      step *= 2.0;
      if (!std::isfinite(next)) break;
    }
    const double piece = integral(i, prev, next);
    if (!std::isfinite(piece)) break;
    if (std::abs(acc + piece) >= std::abs(target)) {
      const double base = acc;
      const double left = prev;
      auto g = [&](double z) { return base + integral(i, left, z) - target; };
      double a = std::min(prev, next), b = std::max(prev, next);
      double fa = g(a), fb = g(b);
      if (fa == 0.0) return a;
      if (fb == 0.0) return b;
      std::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve(g, a, b, fa, fb,
                                                       boost::math::tools::eps_tolerance<double>(52), iters);
      if (iters >= 200) throw Error(ErrorCode::kNonConvergence, "flow root-find did not converge");
      return inside(0.5 * (r.first + r.second), iv, start);
    }
    acc += piece;
    prev = next;
  }
  throw Error(ErrorCode::kNonConvergence, "flow leaves the interval in finite transformed time");
}

IntervalValue h_forward(const TransformAtlas& atlas, double x) {
  const int i = atlas.locate(x);
  const double a = atlas.anchor(i);
  if (const auto& cf = atlas.sigma().closed_form()) return {i, cf->antiderivative(x) - cf->antiderivative(a)};
  return {i, atlas.integral(i, a, x)};
}

double h_inverse(const TransformAtlas& atlas, int interval, double u) {
  const Interval iv = atlas.interval(interval);
  const double a = atlas.anchor(interval);
  if (u == 0.0) return a;
  if (const auto& cf = atlas.sigma().closed_form()) {
    const double x = cf->inverse(u + cf->antiderivative(a), a);
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonConvergence, "no preimage of u in the interval");
    return inside(x, iv, a);
  }
  return atlas.solve_flow(interval, a, u);
}

double h_tilde(const TransformAtlas& atlas, double x, double y) {
  if (y == 0.0 || atlas.sigma().identically_zero()) return x;
  if (const auto& af = atlas.sigma().affine(); af && std::isfinite(x)) {
    if (af->slope == 0.0) return x + af->intercept * y;
    const double z = atlas.sigma().zeros().front();
    return z + (x - z) * std::exp(af->slope * y);
  }
  if (atlas.zero_index(x)) return x;
  const int i = atlas.locate(x);
  if (const auto& cf = atlas.sigma().closed_form()) {
    const double z = cf->inverse(cf->antiderivative(x) + y, x);
    if (!std::isfinite(z)) throw Error(ErrorCode::kNonConvergence, "jump flow leaves the real line");
    return inside(z, atlas.interval(i), x);
  }
  return atlas.solve_flow(i, x, y);
}

double h_tilde_dx(const TransformAtlas& atlas, double x, double y) {
  const auto& s = atlas.sigma();
  if (y == 0.0 || s.identically_zero()) return 1.0;
  if (const auto zi = atlas.zero_index(x)) {
    const auto& phi = atlas.phi_series(*zi);
    const int K = atlas.series_order();
    double term = 1.0, sum = 0.0, last = 1.0;
    for (int k = 0; k <= K; ++k) {
      if (k > 0) term *= y / k;
      last = phi[static_cast<std::size_t>(k)] * term;
      sum += last;
    }
    if (K > 0 && std::abs(last) * std::exp(std::abs(s.lipschitz() * y)) > 1e-8)
      throw Error(ErrorCode::kSeriesDivergence, "Phi series tail too large at y = " + std::to_string(y));
    return sum;
  }
  return s.value(h_tilde(atlas, x, y)) / s.value(x);
}

std::vector<double> phi_coefficients(const SigmaFunction& sigma, double zero, int K) {
  if (K < 0) throw Error(ErrorCode::kInvalidArgument, "K must be nonnegative");
  const auto& zs = sigma.zeros();
  if (!std::binary_search(zs.begin(), zs.end(), zero))
    throw Error(ErrorCode::kInvalidArgument, "phi_coefficients needs a listed zero of sigma");

  // Richardson-extrapolated central differences for sigma'(zero).
  auto central = [&](double h) { return (sigma.value(zero + h) - sigma.value(zero - h)) / (2.0 * h); };
  const std::array<double, 4> steps{1e-2, 1e-3, 1e-4, 1e-5};
  std::array<double, 4> rich{};
  for (std::size_t j = 0; j < steps.size(); ++j) {
    const double h = steps[j] * std::max(1.0, std::abs(zero));
    rich[j] = (4.0 * central(0.5 * h) - central(h)) / 3.0;
  }
  const double slope = sigma.taylor() ? sigma.taylor()(zero, 1)[1] : sigma.derivative1(zero);
  const double scale = std::max(1.0, std::abs(slope));
  for (std::size_t j = 0; j + 1 < rich.size(); ++j)
    if (std::abs(rich[j] - rich[j + 1]) > 1e-6 * scale)
      throw Error(ErrorCode::kIllConditioned, "finite-difference slope estimates disagree at zero " + std::to_string(zero));
  if (std::abs(rich.back() - slope) > 1e-6 * scale)
    throw Error(ErrorCode::kIllConditioned, "supplied derivative disagrees with finite differences at " + std::to_string(zero));

  std::vector<double> phi(static_cast<std::size_t>(K) + 1, 1.0);
  if (!sigma.taylor()) {
    for (int k = 1; k <= K; ++k) phi[static_cast<std::size_t>(k)] = phi[static_cast<std::size_t>(k) - 1] * slope;
    return phi;
  }
  // Truncated power series around the zero: g <- (sigma g)', Phi_k = g_k(zero).
  const std::size_t deg = static_cast<std::size_t>(K) + 1;
  auto s = sigma.taylor()(zero, K + 1);
  s[0] = 0.0;
  std::vector<double> g(deg + 1, 0.0), prod(deg + 1);
  g[0] = 1.0;
  for (int k = 1; k <= K; ++k) {
    std::fill(prod.begin(), prod.end(), 0.0);
    for (std::size_t a = 0; a <= deg; ++a)
      for (std::size_t b = 0; a + b <= deg; ++b) prod[a + b] += s[a] * g[b];
    for (std::size_t j = 0; j < deg; ++j) g[j] = static_cast<double>(j + 1) * prod[j + 1];
    g[deg] = 0.0;
    phi[static_cast<std::size_t>(k)] = g[0];
  }
  return phi;
}

double marcus_map_ode(const SigmaFunction& sigma, double r, double x) {
  if (r == 0.0) return x;
  namespace ode = boost::numeric::odeint;
  using State = double;
  auto stepper = ode::make_controlled(1e-10, 1e-12, ode::runge_kutta_fehlberg78<State>());
  auto rhs = [&](const State& y, State& dy, double) { dy = r * sigma.value(y); };
  double t = 0.0, dt = 0.05, y = x;
  for (int n = 0; n < 1000000 && 1.0 - t > 1e-15; ++n) {
    if (dt < 1e-14) throw Error(ErrorCode::kStepUnderflow, "ODE step underflow");
    double trial = std::min(dt, 1.0 - t);
    const bool clipped = trial < dt;
    const auto result = stepper.try_step(rhs, y, t, trial);
    dt = (clipped && result == ode::success) ? std::max(dt, trial) : trial;
    if (result == ode::success && !std::isfinite(y))
      throw Error(ErrorCode::kStepUnderflow, "ODE solution left the finite range");
  }
  if (1.0 - t > 1e-15) throw Error(ErrorCode::kStepUnderflow, "ODE step budget exhausted");
  return y;
}

}  // namespace mfpe
