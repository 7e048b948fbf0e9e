#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <mfpe/error.hpp>
#include <mfpe/rng.hpp>
#include <mfpe/transform.hpp>

using namespace mfpe;
using std::numbers::pi;

namespace {

// Classical RK4 for dy/dr = sigma(y), y(0) = x, integrated to r.
double rk4_flow(const SigmaFunction& s, double x, double r, int steps = 20000) {
  const double h = r / steps;
  double y = x;
  for (int i = 0; i < steps; ++i) {
    const double k1 = s(y), k2 = s(y + 0.5 * h * k1), k3 = s(y + 0.5 * h * k2), k4 = s(y + h * k3);
    y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
  }
  return y;
}

SigmaFunction one_plus_x2() { return SigmaFunction::polynomial({1.0, 0.0, 1.0}, {}, Interval{-4.0, 4.0}); }

struct Case {
  const char* name;
  SigmaFunction sigma;
  Interval xs, ys;
};

std::vector<Case> cases() {
  return {
      {"x", SigmaFunction::linear(1.0), {-2.0, 2.0}, {-1.0, 1.0}},
      {"2x", SigmaFunction::linear(2.0), {-2.0, 2.0}, {-1.0, 1.0}},
      {"sin", SigmaFunction::sine(1.0, Interval{-pi, pi}), {-pi, pi}, {-2.0, 2.0}},
      {"1+x^2", one_plus_x2(), {-1.0, 1.0}, {-0.5, 0.5}},
      {"const", SigmaFunction::constant(0.7), {-2.0, 2.0}, {-1.0, 1.0}},
  };
}

}  // namespace

TEST(SigmaFunction, ZerosAreExactAndBoundHolds) {
  const auto s = SigmaFunction::sine(1.0, Interval{-4.0, 7.0});
  for (double z : s.zeros())
    if (s.domain().contains(z)) EXPECT_EQ(s(z), 0.0) << z;
  EXPECT_FALSE(s.check(Interval{-4.0, 7.0}).has_value());
  EXPECT_FALSE(SigmaFunction::linear(2.0, 1.0).check(Interval{-5.0, 5.0}).has_value());
  EXPECT_FALSE(one_plus_x2().check(Interval{-4.0, 4.0}).has_value());
}

TEST(SigmaFunction, PolynomialZerosAreChecked) {
  EXPECT_THROW(SigmaFunction::polynomial({-1.0, 0.0, 1.0}, {1.0}, Interval{-3, 3}), Error);  // -1 missing
  EXPECT_NO_THROW(SigmaFunction::polynomial({-1.0, 0.0, 1.0}, {-1.0, 1.0}, Interval{-3, 3}));
  EXPECT_THROW(SigmaFunction::polynomial({1.0, 1.0}, {0.5}, Interval{-3, 3}), Error);  // not a zero
}

TEST(TransformAtlas, AnchorsMapToZeroAndPhiStartsAtOne) {
  const TransformAtlas atlas(SigmaFunction::sine(1.0, Interval{-4.0, 4.0}));
  for (int i = 0; i < atlas.interval_count(); ++i) {
    const double a = atlas.anchor(i);
    if (!atlas.sigma().domain().contains(a)) continue;
    EXPECT_NEAR(h_forward(atlas, a).value, 0.0, 1e-14);
  }
  for (std::size_t z = 0; z < atlas.sigma().zeros().size(); ++z)
    EXPECT_EQ(atlas.phi_series(static_cast<int>(z)).front(), 1.0);
}

TEST(HForward, LogTransformForLinearSigma) {
  const TransformAtlas atlas(SigmaFunction::linear(1.0), {-1.0, 1.0});
  const auto v = h_forward(atlas, std::numbers::e);
  EXPECT_EQ(atlas.interval(v.interval).lo, 0.0);
  EXPECT_TRUE(std::isinf(atlas.interval(v.interval).hi));
  EXPECT_NEAR(v.value, 1.0, 1e-14);
}

TEST(HForward, ConstantSigma) {
  const TransformAtlas atlas(SigmaFunction::constant(2.5));
  EXPECT_NEAR(h_forward(atlas, 2.5).value, 1.0, 1e-15);
}

TEST(HForward, OnePlusXSquaredIsArctan) {
  const TransformAtlas atlas(one_plus_x2());
  EXPECT_NEAR(h_forward(atlas, 1.0).value, pi / 4, 1e-10);
  const TransformAtlas numeric(one_plus_x2().without_closed_form());
  EXPECT_NEAR(h_forward(numeric, 1.0).value, pi / 4, 1e-10);
}

TEST(HForward, StrictlyMonotoneAndUnboundedNearZeros) {
  const TransformAtlas atlas(SigmaFunction::sine(1.0, Interval{-1.0, 4.0}).without_closed_form());
  const int i = atlas.locate(1.0);
  double prev = -INFINITY;
  for (int k = 1; k < 400; ++k) {
    const double x = pi * k / 400.0;
    const double h = h_forward(atlas, x).value;
    ASSERT_GT(h, prev) << x;
    prev = h;
  }
  // |sin t| <= |t| gives |H(x) - H(a)| >= ln(a / x) near the zero at 0.
  const double a = atlas.anchor(i);
  for (double x : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double gap = h_forward(atlas, a).value - h_forward(atlas, x).value;
    EXPECT_GE(gap, std::log(a / x) - 1e-9) << x;
  }
}

TEST(HInverse, ExponentialForLinearSigma) {
  const TransformAtlas atlas(SigmaFunction::linear(1.0), {-1.0, 1.0});
  const int i = atlas.locate(1.0);
  EXPECT_NEAR(h_inverse(atlas, i, 1.0), std::numbers::e, 1e-14);
  EXPECT_EQ(h_inverse(atlas, i, 0.0), atlas.anchor(i));
}

TEST(HInverse, OnePlusXSquaredIsTan) {
  for (const auto& s : {one_plus_x2(), one_plus_x2().without_closed_form()}) {
    const TransformAtlas atlas(s);
    EXPECT_NEAR(h_inverse(atlas, 0, pi / 4), 1.0, 1e-9);
    EXPECT_EQ(h_inverse(atlas, 0, 0.0), atlas.anchor(0));
  }
}

TEST(HTilde, LinearSigmaIsDilation) {
  for (const auto& s : {SigmaFunction::linear(1.0), SigmaFunction::linear(1.0).without_closed_form()}) {
    const TransformAtlas atlas(s);
    for (double x : {-3.0, -0.5, 0.0, 0.25, 2.0})
      for (double y : {-1.5, -0.1, 0.0, 0.7, 2.0})
        EXPECT_NEAR(h_tilde(atlas, x, y), x * std::exp(y), 1e-12 * std::max(1.0, std::abs(x * std::exp(y))));
  }
}

TEST(HTilde, ZeroDisplacementIsIdentity) {
  for (const auto& c : cases()) {
    const TransformAtlas atlas(c.sigma);
    for (double x : {-0.9, 0.0, 0.3, 1.0}) EXPECT_EQ(h_tilde(atlas, x, 0.0), x) << c.name;
  }
}

TEST(HTilde, SineMatchesRungeKutta) {
  const auto s = SigmaFunction::sine(1.0, Interval{-1.0, 4.0});
  const TransformAtlas atlas(s);
  const double z = h_tilde(atlas, pi / 2, 0.3);
  EXPECT_GT(z, 0.0);
  EXPECT_LT(z, pi);
  EXPECT_NEAR(z, rk4_flow(s, pi / 2, 0.3), 1e-8);
  const TransformAtlas numeric(s.without_closed_form());
  EXPECT_NEAR(h_tilde(numeric, pi / 2, 0.3), z, 1e-10);
}

TEST(HTildeDx, LinearSigma) {
  const TransformAtlas atlas(SigmaFunction::linear(1.0));
  for (double x : {-2.0, 0.5, 3.0}) EXPECT_NEAR(h_tilde_dx(atlas, x, 0.4), std::exp(0.4), 1e-12);
  for (double y : {-2.0, -0.3, 0.0, 1.0, 2.0}) EXPECT_NEAR(h_tilde_dx(atlas, 0.0, y), std::exp(y), 1e-10);
}

TEST(HTildeDx, ZeroDisplacementGivesOne) {
  for (const auto& c : cases()) {
    const TransformAtlas atlas(c.sigma);
    for (double x : {-0.9, 0.0, 0.3, 1.0}) EXPECT_NEAR(h_tilde_dx(atlas, x, 0.0), 1.0, 1e-14) << c.name;
  }
}

TEST(HTildeDx, SeriesAgreesWithNeighbours) {
  // At the zero of sin, the series value must be the limit of the off-zero formula.
  const TransformAtlas atlas(SigmaFunction::sine(1.0, Interval{-1.0, 1.0}));
  for (double y : {-1.0, 0.5, 1.5}) {
    const double at_zero = h_tilde_dx(atlas, 0.0, y);
    EXPECT_NEAR(h_tilde_dx(atlas, 1e-6, y), at_zero, 1e-6);
    EXPECT_NEAR(h_tilde_dx(atlas, -1e-6, y), at_zero, 1e-6);
    EXPECT_NEAR(at_zero, std::exp(y), 1e-10);  // sin'(0) = 1
  }
}

TEST(PhiCoefficients, HandComputedValues) {
  const auto ones = phi_coefficients(SigmaFunction::linear(1.0), 0.0, 10);
  ASSERT_EQ(ones.size(), 11u);
  for (double v : ones) EXPECT_NEAR(v, 1.0, 1e-12);
  const auto twos = phi_coefficients(SigmaFunction::linear(2.0), 0.0, 10);
  for (int k = 0; k <= 10; ++k) EXPECT_NEAR(twos[k], std::pow(2.0, k), 1e-9 * std::pow(2.0, k));
  EXPECT_EQ(phi_coefficients(SigmaFunction::sine(1.0, Interval{-1, 1}), 0.0, 0), std::vector<double>{1.0});
}

TEST(MarcusMapOde, ClosedFormFlows) {
  EXPECT_NEAR(marcus_map_ode(SigmaFunction::constant(1.5), 0.4, 2.0), 2.0 + 1.5 * 0.4, 1e-12);
  EXPECT_NEAR(marcus_map_ode(SigmaFunction::linear(1.0), 0.7, 2.0), 2.0 * std::exp(0.7), 1e-10);
  EXPECT_EQ(marcus_map_ode(SigmaFunction::linear(1.0), 0.0, 2.0), 2.0);
}

TEST(TransformInvariants, ChainOracleGroupConfinement) {
  for (const auto& c : cases()) {
    for (bool numeric : {false, true}) {
      const TransformAtlas atlas(numeric ? c.sigma.without_closed_form() : c.sigma);
      RngState rng(2024);
      for (int n = 0; n < 400; ++n) {
        const double x = c.xs.lo + (c.xs.hi - c.xs.lo) * rng.uniform();
        const double y = c.ys.lo + (c.ys.hi - c.ys.lo) * rng.uniform();
        const double y1 = y * rng.uniform();
        const double z = h_tilde(atlas, x, y);
        const auto hx = h_forward(atlas, x), hz = h_forward(atlas, z);
        ASSERT_EQ(hz.interval, hx.interval) << c.name << " x=" << x << " y=" << y;
        EXPECT_NEAR(hz.value - hx.value, y, 1e-8) << c.name;
        EXPECT_NEAR(z, marcus_map_ode(atlas.sigma(), y, x), 1e-7) << c.name;
        EXPECT_NEAR(h_tilde(atlas, h_tilde(atlas, x, y1), y - y1), z, 1e-8) << c.name;
      }
    }
  }
}

TEST(TransformInvariants, BoundaryLimitsAtZeros) {
  const TransformAtlas atlas(SigmaFunction::sine(1.0, Interval{-1.0, 4.0}));
  for (double zero : {0.0, pi}) {
    for (double side : {-1.0, 1.0}) {
      double prev = INFINITY;
      for (double d : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8}) {
        const double gap = std::abs(h_tilde(atlas, zero + side * d, 0.8) - zero);
        EXPECT_LT(gap, prev);
        prev = gap;
      }
      EXPECT_LT(prev, 1e-7);
    }
  }
}

TEST(TransformErrors, OutsideTheWindow) {
  const TransformAtlas atlas(SigmaFunction::sine(1.0, Interval{-1.0, 1.0}));
  EXPECT_THROW(h_forward(atlas, 2.0), Error);
  EXPECT_THROW(h_forward(atlas, 0.0), Error);  // a zero has no H value
}
