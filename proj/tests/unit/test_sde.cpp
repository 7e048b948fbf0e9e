#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <mfpe/error.hpp>
#include <mfpe/sde.hpp>
#include <mfpe/validate.hpp>

using namespace mfpe;

namespace {

SdeModel make(AffineMap f, SigmaFunction s, LevyTriplet t) { return SdeModel(f, TransformAtlas(std::move(s)), std::move(t)); }

SimulationPlan plan_for(double x0, double horizon, double dt, std::int64_t n, std::vector<double> times,
                        std::uint64_t seed = 1) {
  SimulationPlan p;
  p.x0 = x0;
  p.horizon = horizon;
  p.dt = dt;
  p.n_paths = n;
  p.save_times = std::move(times);
  p.seed = seed;
  return p;
}

std::pair<double, double> moments(const PathEnsemble& e, std::size_t t, double (*g)(double)) {
  double s = 0.0, ss = 0.0;
  for (std::size_t p = 0; p < e.retained(); ++p) {
    const double v = g(e.state(p, t));
    s += v;
    ss += v * v;
  }
  const double n = static_cast<double>(e.retained());
  const double mean = s / n;
  return {mean, (ss - n * mean * mean) / (n - 1.0)};
}

double identity(double x) { return x; }
double log_of(double x) { return std::log(x); }

}  // namespace

TEST(Simulate, NoDynamicsStaysPut) {
  const auto model = make({0.0, 0.0}, SigmaFunction::constant(0.0),
                          LevyTriplet(0.7, 2.0, LevyMeasure::alpha_stable(1.5)));
  const auto ens = simulate(model, plan_for(0.3, 1.0, 1e-2, 50, {0.25, 1.0}));
  ASSERT_EQ(ens.retained(), 50u);
  for (double x : ens.states) EXPECT_EQ(x, 0.3);
}

TEST(Simulate, BrownianMotionLaw) {
  // Euler is exact for additive noise, so a coarse dt costs nothing.
  const auto model = make({0.0, 0.0}, SigmaFunction::constant(1.0), LevyTriplet(0.0, 1.0, LevyMeasure::null()));
  const std::int64_t n = 1'000'000;
  const auto ens = simulate(model, plan_for(0.0, 1.0, 0.1, n, {1.0}));
  const auto [mean, var] = moments(ens, 0, identity);
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var, 1.0, 0.02);

  const GridSpec grid{-6.0, 6.0, 400};
  const auto hist = empirical_density(ens, 0, grid);
  const auto ref = analytic_reference("gaussian", {{"mean", 0.0}, {"sd", 1.0}}, grid);
  EXPECT_LT(compare(hist, ref).l1_distance, 0.02);
}

TEST(Simulate, StratonovichLognormal) {
  // Marcus = Stratonovich for continuous noise: X(t) = exp(B(t)).
  const auto model = make({0.0, 0.0}, SigmaFunction::linear(1.0), LevyTriplet(0.0, 1.0, LevyMeasure::null()));
  const std::int64_t n = 1'000'000;
  const auto ens = simulate(model, plan_for(1.0, 1.0, 1e-2, n, {1.0}));
  const auto [mean, var] = moments(ens, 0, log_of);
  EXPECT_LT(std::abs(mean), 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);

  const GridSpec grid{0.0, 8.0, 400};
  const auto hist = empirical_density(ens, 0, grid);
  const auto ref = analytic_reference("lognormal", {{"logMean", 0.0}, {"logSd", 1.0}}, grid);
  EXPECT_LT(compare(hist, ref).l1_distance, 0.03);
}

TEST(Simulate, PathsStartedPositiveStayPositive) {
  const auto model = make({-1.0, 0.0}, SigmaFunction::linear(1.0), LevyTriplet(1.0, 0.0, LevyMeasure::alpha_stable(1.5)));
  const auto ens = simulate(model, plan_for(1.0, 0.5, 1e-3, 5000, {0.1, 0.25, 0.5}));
  EXPECT_GT(*std::min_element(ens.states.begin(), ens.states.end()), 0.0);
  const auto generic = SdeModel([](double x) { return -x; }, TransformAtlas(SigmaFunction::linear(1.0).without_closed_form()),
                                LevyTriplet(1.0, 0.5, LevyMeasure::alpha_stable(1.5)));
  auto plan = plan_for(1.0, 0.5, 1e-3, 500, {0.1, 0.25, 0.5});
  plan.epsilon = 0.05;  // the numeric transform is slow per jump
  const auto ens2 = simulate(generic, plan);
  EXPECT_GT(*std::min_element(ens2.states.begin(), ens2.states.end()), 0.0);
}

TEST(Simulate, LogOfPathIsSumOfJumps) {
  for (const auto& nu : {LevyMeasure::alpha_stable(1.5), LevyMeasure::compound_poisson(3.0, Density1D::normal(0.0, 0.5))}) {
    const auto model = make({0.0, 0.0}, SigmaFunction::linear(1.0), LevyTriplet(0.0, 0.0, nu));
    auto plan = plan_for(1.0, 0.5, 1e-3, 200, {0.2, 0.5}, 99);
    plan.blowup_guard = 1e300;
    const auto ens = simulate(model, plan);
    for (std::size_t p = 0; p < ens.retained(); ++p) {
      RngState rng = RngState(plan.seed).split(ens.path_ids[p]).split(0);
      const auto jumps = sample_jumps(nu, plan.horizon, plan.epsilon, rng);
      for (std::size_t t = 0; t < ens.times.size(); ++t) {
        double sum = 0.0;
        for (const auto& j : jumps)
          if (j.time <= ens.times[t]) sum += j.size;
        ASSERT_NEAR(std::log(ens.state(p, t)), sum, 1e-8) << "path " << p;
      }
    }
  }
}

TEST(Simulate, HalvingDtMovesTheMeanLessThanItsStandardError) {
  const auto model = make({-1.0, 0.0}, SigmaFunction::linear(1.0),
                          LevyTriplet(0.0, 0.5, LevyMeasure::compound_poisson(1.0, Density1D::normal(0.0, 0.3))));
  const std::int64_t n = 100'000;
  const auto coarse = simulate(model, plan_for(1.0, 0.5, 1e-2, n, {0.5}, 5));
  const auto fine = simulate(model, plan_for(1.0, 0.5, 5e-3, n, {0.5}, 5));
  const auto [m1, v1] = moments(coarse, 0, identity);
  const auto [m2, v2] = moments(fine, 0, identity);
  EXPECT_LT(std::abs(m1 - m2), std::sqrt(v2 / static_cast<double>(n)));
}

TEST(Simulate, DeterministicAndThreadIndependent) {
  const auto model = make({-1.0, 0.0}, SigmaFunction::linear(1.0), LevyTriplet(1.0, 0.0, LevyMeasure::alpha_stable(1.5)));
  auto plan = plan_for(1.0, 0.5, 1e-3, 300, {0.25, 0.5}, 17);
  const auto a = simulate(model, plan);
  const auto b = simulate(model, plan);
  plan.threads = 3;
  const auto c = simulate(model, plan);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.states, c.states);
  EXPECT_EQ(a.path_ids, c.path_ids);
}

TEST(Simulate, RandomInitialLaw) {
  const auto model = make({0.0, 0.0}, SigmaFunction::constant(0.0), LevyTriplet());
  auto plan = plan_for(0.0, 1.0, 0.5, 20000, {0.0, 1.0});
  plan.initial = Density1D::normal(2.0, 0.5);
  const auto ens = simulate(model, plan);
  const auto [mean, var] = moments(ens, 1, identity);
  EXPECT_NEAR(mean, 2.0, 0.02);
  EXPECT_NEAR(var, 0.25, 0.01);
}

TEST(Simulate, RejectsBadPlans) {
  const auto model = make({0.0, 0.0}, SigmaFunction::constant(1.0), LevyTriplet());
  EXPECT_THROW(simulate(model, plan_for(0.0, 1.0, 0.1, 0, {1.0})), Error);
  EXPECT_THROW(simulate(model, plan_for(0.0, 1.0, 0.1, 10, {0.5, 0.2})), Error);
  EXPECT_THROW(simulate(model, plan_for(0.0, 1.0, 0.1, 10, {2.0})), Error);
}

TEST(MarcusJumpApply, LinearSigma) {
  const auto model = make({0.0, 0.0}, SigmaFunction::linear(1.0), LevyTriplet());
  EXPECT_EQ(marcus_jump_apply(model, 0.0, 1.7), 0.0);
  EXPECT_NEAR(marcus_jump_apply(model, 2.0, std::log(3.0)), 6.0, 1e-14);
  EXPECT_EQ(marcus_jump_apply(model, 2.5, 0.0), 2.5);
}

TEST(EmpiricalDensity, PointMassFillsOneBin) {
  const auto model = make({0.0, 0.0}, SigmaFunction::constant(0.0), LevyTriplet());
  const auto ens = simulate(model, plan_for(0.3, 1.0, 0.1, 100, {1.0}));
  const GridSpec grid{-1.0, 1.0, 20};
  const auto d = empirical_density(ens, 0, grid);
  const int j = grid.cell_of(0.3);
  EXPECT_NEAR(d.values[j] * grid.dx(), 1.0, 1e-12);
  EXPECT_NEAR(d.mass(), 1.0, 1e-12);
}

TEST(EmpiricalDensity, EmptyEnsembleIsAnError) {
  PathEnsemble e;
  EXPECT_THROW(empirical_density(e, 0, GridSpec{0, 1, 10}), Error);
}
