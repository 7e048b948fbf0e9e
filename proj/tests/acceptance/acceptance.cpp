// Runs the acceptance criteria and prints one PASS/FAIL line for each.
// Arguments select a subset by number; no arguments runs all eight.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <mfpe/error.hpp>
#include <mfpe/fpe.hpp>
#include <mfpe/sde.hpp>
#include <mfpe/transform.hpp>
#include <mfpe/validate.hpp>

#include "commands.hpp"

using namespace mfpe;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

SdeModel example1_model() {
  return SdeModel(AffineMap{-1.0, 0.0}, TransformAtlas(SigmaFunction::linear(1.0)),
                  LevyTriplet(1.0, 0.0, LevyMeasure::alpha_stable(1.5)));
}

SdeModel example2_model() {
  return SdeModel(AffineMap{-1.0, 0.0}, TransformAtlas(SigmaFunction::linear(1.0)),
                  LevyTriplet(1.0, 0.5, LevyMeasure::compound_poisson(1.0, Density1D::normal(0.0, 0.3))));
}

const GridSpec kExampleGrid{-10.0, 10.0, 800};

DensityGrid point_mass(const GridSpec& g, double x0) {
  DensityGrid p(g);
  p.values[static_cast<std::size_t>(g.cell_of(x0))] = 1.0 / g.dx();
  return p;
}

// Example 1 FP solution, shared by criteria 4 and 7.
const FpeSolution& example1_fp() {
  static const FpeSolution sol = solve(example1_model(), point_mass(kExampleGrid, 1.0), 0.5, {}, QuadratureParams{1e-3, 0.0, 64});
  return sol;
}

// ---- 1 ---------------------------------------------------------------------

Outcome transform_identities() {
  struct Case {
    const char* name;
    SigmaFunction sigma;
    Interval xs, ys;
  };
  const double pi = std::numbers::pi;
  const std::vector<Case> cases = {
      {"x", SigmaFunction::linear(1.0), {-3.0, 3.0}, {-2.0, 2.0}},
      {"2x", SigmaFunction::linear(2.0), {-3.0, 3.0}, {-1.0, 1.0}},
      {"sin x", SigmaFunction::sine(1.0, Interval{-2 * pi, 2 * pi}), {-2 * pi, 2 * pi}, {-2.0, 2.0}},
      {"1+x^2", SigmaFunction::polynomial({1.0, 0.0, 1.0}, {}, Interval{-4.0, 4.0}), {-1.0, 1.0}, {-0.5, 0.5}},
      {"constant", SigmaFunction::constant(0.8), {-3.0, 3.0}, {-2.0, 2.0}},
  };
  double chain = 0.0, oracle = 0.0;
  long confinement = 0;
  std::string worst;
  for (const auto& c : cases) {
    const TransformAtlas atlas(c.sigma);
    RngState rng(1);
    double case_chain = 0.0, case_oracle = 0.0;
    for (int n = 0; n < 10000; ++n) {
      const double x = c.xs.lo + (c.xs.hi - c.xs.lo) * rng.uniform();
      const double y = c.ys.lo + (c.ys.hi - c.ys.lo) * rng.uniform();
      const double z = h_tilde(atlas, x, y);
      const auto hx = h_forward(atlas, x), hz = h_forward(atlas, z);
      if (hx.interval != hz.interval) ++confinement;
      case_chain = std::max(case_chain, std::abs(hz.value - hx.value - y));
      case_oracle = std::max(case_oracle, std::abs(z - marcus_map_ode(c.sigma, y, x)));
    }
    worst += fmt(" %s:%.1e/%.1e", c.name, case_chain, case_oracle);
    chain = std::max(chain, case_chain);
    oracle = std::max(oracle, case_oracle);
  }
  return {chain <= 1e-8 && oracle <= 1e-7 && confinement == 0,
          fmt("max chain %.2e (tol 1e-8), max oracle %.2e (tol 1e-7), confinement violations %ld;", chain, oracle,
              confinement) +
              worst};
}

// ---- 2 ---------------------------------------------------------------------

Outcome phi_series() {
  const auto sigma = SigmaFunction::linear(1.0);
  const auto phi = phi_coefficients(sigma, 0.0, 20);
  double series_err = 0.0, limit_err = 0.0;
  const TransformAtlas exact(sigma), numeric(sigma.without_closed_form());
  for (int i = 0; i <= 40; ++i) {
    const double y = -2.0 + 0.1 * i;
    double sum = 0.0, term = 1.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
      sum += phi[k] * term;
      term *= y / static_cast<double>(k + 1);
    }
    series_err = std::max({series_err, std::abs(sum - std::exp(y)), std::abs(h_tilde_dx(exact, 0.0, y) - std::exp(y))});
    // sigma(H~(x, y)) / sigma(x) from both sides, through the numeric transform.
    for (double x : {1e-3, -1e-3, 1e-5, -1e-5, 1e-7, -1e-7}) {
      const double ratio = numeric.sigma()(h_tilde(numeric, x, y)) / numeric.sigma()(x);
      if (std::abs(x) <= 1e-5) limit_err = std::max(limit_err, std::abs(ratio - sum));
    }
  }
  return {series_err <= 1e-10 && limit_err <= 1e-6,
          fmt("series vs e^y %.2e (tol 1e-10), two-sided limit vs series %.2e (tol 1e-6)", series_err, limit_err)};
}

// ---- 3 ---------------------------------------------------------------------

Outcome gaussian_reduction() {
  const GridSpec g{0.0, 8.0, 1600};
  const SdeModel model(AffineMap{0.0, 0.0}, TransformAtlas(SigmaFunction::linear(1.0)),
                       LevyTriplet(0.0, 1.0, LevyMeasure::null()));
  // ln X(0) ~ Normal(0, 0.01^2), so ln X(t) ~ Normal(0, 0.01^2 + t).
  const auto p0 = DensityGrid::from_density(g, Density1D::lognormal(0.0, 0.01));
  const auto sol = solve(model, p0, 0.5);
  const auto ref = analytic_reference("lognormal", {{"logMean", 0.0}, {"logSd", std::sqrt(1e-4 + 0.5)}}, g);
  const double l1 = compare(sol.snapshots.back(), ref).l1_distance;
  return {l1 < 1e-2, fmt("L1 %.3e (tol 1e-2), %ld steps of dt %.2e", l1, sol.steps, sol.dt)};
}

// ---- 4, 5 ------------------------------------------------------------------

Outcome cross_validate(const SdeModel& model, const FpeSolution& fp, std::uint64_t seed, PathEnsemble* keep = nullptr) {
  SimulationPlan plan;
  plan.x0 = 1.0;
  plan.horizon = 0.5;
  plan.dt = 1e-3;
  plan.epsilon = 1e-3;
  plan.n_paths = 1'000'000;
  plan.save_times = {0.5};
  plan.seed = seed;
  plan.threads = worker_threads();
  auto ens = simulate(model, plan);
  const auto mc = empirical_density(ens, 0, kExampleGrid);
  const double band = mc_stderr_band(mc, plan.n_paths);
  const auto report = judge(compare(mc, fp.snapshots.back()), band, MassAccounting{ens.flagged_fraction(), fp.leak_budget()});
  if (keep) *keep = std::move(ens);
  return {report.pass, fmt("L1 %.4f <= tol %.4f (band %.4f, flagged %.4f, leak %.4f = boundary %.4f + exit %.4f + tail %.4f), KS %.4f",
                           report.l1_distance, report.tolerance, band, report.mass.mc_flagged, report.mass.fpe_leak,
                           fp.leak.boundary, fp.leak.jump_exit, fp.leak.tail, report.ks_statistic)};
}

PathEnsemble example1_paths;

Outcome example1() { return cross_validate(example1_model(), example1_fp(), 2024, &example1_paths); }

Outcome example2() {
  const auto fp = solve(example2_model(), point_mass(kExampleGrid, 1.0), 0.5);
  return cross_validate(example2_model(), fp, 2025);
}

// ---- 6 ---------------------------------------------------------------------

Outcome adjoint() {
  // Quadrature limited to |y| <= 3: beyond that the e^{|y|} dilation of the
  // test functions falls below the cell size and grid sums stop being integrals.
  const auto model = example1_model();
  const auto op = assemble_operator(model, kExampleGrid, QuadratureParams{1e-3, 3.0, 64});
  RngState rng(6);
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    const double c = 0.3 + 1.5 * rng.uniform(), w = 0.35 + 0.4 * rng.uniform();
    const double s = 0.5 + 1.5 * rng.uniform(), m = 2.0 * std::numbers::pi * rng.uniform();
    const double r = 3.0 + 3.0 * rng.uniform();
    auto p = [=](double x) { return std::exp(-(x - c) * (x - c) / (2 * w * w)); };
    auto dp = [=](double x) { return -(x - c) / (w * w) * p(x); };
    auto phi = [=](double x) { return std::sin(s * x + m) * std::exp(-x * x / r); };
    auto dphi = [=](double x) { return (s * std::cos(s * x + m) - 2.0 * x / r * std::sin(s * x + m)) * std::exp(-x * x / r); };
    const auto jp = kernel_apply(op, model.sigma(), p, dp);
    const auto jphi = generator_apply(model.atlas, op.rule, kExampleGrid, phi, dphi);
    double lhs = 0.0, rhs = 0.0;
    for (int j = 0; j < kExampleGrid.n; ++j) {
      const double x = kExampleGrid.center(j);
      lhs += phi(x) * jp[static_cast<std::size_t>(j)];
      rhs += jphi[static_cast<std::size_t>(j)] * p(x);
    }
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
  }
  return {worst <= 1e-6, fmt("worst relative gap %.2e over 20 pairs (tol 1e-6), %zu nodes, ymax 3", worst, op.nodes())};
}

// ---- 7 ---------------------------------------------------------------------

Outcome invariants() {
  double drift_rate = 0.0;
  for (const auto& model : {example1_model(), example2_model()}) {
    const auto p0 = DensityGrid::from_density(kExampleGrid, Density1D::normal(1.0, 0.1));
    const auto sol = solve(model, p0, 0.25);
    const double drift = sol.snapshots.back().mass() + sol.leak.boundary + sol.leak.jump_exit - p0.mass();
    drift_rate = std::max(drift_rate, std::abs(drift) / 0.25);
  }

  // Large negative stable jumps scale x by e^y and can underflow it to 0, which
  // is not a sign change, so crossings are counted as negative states.
  double min_state = INFINITY;
  std::int64_t paths = 0, negative_states = 0;
  auto scan = [&](const std::vector<double>& states) {
    for (double x : states) {
      min_state = std::min(min_state, x);
      if (x < 0.0) ++negative_states;
    }
  };
  if (example1_paths.retained() > 0) {
    scan(example1_paths.states);
    paths += static_cast<std::int64_t>(example1_paths.retained());
  }
  SimulationPlan plan;
  plan.x0 = 1.0;
  plan.horizon = 0.5;
  plan.n_paths = 20000;
  plan.save_times.clear();
  for (int i = 1; i <= 50; ++i) plan.save_times.push_back(0.01 * i);
  plan.seed = 77;
  plan.threads = worker_threads();
  const auto ens = simulate(example1_model(), plan);
  scan(ens.states);
  paths += static_cast<std::int64_t>(ens.retained());

  const auto& fp = example1_fp();
  double negative = 0.0;
  const auto& p = fp.snapshots.back();
  for (int j = 0; j < p.grid.n; ++j)
    if (p.grid.center(j) < 0.0) negative += std::max(0.0, p.values[static_cast<std::size_t>(j)]) * p.dx();

  return {drift_rate <= 1e-6 && negative_states == 0 && negative <= fp.leak_budget(),
          fmt("mass drift %.2e/unit time (tol 1e-6); %lld negative MC states over %lld paths (min %.3e); "
              "FP mass on x<0 %.2e <= leak %.4f",
              drift_rate, static_cast<long long>(negative_states), static_cast<long long>(paths), min_state, negative,
              fp.leak_budget())};
}

// ---- 8 ---------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "mfpe_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string config = R"({
  "model": {
    "drift": {"kind": "affine", "slope": -1},
    "sigma": {"name": "linear"},
    "b": 1,
    "A": 0.5,
    "nu": {"kind": "sum", "parts": [{"kind": "alphaStable", "alpha": 1.5},
                                     {"kind": "compoundPoisson", "rate": 1, "jump": {"kind": "normal", "sd": 0.3}}]}
  },
  "initial": {"kind": "point", "x0": 1},
  "time": {"horizon": 0.2, "saveTimes": [0.1, 0.2]},
  "simulation": {"nPaths": 2000, "seed": 9, "epsilon": 0.01, "threads": 2},
  "grid": {"xmin": -10, "xmax": 10, "n": 400},
  "solver": {"delta": 0.01},
  "compare": {"a": {"kind": "mc"}, "b": {"kind": "fpe"}},
  "transformCheck": {"samples": 2000, "xRange": [-1, 1], "yRange": [-1, 1]}
})";
  std::ofstream(root / "run.json") << config;
  std::vector<std::string> differing;
  std::string codes;
  for (const char* command : {"simulate", "solve", "compare", "transform-check"}) {
    std::map<std::string, std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
      cli::CommandOptions opt;
      opt.config_paths = {(root / "run.json").string()};
      opt.out_dir = (root / ("rep" + std::to_string(rep))).string();
      std::ostringstream log, err;
      const int code = cli::run_command(command, opt, log, err);
      if (rep == 0) codes += fmt(" %s=%d", command, code);
      auto files = snapshot(opt.out_dir);
      if (rep == 0) {
        first = std::move(files);
      } else if (files != first || first.empty()) {
        differing.push_back(command);
      }
    }
  }
  fs::remove_all(root);
  std::string detail = "exit codes" + codes + "; ";
  detail += differing.empty() ? "all outputs byte-identical across two runs" : "differences in:";
  for (const auto& d : differing) detail += " " + d;
  return {differing.empty(), detail};
}

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "transform identity suite", 10.0, transform_identities},
      {2, "Phi_k series branch", 1.0, phi_series},
      {3, "Gaussian reduction", 60.0, gaussian_reduction},
      {4, "Example 1 cross-validation", 600.0, example1},
      {5, "Example 2 cross-validation", 600.0, example2},
      {6, "adjoint consistency", 30.0, adjoint},
      {7, "mass and sign invariants", 60.0, invariants},
      {8, "determinism", 1e9, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("[%s] %d. %s (%.1f s%s): %s\n", pass ? "PASS" : "FAIL", c.number, c.name, secs,
                in_time ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
