#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mfpe/grid.hpp"
#include "mfpe/levy.hpp"
#include "mfpe/transform.hpp"

namespace mfpe {

/// dX = f(X) dt + sigma(X) <> dL(t), with L generated by `triplet`.
/// The atlas carries sigma, so model and transform cannot disagree.
struct SdeModel {
  std::function<double(double)> drift;
  TransformAtlas atlas;
  LevyTriplet triplet;
  /// Set when the drift is affine; lets the simulator skip the function call.
  std::optional<AffineMap> affine_drift;

  SdeModel(std::function<double(double)> f, TransformAtlas atlas_, LevyTriplet triplet_);
  SdeModel(AffineMap f, TransformAtlas atlas_, LevyTriplet triplet_);

  const SigmaFunction& sigma() const noexcept { return atlas.sigma(); }
};

struct SimulationPlan {
  double x0 = 0.0;
  /// Overrides x0 when set.
  std::optional<Density1D> initial;
  double horizon = 1.0;
  double dt = 1e-3;
  double epsilon = 1e-3;
  std::int64_t n_paths = 1000;
  std::vector<double> save_times{1.0};
  std::uint64_t seed = 1;
  double blowup_guard = 1e12;
  int threads = 1;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// Retained paths only; flagged (blown-up) paths are counted, not stored.
struct PathEnsemble {
  std::vector<double> times;
  std::vector<std::uint64_t> path_ids;
  /// Row-major, path_ids.size() x times.size().
  std::vector<double> states;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  std::int64_t requested = 0;
  std::int64_t flagged = 0;

  std::size_t retained() const noexcept { return path_ids.size(); }
  double state(std::size_t path, std::size_t time_index) const { return states[path * times.size() + time_index]; }
  double flagged_fraction() const noexcept {
    return requested > 0 ? static_cast<double>(flagged) / static_cast<double>(requested) : 0.0;
  }
};

/// Drift used between jumps: f + (b + c_eps) sigma + (A/2) sigma sigma'.
double continuous_drift(const SdeModel& model, double epsilon, double x);

/// Jump-adapted Euler-Maruyama with exact Marcus jumps. Each path uses the
/// stream RngState(seed).split(path id), so the result does not depend on `threads`.
PathEnsemble simulate(const SdeModel& model, const SimulationPlan& plan);

/// X(t) after a jump of size `jump` from X(t-) = x_left.
double marcus_jump_apply(const SdeModel& model, double x_left, double jump);

/// Histogram of the states at `time_index`, normalized by the requested path
/// count so flagged paths and paths outside the grid count as lost mass.
/// With `smooth`, the histogram is convolved with a Gaussian kernel of
/// Silverman bandwidth.
DensityGrid empirical_density(const PathEnsemble& ensemble, int time_index, const GridSpec& grid, bool smooth = false);

}  // namespace mfpe
