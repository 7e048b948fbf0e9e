#pragma once

#include <functional>
#include <vector>

#include "mfpe/grid.hpp"
#include "mfpe/sde.hpp"

namespace mfpe {

struct QuadratureParams {
  double delta = 1e-3;
  /// <= 0 picks the smallest ymax with nu(|y| > ymax) <= 1e-6 nu(|y| > delta).
  double ymax = 0.0;
  /// Nodes per sign of y.
  int n_quad = 64;
};

enum class JumpScheme {
  /// Moves cumulative mass between pulled-back cell edges; exactly conservative.
  kConservative,
  /// Jacobian times p interpolated at pulled-back cell centres.
  kPointwise,
};

/// Where a pulled-back point fell, as segment index plus fraction s in [0, 1).
/// Edge pullbacks: cell -1 is below the grid, n above it. Centre pullbacks:
/// segment c runs from centre c to centre c + 1 (with zero-valued ghost
/// centres -1 and n), and kOutside marks points beyond both ghosts.
struct GridLocation {
  static constexpr int kOutside = -2;
  int cell = 0;
  double s = 0.0;
};

struct FpeOperatorData {
  GridSpec grid;
  JumpScheme scheme = JumpScheme::kConservative;
  QuadratureParams quad;
  QuadratureRule rule;

  // Per cell centre.
  std::vector<double> drift_coef;   // f + b sigma + (A/2) sigma sigma'
  std::vector<double> diff_coef;    // (A/2) sigma^2
  std::vector<double> compensator;  // sigma, carrying the y 1{|y|<1} term

  // Per cell edge.
  std::vector<double> sigma_edge;
  std::vector<double> velocity;  // f + (b - c1) sigma, the upwinded velocity

  /// (A/2 + c2) in (A/2 + c2) d/dx(sigma d/dx(sigma p)).
  double diffusivity = 0.0;
  /// Sum of w_k y_k over delta <= |y_k| < 1.
  double c1 = 0.0;
  /// Half the nu-second moment of |y| < delta.
  double c2 = 0.0;
  /// nu(|y| > ymax); charged to the leak budget per unit time and mass.
  double tail_rate = 0.0;

  /// Row-major [k][j]: H~(x_j, -y_k) and dH~/dx(x_j, -y_k) at cell centres.
  std::vector<double> pullback;
  std::vector<double> jacobian;
  /// Row-major [k][i] over the n + 1 edges: location of H~(e_i, -y_k) for the
  /// conservative scheme, or of the centre pullback for the pointwise one.
  std::vector<GridLocation> edge_pullback;
  std::vector<GridLocation> centre_pullback;

  std::size_t nodes() const noexcept { return rule.size(); }
  double total_rate() const { return rule.total_weight(); }
};

/// Mass bookkeeping for one step or a whole run.
struct LeakAccount {
  double boundary = 0.0;  // flux through the grid ends
  double jump_exit = 0.0; // jumps that land outside the grid
  double tail = 0.0;      // jumps larger than ymax, not modelled

  double total() const noexcept { return boundary + jump_exit + tail; }
  LeakAccount& operator+=(const LeakAccount& o) noexcept {
    boundary += o.boundary;
    jump_exit += o.jump_exit;
    tail += o.tail;
    return *this;
  }
};

/// Builds every table the stepper needs. Zeros of sigma inside the grid must
/// sit on cell edges (within 1e-12); throws GridTooCoarse when the smallest
/// jump moves a point further than 10 cells.
FpeOperatorData assemble_operator(const SdeModel& model, const GridSpec& grid, const QuadratureParams& quad = {},
                                  JumpScheme scheme = JumpScheme::kConservative);

/// 0.8 min(dx / max|velocity|, 1 / total rate); +inf when neither bounds it.
double stability_limit(const FpeOperatorData& op);

/// Time derivative of p with every term explicit, for checks.
std::vector<double> apply_operator(const FpeOperatorData& op, const std::vector<double>& p);

/// The jump part alone, Sum_k w_k (R_k p - p), on grid values.
std::vector<double> apply_jump(const FpeOperatorData& op, const std::vector<double>& p);

/// One IMEX step: upwind transport and jumps explicit, diffusion implicit.
/// Throws Instability when the sup norm more than doubles.
DensityGrid step(const FpeOperatorData& op, const DensityGrid& p, double dt, LeakAccount* leak = nullptr);

struct StepControl {
  /// Snapshot times in (0, horizon]; empty means just the horizon.
  std::vector<double> save_times;
  /// Upper bound on the step; <= 0 means horizon / 1000.
  double max_dt = 0.0;
};

struct FpeSolution {
  std::vector<DensityGrid> snapshots;
  LeakAccount leak;
  double max_negativity = 0.0;
  double dt = 0.0;
  long steps = 0;

  double leak_budget() const noexcept { return leak.total(); }
};

FpeSolution solve(const FpeOperatorData& op, const DensityGrid& p0, double horizon, const StepControl& ctl = {});
FpeSolution solve(const SdeModel& model, const DensityGrid& p0, double horizon, const StepControl& ctl = {},
                  const QuadratureParams& quad = {}, JumpScheme scheme = JumpScheme::kConservative);

using ScalarFn = std::function<double(double)>;

/// Sum_k w_k [jac p(pullback) - p(x) + y_k 1{|y_k|<1} (sigma p)'(x)] at the
/// cell centres, from the kernel table and an exact p.
std::vector<double> kernel_apply(const FpeOperatorData& op, const SigmaFunction& sigma, const ScalarFn& p,
                                 const ScalarFn& dp);

/// Sum_k w_k [phi(H~(x, y_k)) - phi(x) - phi'(x) sigma(x) y_k 1{|y_k|<1}] at
/// the cell centres, evaluating H~ forward rather than from the kernel table.
std::vector<double> generator_apply(const TransformAtlas& atlas, const QuadratureRule& rule, const GridSpec& grid,
                                    const ScalarFn& phi, const ScalarFn& dphi);

}  // namespace mfpe
