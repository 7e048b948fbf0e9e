#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "mfpe/rng.hpp"

namespace mfpe {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  bool bounded() const noexcept { return std::isfinite(lo) && std::isfinite(hi); }
};

/// A probability density on the real line: evaluation, sampling, support.
///
/// Densities without a sampler are sampled by rejection from a uniform
/// envelope, which requires bounded support.
class Density1D {
 public:
  using Pdf = std::function<double(double)>;
  using Cdf = std::function<double(double)>;
  using Sampler = std::function<double(RngState&)>;

  Density1D(std::string name, Pdf pdf, Interval support, Sampler sampler = {}, Cdf cdf = {});

  static Density1D normal(double mean, double sd);
  static Density1D uniform(double lo, double hi);
  /// Law of exp(Y) with Y ~ Normal(log_mean, log_sd^2).
  static Density1D lognormal(double log_mean, double log_sd);

  const std::string& name() const noexcept { return name_; }
  const Interval& support() const noexcept { return support_; }
  bool has_sampler() const noexcept { return static_cast<bool>(sampler_); }
  bool has_cdf() const noexcept { return static_cast<bool>(cdf_); }

  /// Density value; 0 outside the support.
  double evaluate(double x) const;
  double cdf(double x) const;
  /// Probability of (a, b].
  double mass(double a, double b) const;
  double sample(RngState& rng) const;

  /// Numerical integral of the density over its support.
  double total_mass() const;

 private:
  std::string name_;
  Pdf pdf_;
  Interval support_;
  Sampler sampler_;
  Cdf cdf_;
  double envelope_ = 0.0;  // rejection bound when no sampler is given
};

/// nu(dy) = scale * dy / |y|^(1+alpha), symmetric.
struct AlphaStable {
  double alpha = 1.5;
  double scale = 1.0;
};

/// nu(dy) = rate * mu(dy) for a probability density mu.
struct CompoundPoisson {
  double rate = 1.0;
  Density1D jump;
};

struct NullMeasure {};

class LevyMeasure;

struct SumMeasure {
  std::vector<LevyMeasure> parts;
};

/// Lévy jump measure: a tagged union of the supported kinds.
class LevyMeasure {
 public:
  using Kind = std::variant<NullMeasure, AlphaStable, CompoundPoisson, SumMeasure>;

  LevyMeasure() = default;

  static LevyMeasure null() { return LevyMeasure(); }
  static LevyMeasure alpha_stable(double alpha, double scale = 1.0);
  static LevyMeasure compound_poisson(double rate, Density1D jump);
  static LevyMeasure sum(std::vector<LevyMeasure> parts);

  const Kind& kind() const noexcept { return kind_; }
  bool is_null() const noexcept;
  bool is_symmetric() const;

  /// Lévy density at y != 0.
  double density(double y) const;
  /// nu({|y| > eps}).
  double tail_mass(double eps) const;

 private:
  explicit LevyMeasure(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_{NullMeasure{}};
};

struct LevyTriplet {
  double b = 0.0;
  double A = 0.0;
  LevyMeasure nu;

  LevyTriplet() = default;
  LevyTriplet(double b_, double A_, LevyMeasure nu_);
};

struct JumpEvent {
  double time = 0.0;
  double size = 0.0;
};

/// Jump times and sizes as parallel arrays.
struct JumpBuffer {
  std::vector<double> times;
  std::vector<double> sizes;

  std::size_t size() const noexcept { return times.size(); }
  void clear() noexcept {
    times.clear();
    sizes.clear();
  }
};

/// Nodes and weights for sum_k w_k g(y_k) ~ integral of g over delta <= |y| <= ymax against nu.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
  double total_weight() const;
};

/// Draw ~ Normal(0, A * dt). Returns exactly 0 when A == 0.
double sample_brownian_increment(double A, double dt, RngState& rng);

/// All jumps with |size| > eps on [0, horizon], in increasing time order.
std::vector<JumpEvent> sample_jumps(const LevyMeasure& nu, double horizon, double eps, RngState& rng);

/// Same as sample_jumps, but reuses the storage of `out`.
void sample_jumps_into(const LevyMeasure& nu, double horizon, double eps, RngState& rng,
                       std::vector<JumpEvent>& out);
/// Same draws as sample_jumps, stored as parallel arrays.
void sample_jumps_into(const LevyMeasure& nu, double horizon, double eps, RngState& rng, JumpBuffer& out);

/// The jumps of sample_jumps delivered in time-ordered batches, so a path
/// never holds its whole jump list. Concatenating the batches gives exactly
/// sample_jumps(nu, horizon, eps, rng) for the same starting rng.
class JumpStream {
 public:
  JumpStream(const LevyMeasure& nu, double horizon, double eps, RngState rng);

  /// The next batch; empty once the horizon is reached. Valid until the next call.
  const JumpBuffer& next();

 private:
  const LevyMeasure* nu_;
  double horizon_;
  double eps_;
  RngState rng_;
  JumpBuffer batch_;
  double t_ = 0.0;
  bool done_ = false;
};

/// Signed integral of y over eps < |y| < 1.
double small_jump_compensation(const LevyMeasure& nu, double eps);

/// Integral of y^2 over |y| < delta.
double small_jump_second_moment(const LevyMeasure& nu, double delta);

/// Integral of min(y^2, 1); computed numerically for every kind.
double truncated_second_moment(const LevyMeasure& nu);

/// Composite Gauss-Legendre rule with `n` nodes per sign (rounded up to whole
/// panels). Alpha-stable parts use panels graded geometrically from delta.
QuadratureRule measure_quadrature(const LevyMeasure& nu, double delta, double ymax, int n);

/// Smallest ymax (up to bisection tolerance) with nu(|y|>ymax) <= rel * nu(|y|>delta).
double choose_ymax(const LevyMeasure& nu, double delta, double rel = 1e-6);

/// C(alpha) with integral of (1 - cos(k y)) dy/|y|^(1+alpha) = C(alpha) |k|^alpha.
double stable_exponent_constant(double alpha);

}  // namespace mfpe
