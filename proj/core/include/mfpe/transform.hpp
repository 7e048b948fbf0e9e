#pragma once

#include <optional>
#include <vector>

#include "mfpe/sigma.hpp"

namespace mfpe {

/// The family {H_i} of antiderivatives of 1/sigma, one per zero-free interval,
/// with the glued jump map built on top. Immutable after construction.
///
/// Intervals are numbered 0..n for n zeros: interval i is (x_i, x_{i+1}) with
/// x_0 = -inf and x_{n+1} = +inf.
class TransformAtlas {
 public:
  /// Empty `anchors` selects defaults: midpoints of bounded intervals, one unit
  /// inside the outer ones, 0 when sigma has no zeros.
  explicit TransformAtlas(SigmaFunction sigma, std::vector<double> anchors = {}, int series_order = 20);

  const SigmaFunction& sigma() const noexcept { return sigma_; }
  int interval_count() const noexcept { return static_cast<int>(anchors_.size()); }
  Interval interval(int i) const;
  double anchor(int i) const;
  int series_order() const noexcept { return series_order_; }
  /// Phi_0..Phi_K at the zero with the given position in sigma().zeros().
  const std::vector<double>& phi_series(int zero_index) const;

  /// Position of x in the zero list, if x is one of the zeros.
  std::optional<int> zero_index(double x) const;
  /// Interval containing x. Throws ZeroOfSigma at a zero, OutOfDomain outside the window.
  int locate(double x) const;

  /// Integral of 1/sigma from `from` to `to`, both inside interval i.
  double integral(int i, double from, double to) const;
  /// z in interval i with integral(i, start, z) = target.
  double solve_flow(int i, double start, double target) const;

 private:
  SigmaFunction sigma_;
  std::vector<double> anchors_;
  int series_order_;
  std::vector<std::vector<double>> phi_;
};

struct IntervalValue {
  int interval = 0;
  double value = 0.0;
};

/// H_i(x) = integral of dt / sigma(t) from a_i to x, with i the interval of x.
IntervalValue h_forward(const TransformAtlas& atlas, double x);

/// The x in interval i with H_i(x) = u.
double h_inverse(const TransformAtlas& atlas, int interval, double u);

/// H_i^{-1}(H_i(x) + y) off the zero set; x itself at a zero of sigma.
double h_tilde(const TransformAtlas& atlas, double x, double y);

/// d/dx of h_tilde. Uses the Phi_k series at zeros of sigma.
double h_tilde_dx(const TransformAtlas& atlas, double x, double y);

/// Phi_0..Phi_K, the limits at `zero` of the K nested operators d/dx(sigma * .) applied to 1.
std::vector<double> phi_coefficients(const SigmaFunction& sigma, double zero, int K);

/// y(1) for dy/dz = r sigma(y), y(0) = x, by adaptive Runge-Kutta-Fehlberg 7(8).
double marcus_map_ode(const SigmaFunction& sigma, double r, double x);

}  // namespace mfpe
