#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfpe/levy.hpp"

namespace mfpe {

/// Closed-form antiderivative F of 1/sigma, valid on every zero-free interval,
/// plus its inverse restricted to the interval that contains `anchor`.
/// The inverse returns NaN when no point of that interval maps to v.
struct ClosedFormH {
  std::function<double(double x)> antiderivative;
  std::function<double(double v, double anchor)> inverse;
};

/// x -> slope * x + intercept. As a sigma its flow is a dilation about the
/// zero (or a translation when slope == 0), so jumps need no transform at all.
struct AffineMap {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const noexcept { return slope * x + intercept; }
};

/// Taylor coefficients sigma^(k)(x0) / k!, k = 0..order.
using TaylorFn = std::function<std::vector<double>(double x0, int order)>;

/// Noise coefficient of the Marcus SDE with analytic derivatives and an
/// explicit, finite list of zeros inside its domain window.
class SigmaFunction {
 public:
  using Fn = std::function<double(double)>;

  struct Parts {
    std::string name;
    Fn value, derivative1, derivative2;
    std::vector<double> zeros;
    double lipschitz = 1.0;
    Interval domain{};
    std::optional<ClosedFormH> closed_form{};
    TaylorFn taylor{};
    std::optional<AffineMap> affine{};
    bool identically_zero = false;
  };

  explicit SigmaFunction(Parts parts);

  /// slope * x + intercept.
  static SigmaFunction linear(double slope, double intercept = 0.0);
  /// A constant; c == 0 gives the identically-zero coefficient.
  static SigmaFunction constant(double c);
  /// amplitude * sin(x); zeros k*pi listed across `window` plus one beyond each end.
  static SigmaFunction sine(double amplitude, Interval window);
  /// Ascending coefficients. Zeros must be supplied; they are checked, not searched for.
  /// lipschitz <= 0 estimates the bound over `window` (which must then be bounded).
  static SigmaFunction polynomial(std::vector<double> coefficients, std::vector<double> zeros,
                                  Interval window = {}, double lipschitz = 0.0);

  double value(double x) const { return value_(x); }
  double derivative1(double x) const { return d1_(x); }
  double derivative2(double x) const { return d2_(x); }
  double operator()(double x) const { return value_(x); }

  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& zeros() const noexcept { return zeros_; }
  double lipschitz() const noexcept { return lipschitz_; }
  const Interval& domain() const noexcept { return domain_; }
  const std::optional<ClosedFormH>& closed_form() const noexcept { return closed_form_; }
  const TaylorFn& taylor() const noexcept { return taylor_; }
  const std::optional<AffineMap>& affine() const noexcept { return affine_; }
  bool identically_zero() const noexcept { return identically_zero_; }

  /// Returns a copy that uses numeric quadrature instead of the closed form
  /// and the affine shortcut.
  SigmaFunction without_closed_form() const;

  /// Spot checks on a sample grid: nonzero off the zero set and the Lipschitz
  /// bound on sampled pairs. Returns a description of the first violation.
  std::optional<std::string> check(Interval window, int samples = 2001) const;

 private:
  std::string name_;
  Fn value_, d1_, d2_;
  std::vector<double> zeros_;
  double lipschitz_;
  Interval domain_;
  std::optional<ClosedFormH> closed_form_;
  TaylorFn taylor_;
  std::optional<AffineMap> affine_;
  bool identically_zero_;
};

}  // namespace mfpe
