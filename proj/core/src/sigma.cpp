#include "mfpe/sigma.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mfpe/error.hpp"

namespace mfpe {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> differentiate(const std::vector<double>& c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> d(c.size() - 1);
  for (std::size_t k = 1; k < c.size(); ++k) d[k - 1] = static_cast<double>(k) * c[k];
  return d;
}

}  // namespace

SigmaFunction::SigmaFunction(Parts parts)
    : name_(std::move(parts.name)),
      value_(std::move(parts.value)),
      d1_(std::move(parts.derivative1)),
      d2_(std::move(parts.derivative2)),
      zeros_(std::move(parts.zeros)),
      lipschitz_(parts.lipschitz),
      domain_(parts.domain),
      closed_form_(std::move(parts.closed_form)),
      taylor_(std::move(parts.taylor)),
      affine_(parts.affine),
      identically_zero_(parts.identically_zero) {
  require(value_ && d1_ && d2_, "sigma needs value and first/second derivatives");
  require(lipschitz_ > 0.0 || identically_zero_, "sigma needs a positive Lipschitz bound");
  std::sort(zeros_.begin(), zeros_.end());
  require(std::adjacent_find(zeros_.begin(), zeros_.end()) == zeros_.end(), "sigma zeros must be distinct");
  for (double z : zeros_) {
    const double tol = 1e-12 * std::max(1.0, lipschitz_ * std::abs(z));
    require(std::abs(value_(z)) <= tol, "sigma does not vanish at listed zero " + std::to_string(z));
  }
}

SigmaFunction SigmaFunction::linear(double slope, double intercept) {
  if (slope == 0.0) return constant(intercept);
  const double zero = -intercept / slope;
  Parts p;
  p.name = "linear";
  p.value = [=](double x) { return slope * x + intercept; };
  p.derivative1 = [=](double) { return slope; };
  p.derivative2 = [](double) { return 0.0; };
  p.zeros = {zero};
  p.lipschitz = std::abs(slope);
  p.affine = AffineMap{slope, intercept};
  p.closed_form = ClosedFormH{
      [=](double x) { return std::log(std::abs(slope * x + intercept)) / slope; },
      [=](double v, double anchor) {
        const double sign = (slope * anchor + intercept) > 0.0 ? 1.0 : -1.0;
        return (sign * std::exp(slope * v) - intercept) / slope;
      }};
  p.taylor = [=](double x0, int order) {
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    c[0] = slope * x0 + intercept;
    if (order >= 1) c[1] = slope;
    return c;
  };
  return SigmaFunction(std::move(p));
}

SigmaFunction SigmaFunction::constant(double c) {
  Parts p;
  p.name = "constant";
  p.value = [=](double) { return c; };
  p.derivative1 = [](double) { return 0.0; };
  p.derivative2 = [](double) { return 0.0; };
  p.taylor = [=](double, int order) {
    std::vector<double> t(static_cast<std::size_t>(order) + 1, 0.0);
    t[0] = c;
    return t;
  };
  p.affine = AffineMap{0.0, c};
  if (c == 0.0) {
    p.identically_zero = true;
    p.lipschitz = 0.0;
  } else {
    p.lipschitz = 1.0;  // any positive bound holds for a constant
    p.closed_form = ClosedFormH{[=](double x) { return x / c; }, [=](double v, double) { return c * v; }};
  }
  return SigmaFunction(std::move(p));
}

SigmaFunction SigmaFunction::sine(double amplitude, Interval window) {
  require(amplitude != 0.0, "sine sigma needs a nonzero amplitude");
  require(window.bounded() && window.lo < window.hi, "sine sigma needs a bounded window");
  constexpr double pi = std::numbers::pi;
  Parts p;
  p.name = "sine";
  // sin(k * pi) in floating point is ~1e-16, not 0; listed zeros must be exact.
  auto sin_exact = [](double x) {
    const double k = std::nearbyint(x / pi);
    return x == k * pi ? 0.0 : std::sin(x);
  };
  p.value = [=](double x) { return amplitude * sin_exact(x); };
  p.derivative1 = [=](double x) { return amplitude * std::cos(x); };
  p.derivative2 = [=](double x) { return -amplitude * sin_exact(x); };
  const auto k_lo = static_cast<long>(std::floor(window.lo / pi));
  const auto k_hi = static_cast<long>(std::ceil(window.hi / pi));
  for (long k = k_lo; k <= k_hi; ++k) p.zeros.push_back(static_cast<double>(k) * pi);
  p.lipschitz = std::abs(amplitude);
  p.domain = window;
  // F(x) = ln|tan(x/2)| / amplitude; on (k pi, (k+1) pi) tan(x/2) has sign (-1)^k.
  p.closed_form = ClosedFormH{
      [=](double x) { return std::log(std::abs(std::tan(0.5 * x))) / amplitude; },
      [=](double v, double anchor) {
        const double k = std::floor(anchor / pi);
        const double w = std::exp(amplitude * v);
        const bool even = std::fmod(std::abs(k), 2.0) == 0.0;
        return even ? k * pi + 2.0 * std::atan(w) : (k + 1.0) * pi - 2.0 * std::atan(w);
      }};
  p.taylor = [=](double x0, int order) {
    std::vector<double> c(static_cast<std::size_t>(order) + 1);
    const double s = std::sin(x0), co = std::cos(x0);
    double factorial = 1.0;
    for (int k = 0; k <= order; ++k) {
      if (k > 0) factorial *= k;
      const double deriv = (k % 4 == 0) ? s : (k % 4 == 1) ? co : (k % 4 == 2) ? -s : -co;
      c[static_cast<std::size_t>(k)] = amplitude * deriv / factorial;
    }
    return c;
  };
  return SigmaFunction(std::move(p));
}

SigmaFunction SigmaFunction::polynomial(std::vector<double> coefficients, std::vector<double> zeros, Interval window,
                                        double lipschitz) {
  require(!coefficients.empty(), "polynomial sigma needs coefficients");
  while (coefficients.size() > 1 && coefficients.back() == 0.0) coefficients.pop_back();
  const auto d1c = differentiate(coefficients);
  const auto d2c = differentiate(d1c);
  if (lipschitz <= 0.0) {
    require(window.bounded(), "polynomial sigma needs a bounded window to estimate its Lipschitz bound");
    double bound = 0.0;
    constexpr int kProbes = 4001;
    for (int i = 0; i < kProbes; ++i) {
      const double x = window.lo + (window.hi - window.lo) * i / (kProbes - 1);
      bound = std::max(bound, std::abs(horner(d1c, x)));
    }
    lipschitz = std::max(1.05 * bound, 1e-300);
  }
  Parts p;
  p.name = "polynomial";
  p.value = [=](double x) { return horner(coefficients, x); };
  p.derivative1 = [=](double x) { return horner(d1c, x); };
  p.derivative2 = [=](double x) { return horner(d2c, x); };
  p.zeros = std::move(zeros);
  p.lipschitz = lipschitz;
  p.domain = window;
  p.taylor = [=](double x0, int order) {
    // Repeated differentiation of the coefficient list, divided by k!.
    std::vector<double> out(static_cast<std::size_t>(order) + 1, 0.0);
    auto current = coefficients;
    double factorial = 1.0;
    for (int k = 0; k <= order; ++k) {
      if (k > 0) {
        factorial *= k;
        current = differentiate(current);
      }
      out[static_cast<std::size_t>(k)] = horner(current, x0) / factorial;
    }
    return out;
  };
  if (coefficients.size() == 1 && coefficients[0] == 0.0) p.identically_zero = true;
  SigmaFunction out(std::move(p));
  if (window.bounded()) {
    if (auto problem = out.check(window)) throw Error(ErrorCode::kInvalidArgument, "polynomial sigma: " + *problem);
  }
  return out;
}

SigmaFunction SigmaFunction::without_closed_form() const {
  SigmaFunction copy = *this;
  copy.closed_form_.reset();
  copy.affine_.reset();
  copy.name_ += "(numeric)";
  return copy;
}

std::optional<std::string> SigmaFunction::check(Interval window, int samples) const {
  if (identically_zero_) return std::nullopt;
  require(window.bounded() && samples > 1, "sigma check needs a bounded window");
  std::vector<double> xs;
  for (int i = 0; i < samples; ++i) xs.push_back(window.lo + (window.hi - window.lo) * (i + 0.5) / samples);
  for (double x : xs) {
    const bool listed = std::binary_search(zeros_.begin(), zeros_.end(), x);
    if (!listed && value_(x) == 0.0) {
      std::ostringstream os;
      os << "sigma vanishes at unlisted point " << x;
      return os.str();
    }
  }
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = xs[i], b = xs[i + 1];
    const auto first = std::lower_bound(zeros_.begin(), zeros_.end(), a);
    const bool bracketed = first != zeros_.end() && *first <= b;
    if (!bracketed && value_(a) * value_(b) < 0.0) {
      std::ostringstream os;
      os << "sigma changes sign between " << a << " and " << b << " without a listed zero";
      return os.str();
    }
  }
  for (std::size_t i = 0; i + 7 < xs.size(); i += 3) {
    const double a = xs[i], b = xs[i + 7];
    if (std::abs(value_(a) - value_(b)) > lipschitz_ * std::abs(a - b) * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "Lipschitz bound " << lipschitz_ << " violated between " << a << " and " << b;
      return os.str();
    }
  }
  return std::nullopt;
}

}  // namespace mfpe
