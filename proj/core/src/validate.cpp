#include "mfpe/validate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfpe/error.hpp"
#include "numeric.hpp"

namespace mfpe {

namespace {

double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

double required(const std::map<std::string, double>& p, const std::string& key, const std::string& ref) {
  const auto it = p.find(key);
  if (it == p.end()) throw Error(ErrorCode::kInvalidArgument, ref + " reference needs parameter " + key);
  return it->second;
}

// CDF of x0 + S with E exp(ikS) = exp(-s |k|^alpha), s = c t, by Gil-Pelaez:
// F(x) = 1/2 + (1/pi) int_0^inf sin(k u) / k exp(-s k^alpha) dk, u = x - x0.
double stable_cdf(double u, double alpha, double s) {
  if (u == 0.0) return 0.5;
  const double kmax = std::pow(40.0 / s, 1.0 / alpha);  // exp(-s k^alpha) < 5e-18 beyond
  // Panels short enough that sin(k u) turns less than one radian per panel.
  const auto panels = static_cast<long>(std::ceil(kmax * std::max(std::abs(u), 1.0)));
  static const detail::GaussLegendre8 gl;
  const double h = kmax / static_cast<double>(panels);
  double acc = 0.0;
  for (long p = 0; p < panels; ++p) {
    const double mid = (static_cast<double>(p) + 0.5) * h;
    double part = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double k = mid + 0.5 * h * gl.x[static_cast<std::size_t>(i)];
      part += gl.w[static_cast<std::size_t>(i)] * std::sin(k * u) / k * std::exp(-s * std::pow(k, alpha));
    }
    acc += 0.5 * h * part;
  }
  return 0.5 + acc / std::numbers::pi;
}

bool same_grid(const GridSpec& a, const GridSpec& b) {
  if (a.n != b.n) return false;
  const double tol = 1e-9 * std::min(a.dx(), b.dx());
  return std::abs(a.xmin - b.xmin) <= tol && std::abs(a.xmax - b.xmax) <= tol;
}

}  // namespace

ComparisonReport compare(const DensityGrid& a, const DensityGrid& b) {
  if (!same_grid(a.grid, b.grid) || a.values.size() != b.values.size())
    throw Error(ErrorCode::kGridMismatch, "compared densities live on different grids");
  const double dx = a.dx();
  ComparisonReport r;
  double ca = 0.0, cb = 0.0, l1 = 0.0, ks = 0.0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    l1 += std::abs(a.values[j] - b.values[j]);
    ca += a.values[j];
    cb += b.values[j];
    ks = std::max(ks, std::abs(ca - cb) * dx);
  }
  r.l1_distance = l1 * dx;
  r.ks_statistic = std::min(ks, 1.0);
  return r;
}

double mc_stderr_band(const DensityGrid& histogram, std::int64_t n_paths) {
  if (n_paths <= 0) throw Error(ErrorCode::kEmptyEnsemble, "band needs a positive path count");
  const double dx = histogram.dx();
  const double n = static_cast<double>(n_paths);
  double band = 0.0;
  for (double v : histogram.values) {
    const double m = std::clamp(v * dx, 0.0, 1.0);
    band += std::sqrt(2.0 * m * (1.0 - m) / (std::numbers::pi * n));
  }
  return band;
}

ComparisonReport judge(ComparisonReport report, double band, MassAccounting mass, const ToleranceRule& rule) {
  report.mc_stderr_band = band;
  report.mass = mass;
  report.tolerance = std::max(rule.floor, rule.band_factor * band + mass.fpe_leak + mass.mc_flagged);
  report.pass = report.l1_distance <= report.tolerance;
  return report;
}

DensityGrid analytic_reference(const std::string& name, const std::map<std::string, double>& params,
                               const GridSpec& grid) {
  grid.validate();
  if (name == "gaussian") {
    return DensityGrid::from_density(grid, Density1D::normal(param(params, "mean", 0.0), param(params, "sd", 1.0)));
  }
  if (name == "lognormal") {
    return DensityGrid::from_density(grid,
                                     Density1D::lognormal(param(params, "logMean", 0.0), param(params, "logSd", 1.0)));
  }
  if (name == "transport") {
    const double a = param(params, "slope", 0.0), c = param(params, "intercept", 0.0);
    const double t = param(params, "t", 0.0);
    const double growth = std::exp(a * t);
    const double shift = a != 0.0 ? c * std::expm1(a * t) / a : c * t;
    const double mean = param(params, "mean", 0.0) * growth + shift;
    return DensityGrid::from_density(grid, Density1D::normal(mean, param(params, "sd", 1.0) * growth));
  }
  if (name == "alpha_stable_additive") {
    const double alpha = required(params, "alpha", name);
    const double s = param(params, "c", 1.0) * required(params, "t", name);
    const double x0 = param(params, "x0", 0.0);
    if (!(alpha > 0.0 && alpha <= 2.0) || !(s > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "alpha_stable_additive needs 0 < alpha <= 2 and c t > 0");
    DensityGrid out(grid);
    double left = stable_cdf(grid.edge(0) - x0, alpha, s);
    for (int j = 0; j < grid.n; ++j) {
      const double right = stable_cdf(grid.edge(j + 1) - x0, alpha, s);
      out.values[static_cast<std::size_t>(j)] = std::max(right - left, 0.0) / grid.dx();
      left = right;
    }
    return out;
  }
  throw Error(ErrorCode::kUnsupportedReference, "unknown reference density " + name);
}

}  // namespace mfpe
