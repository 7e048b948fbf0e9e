#include "mfpe/grid.hpp"

#include <algorithm>
#include <cmath>

#include "mfpe/error.hpp"
#include "numeric.hpp"

namespace mfpe {

int GridSpec::cell_of(double x) const noexcept {
  if (!(x >= xmin && x <= xmax)) return -1;
  const auto j = static_cast<int>(std::floor((x - xmin) / dx()));
  return std::clamp(j, 0, n - 1);
}

void GridSpec::validate() const {
  if (!(n > 0)) throw Error(ErrorCode::kInvalidArgument, "grid needs n > 0");
  if (!(std::isfinite(xmin) && std::isfinite(xmax) && xmin < xmax))
    throw Error(ErrorCode::kInvalidArgument, "grid needs finite xmin < xmax");
}

DensityGrid::DensityGrid(GridSpec spec, double t) : grid(spec), values(static_cast<std::size_t>(spec.n), 0.0), time(t) {
  grid.validate();
}

DensityGrid DensityGrid::from_density(const GridSpec& spec, const Density1D& density, double t) {
  DensityGrid out(spec, t);
  const double dx = spec.dx();
  for (int j = 0; j < spec.n; ++j) {
    const double a = spec.edge(j), b = spec.edge(j + 1);
    double m;
    if (density.has_cdf()) {
      m = density.mass(a, b);
    } else {
      m = detail::integrate([&](double x) { return density.evaluate(x); }, a, b, 1e-12);
    }
    out.values[static_cast<std::size_t>(j)] = std::max(m, 0.0) / dx;
  }
  return out;
}

double DensityGrid::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * dx();
}

double DensityGrid::mean() const {
  double s = 0.0, m = 0.0;
  for (int j = 0; j < grid.n; ++j) {
    const double v = values[static_cast<std::size_t>(j)];
    s += v * grid.center(j);
    m += v;
  }
  return s / m;
}

double DensityGrid::variance() const {
  // Cell averages treated as piecewise constant, hence the dx^2/12 term.
  const double mu = mean();
  double s = 0.0, m = 0.0;
  for (int j = 0; j < grid.n; ++j) {
    const double v = values[static_cast<std::size_t>(j)];
    const double d = grid.center(j) - mu;
    s += v * d * d;
    m += v;
  }
  return s / m + dx() * dx() / 12.0;
}

double DensityGrid::min_value() const {
  return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

}  // namespace mfpe
