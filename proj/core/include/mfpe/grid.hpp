#pragma once

#include <vector>

#include "mfpe/levy.hpp"

namespace mfpe {

/// Uniform cell-centred grid on [xmin, xmax] with n cells.
struct GridSpec {
  double xmin = -1.0;
  double xmax = 1.0;
  int n = 1;

  double dx() const noexcept { return (xmax - xmin) / n; }
  double edge(int j) const noexcept { return xmin + (xmax - xmin) * j / n; }
  double center(int j) const noexcept { return xmin + (xmax - xmin) * (j + 0.5) / n; }
  /// Cell containing x, with x == xmax assigned to the last cell; -1 outside.
  int cell_of(double x) const noexcept;
  /// Throws InvalidArgument unless xmin < xmax and n > 0.
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Cell averages of a density at one time.
struct DensityGrid {
  GridSpec grid;
  std::vector<double> values;
  double time = 0.0;

  DensityGrid() = default;
  DensityGrid(GridSpec spec, double t = 0.0);

  /// Exact cell averages of `density` (through its CDF when available).
  static DensityGrid from_density(const GridSpec& spec, const Density1D& density, double t = 0.0);

  double dx() const noexcept { return grid.dx(); }
  double mass() const;
  double mean() const;
  double variance() const;
  /// Smallest cell value (negative on undershoot).
  double min_value() const;
};

}  // namespace mfpe
