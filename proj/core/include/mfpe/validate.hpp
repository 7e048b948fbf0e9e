#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mfpe/grid.hpp"

namespace mfpe {

struct MassAccounting {
  double mc_flagged = 0.0;
  double fpe_leak = 0.0;
};

struct ComparisonReport {
  double l1_distance = 0.0;
  double ks_statistic = 0.0;
  double mc_stderr_band = 0.0;
  MassAccounting mass;
  double tolerance = 0.0;
  bool pass = false;
};

/// L1 = sum |a - b| dx; KS = max |CDF_a - CDF_b| over cell edges. Grids must
/// agree in n and (to 1e-9 dx) in their end points; throws GridMismatch.
ComparisonReport compare(const DensityGrid& a, const DensityGrid& b);

/// Expected L1 error of a histogram of `n_paths` samples whose cell
/// probabilities are `histogram` * dx: sum_j sqrt(2 m_j (1 - m_j) / (pi N)).
double mc_stderr_band(const DensityGrid& histogram, std::int64_t n_paths);

struct ToleranceRule {
  double floor = 0.03;
  double band_factor = 3.0;
};

/// Fills band, mass accounting and verdict:
/// pass iff L1 <= max(floor, band_factor band + leak + flagged).
ComparisonReport judge(ComparisonReport report, double band, MassAccounting mass, const ToleranceRule& rule = {});

/// Parameters by name:
///   gaussian:              mean, sd
///   lognormal:             logMean, logSd
///   alpha_stable_additive: alpha, c, t, x0 (law of x0 + S, E exp(ikS) = exp(-c t |k|^alpha))
///   transport:             mean, sd, slope, intercept, t (Normal(mean, sd) carried by dx/dt = slope x + intercept)
/// alpha and t are required for alpha_stable_additive. Other missing values
/// default to 0, except sd, logSd and c, which default to 1.
/// Throws UnsupportedReference for other names.
DensityGrid analytic_reference(const std::string& name, const std::map<std::string, double>& params,
                               const GridSpec& grid);

}  // namespace mfpe
