#pragma once

#include <iosfwd>
#include <string>

#include "mfpe/grid.hpp"
#include "mfpe/sde.hpp"
#include "mfpe/validate.hpp"

namespace mfpe {

/// Shortest text that reads back to the same double ("%.17g").
std::string format_double(double v);

/// Header "pathId,time,state", then one row per retained path per save time.
void write_ensemble_csv(const PathEnsemble& ensemble, std::ostream& out);

/// Little-endian layout:
///   char[4]  "MFPE"
///   u32      version (1)
///   u64      paths (retained), times, requested, flagged, seed
///   f64      epsilon
///   f64      times[times]
///   u64      pathIds[paths]
///   f64      states[paths * times], row-major by path
void write_ensemble_binary(const PathEnsemble& ensemble, std::ostream& out);
/// Throws InvalidArgument on a bad magic, version or truncated stream.
PathEnsemble read_ensemble_binary(std::istream& in);

/// Header "x,value", then one row per cell centre.
void write_density_csv(const DensityGrid& density, std::ostream& out);
/// Reads write_density_csv output back; the grid is rebuilt from the centres.
DensityGrid read_density_csv(std::istream& in, double time = 0.0);

/// Pretty-printed JSON with fixed key order.
std::string to_json(const ComparisonReport& report);

}  // namespace mfpe
