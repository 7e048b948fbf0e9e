#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <mfpe/fpe.hpp>
#include <mfpe/sde.hpp>
#include <mfpe/validate.hpp>

namespace mfpe::cli {

/// Bad configuration text or values; `what()` names the line or field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DriftSpec {
  std::string kind = "affine";  // affine | polynomial
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> coefficients;

  friend bool operator==(const DriftSpec&, const DriftSpec&) = default;
};

struct SigmaSpec {
  std::string name = "linear";  // linear | constant | sine | polynomial
  double slope = 1.0;
  double intercept = 0.0;
  double value = 1.0;
  double amplitude = 1.0;
  std::vector<double> coefficients;
  std::vector<double> zeros;
  std::optional<std::array<double, 2>> window;
  double lipschitz = 0.0;
  /// Use quadrature and root finding even when a closed form exists.
  bool numeric = false;
  std::vector<double> anchors;
  int series_order = 20;

  friend bool operator==(const SigmaSpec&, const SigmaSpec&) = default;
};

struct DensitySpec {
  std::string kind = "point";  // point | normal | lognormal | uniform
  double x0 = 0.0;
  double mean = 0.0;
  double sd = 1.0;
  double log_mean = 0.0;
  double log_sd = 1.0;
  double lo = 0.0;
  double hi = 1.0;

  friend bool operator==(const DensitySpec&, const DensitySpec&) = default;
};

struct MeasureSpec {
  std::string kind = "null";  // null | alphaStable | compoundPoisson | sum
  double alpha = 1.5;
  double scale = 1.0;
  double rate = 1.0;
  DensitySpec jump{.kind = "normal"};
  std::vector<MeasureSpec> parts;

  friend bool operator==(const MeasureSpec&, const MeasureSpec&) = default;
};

struct ModelSpec {
  DriftSpec drift;
  SigmaSpec sigma;
  double b = 0.0;
  double A = 0.0;
  MeasureSpec nu;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct TimeSpec {
  double horizon = 1.0;
  /// Empty means {horizon}.
  std::vector<double> save_times;

  friend bool operator==(const TimeSpec&, const TimeSpec&) = default;
};

struct SimulationSpec {
  double dt = 1e-3;
  double epsilon = 1e-3;
  std::int64_t n_paths = 1000;
  std::uint64_t seed = 1;
  double blowup_guard = 1e12;
  double max_flagged_fraction = 0.01;
  int threads = 1;

  friend bool operator==(const SimulationSpec&, const SimulationSpec&) = default;
};

struct SolverSpec {
  double delta = 1e-3;
  double ymax = 0.0;
  int n_quad = 64;
  std::string scheme = "conservative";  // conservative | pointwise
  double max_dt = 0.0;

  friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

struct SourceSpec {
  std::string kind = "mc";  // mc | fpe | reference | file
  std::string reference;
  std::map<std::string, double> params;
  std::string path;
  bool smooth = false;

  static SourceSpec of(std::string kind) {
    SourceSpec s;
    s.kind = std::move(kind);
    return s;
  }

  friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

struct CompareSpec {
  SourceSpec a = SourceSpec::of("mc");
  SourceSpec b = SourceSpec::of("fpe");
  /// Negative means the horizon.
  double time = -1.0;
  double floor = 0.03;
  double band_factor = 3.0;

  friend bool operator==(const CompareSpec&, const CompareSpec&) = default;
};

struct TransformCheckSpec {
  int samples = 10000;
  std::uint64_t seed = 1;
  std::array<double, 2> x_range{-2.0, 2.0};
  std::array<double, 2> y_range{-1.0, 1.0};
  double chain_tolerance = 1e-8;
  double oracle_tolerance = 1e-7;
  double group_tolerance = 1e-8;

  friend bool operator==(const TransformCheckSpec&, const TransformCheckSpec&) = default;
};

struct RunConfig {
  ModelSpec model;
  DensitySpec initial;
  TimeSpec time;
  SimulationSpec simulation;
  GridSpec grid{-10.0, 10.0, 800};
  SolverSpec solver;
  CompareSpec compare;
  TransformCheckSpec transform_check;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses JSON text. Unknown keys and wrongly typed values are errors; absent
/// keys keep their defaults. Throws ConfigError.
RunConfig parse_config(const std::string& text);
/// Canonical JSON with every field present, keys in fixed order.
std::string serialize_config(const RunConfig& config);
/// 16 hex digits of FNV-1a over the canonical form without `threads`.
std::string config_hash(const RunConfig& config);

std::vector<double> save_times(const RunConfig& config);
SigmaFunction build_sigma(const SigmaSpec& spec);
LevyMeasure build_measure(const MeasureSpec& spec);
SdeModel build_model(const ModelSpec& spec);
SimulationPlan build_plan(const RunConfig& config);
QuadratureParams build_quadrature(const SolverSpec& spec);
JumpScheme build_scheme(const SolverSpec& spec);
/// Cell averages of the initial law; a point mass fills the cell holding it.
DensityGrid initial_density(const RunConfig& config);

}  // namespace mfpe::cli
