#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include <mfpe/error.hpp>

namespace mfpe::cli {

namespace {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + " " + what); }

// Typed, strict view of one JSON object: every key read is recorded, and
// finish() rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void skip(const std::string& key) { used_.insert(key); }

  Reader child(const std::string& key) {
    used_.insert(key);
    return Reader(j_.at(key), at(key));
  }

  void read(const std::string& key, double& out) {
    if (!mark(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(at(key), "must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(at(key), "must be finite");
  }
  void read(const std::string& key, int& out) {
    std::int64_t wide = out;
    read(key, wide);
    if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max()) fail(at(key), "is out of range");
    out = static_cast<int>(wide);
  }
  void read(const std::string& key, std::int64_t& out) {
    if (!mark(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(at(key), "must be an integer");
    out = v.get<std::int64_t>();
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (!mark(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) fail(at(key), "must be a nonnegative integer");
    out = v.get<std::uint64_t>();
  }
  void read(const std::string& key, bool& out) {
    if (!mark(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) fail(at(key), "must be true or false");
    out = v.get<bool>();
  }
  void read(const std::string& key, std::string& out) {
    if (!mark(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "must be a string");
    out = v.get<std::string>();
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (!mark(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(at(key), "must be an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(at(key), "must be an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  void read(const std::string& key, std::array<double, 2>& out) {
    std::vector<double> v;
    if (!has(key)) {
      used_.insert(key);
      return;
    }
    read(key, v);
    if (v.size() != 2 || !(v[0] < v[1])) fail(at(key), "must be [lo, hi] with lo < hi");
    out = {v[0], v[1]};
  }
  void read(const std::string& key, std::optional<std::array<double, 2>>& out) {
    if (!has(key)) {
      used_.insert(key);
      return;
    }
    std::array<double, 2> v{};
    read(key, v);
    out = v;
  }
  void read(const std::string& key, std::map<std::string, double>& out) {
    if (!mark(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_object()) fail(at(key), "must be an object of numbers");
    out.clear();
    for (const auto& [k, e] : v.items()) {
      if (!e.is_number()) fail(at(key) + "." + k, "must be a number");
      out[k] = e.get<double>();
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) fail(at(k), "is not a recognised key");
  }

 private:
  bool mark(const std::string& key) {
    used_.insert(key);
    return has(key);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void expect_one_of(const std::string& path, const std::string& value, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (value == o) return;
  std::string list;
  for (const char* o : options) list += (list.empty() ? "" : ", ") + std::string(o);
  fail(path, "must be one of: " + list + " (got \"" + value + "\")");
}

void read_density(Reader r, DensitySpec& d, bool allow_point) {
  r.read("kind", d.kind);
  if (allow_point) {
    expect_one_of(r.at("kind"), d.kind, {"point", "normal", "lognormal", "uniform"});
  } else {
    expect_one_of(r.at("kind"), d.kind, {"normal", "lognormal", "uniform"});
  }
  r.read("x0", d.x0);
  r.read("mean", d.mean);
  r.read("sd", d.sd);
  r.read("logMean", d.log_mean);
  r.read("logSd", d.log_sd);
  r.read("lo", d.lo);
  r.read("hi", d.hi);
  r.finish();
  if (d.kind == "normal" && !(d.sd > 0.0)) fail(r.at("sd"), "must be positive");
  if (d.kind == "lognormal" && !(d.log_sd > 0.0)) fail(r.at("logSd"), "must be positive");
  if (d.kind == "uniform" && !(d.lo < d.hi)) fail(r.at("lo"), "must be below hi");
}

void read_measure(Reader r, MeasureSpec& m) {
  r.read("kind", m.kind);
  expect_one_of(r.at("kind"), m.kind, {"null", "alphaStable", "compoundPoisson", "sum"});
  r.read("alpha", m.alpha);
  r.read("scale", m.scale);
  r.read("rate", m.rate);
  if (r.has("jump")) read_density(r.child("jump"), m.jump, false);
  r.skip("parts");  // read by read_measure_tree
  r.finish();
  if (m.kind == "alphaStable") {
    if (!(m.alpha > 0.0 && m.alpha < 2.0)) fail(r.at("alpha"), "must lie in (0, 2)");
    if (!(m.scale > 0.0)) fail(r.at("scale"), "must be positive");
  }
  if (m.kind == "compoundPoisson" && !(m.rate > 0.0)) fail(r.at("rate"), "must be positive");
}

void to_json(ordered& j, const DensitySpec& d) {
  j = ordered::object();
  j["kind"] = d.kind;
  if (d.kind == "point") j["x0"] = d.x0;
  if (d.kind == "normal") {
    j["mean"] = d.mean;
    j["sd"] = d.sd;
  }
  if (d.kind == "lognormal") {
    j["logMean"] = d.log_mean;
    j["logSd"] = d.log_sd;
  }
  if (d.kind == "uniform") {
    j["lo"] = d.lo;
    j["hi"] = d.hi;
  }
}

void to_json(ordered& j, const MeasureSpec& m) {
  j = ordered::object();
  j["kind"] = m.kind;
  if (m.kind == "alphaStable") {
    j["alpha"] = m.alpha;
    j["scale"] = m.scale;
  }
  if (m.kind == "compoundPoisson") {
    j["rate"] = m.rate;
    to_json(j["jump"], m.jump);
  }
  if (m.kind == "sum") {
    j["parts"] = ordered::array();
    for (const auto& p : m.parts) {
      ordered part;
      to_json(part, p);
      j["parts"].push_back(part);
    }
  }
}

void to_json(ordered& j, const SourceSpec& s) {
  j = ordered::object();
  j["kind"] = s.kind;
  if (s.kind == "reference") {
    j["reference"] = s.reference;
    j["params"] = ordered::object();
    for (const auto& [k, v] : s.params) j["params"][k] = v;
  }
  if (s.kind == "file") j["path"] = s.path;
  if (s.kind == "mc") j["smooth"] = s.smooth;
}

void read_source(Reader r, SourceSpec& s) {
  r.read("kind", s.kind);
  expect_one_of(r.at("kind"), s.kind, {"mc", "fpe", "reference", "file"});
  r.read("reference", s.reference);
  r.read("params", s.params);
  r.read("path", s.path);
  r.read("smooth", s.smooth);
  r.finish();
  if (s.kind == "reference" && s.reference.empty()) fail(r.at("reference"), "must name a reference density");
  if (s.kind == "file" && s.path.empty()) fail(r.at("path"), "must name a density CSV file");
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void check_increasing(const std::string& path, const std::vector<double>& v, double lo, double hi) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= lo && v[i] <= hi)) fail(path, "entries must lie in [0, horizon]");
    if (i > 0 && !(v[i] > v[i - 1])) fail(path, "must be strictly increasing");
  }
}

}  // namespace

// Sum parts are read here rather than in the anonymous helper so that the
// recursion can reach the array elements.
static void read_measure_tree(const json& j, const std::string& path, MeasureSpec& m) {
  Reader r(j, path);
  read_measure(r, m);
  if (m.kind == "sum") {
    if (!j.contains("parts") || !j.at("parts").is_array() || j.at("parts").empty())
      fail(path + ".parts", "must be a nonempty array of measures");
    m.parts.clear();
    for (std::size_t i = 0; i < j.at("parts").size(); ++i) {
      MeasureSpec part;
      read_measure_tree(j.at("parts")[i], path + ".parts[" + std::to_string(i) + "]", part);
      m.parts.push_back(std::move(part));
    }
  }
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON at " + line_column(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  RunConfig c;
  Reader r(root, "");

  if (r.has("model")) {
    Reader m = r.child("model");
    if (m.has("drift")) {
      Reader d = m.child("drift");
      d.read("kind", c.model.drift.kind);
      expect_one_of(d.at("kind"), c.model.drift.kind, {"affine", "polynomial"});
      d.read("slope", c.model.drift.slope);
      d.read("intercept", c.model.drift.intercept);
      d.read("coefficients", c.model.drift.coefficients);
      d.finish();
      if (c.model.drift.kind == "polynomial" && c.model.drift.coefficients.empty())
        fail(d.at("coefficients"), "must not be empty");
    }
    if (m.has("sigma")) {
      Reader s = m.child("sigma");
      auto& sg = c.model.sigma;
      s.read("name", sg.name);
      expect_one_of(s.at("name"), sg.name, {"linear", "constant", "sine", "polynomial"});
      s.read("slope", sg.slope);
      s.read("intercept", sg.intercept);
      s.read("value", sg.value);
      s.read("amplitude", sg.amplitude);
      s.read("coefficients", sg.coefficients);
      s.read("zeros", sg.zeros);
      s.read("window", sg.window);
      s.read("lipschitz", sg.lipschitz);
      s.read("numeric", sg.numeric);
      s.read("anchors", sg.anchors);
      s.read("seriesOrder", sg.series_order);
      s.finish();
      if (sg.name == "sine" && !sg.window) fail(s.at("window"), "is required for the sine coefficient");
      if (sg.name == "polynomial" && sg.coefficients.empty()) fail(s.at("coefficients"), "must not be empty");
      if (sg.series_order < 0) fail(s.at("seriesOrder"), "must be nonnegative");
    }
    m.read("b", c.model.b);
    m.read("A", c.model.A);
    if (!(c.model.A >= 0.0)) fail(m.at("A"), "must be nonnegative");
    if (m.has("nu")) {
      m.skip("nu");
      read_measure_tree(root.at("model").at("nu"), "model.nu", c.model.nu);
    }
    m.finish();
  }
  if (r.has("initial")) read_density(r.child("initial"), c.initial, true);
  if (r.has("time")) {
    Reader t = r.child("time");
    t.read("horizon", c.time.horizon);
    t.read("saveTimes", c.time.save_times);
    t.finish();
    if (!(c.time.horizon > 0.0)) fail(t.at("horizon"), "must be positive");
    check_increasing(t.at("saveTimes"), c.time.save_times, 0.0, c.time.horizon);
  }
  if (r.has("simulation")) {
    Reader s = r.child("simulation");
    auto& sim = c.simulation;
    s.read("dt", sim.dt);
    s.read("epsilon", sim.epsilon);
    s.read("nPaths", sim.n_paths);
    s.read("seed", sim.seed);
    s.read("blowupGuard", sim.blowup_guard);
    s.read("maxFlaggedFraction", sim.max_flagged_fraction);
    s.read("threads", sim.threads);
    s.finish();
    if (!(sim.dt > 0.0)) fail(s.at("dt"), "must be positive");
    if (!(sim.epsilon > 0.0 && sim.epsilon < 1.0)) fail(s.at("epsilon"), "must lie in (0, 1)");
    if (sim.n_paths <= 0) fail(s.at("nPaths"), "must be positive");
    if (!(sim.blowup_guard > 0.0)) fail(s.at("blowupGuard"), "must be positive");
    if (!(sim.max_flagged_fraction >= 0.0 && sim.max_flagged_fraction <= 1.0))
      fail(s.at("maxFlaggedFraction"), "must lie in [0, 1]");
    if (sim.threads < 1) fail(s.at("threads"), "must be at least 1");
  }
  if (r.has("grid")) {
    Reader g = r.child("grid");
    g.read("xmin", c.grid.xmin);
    g.read("xmax", c.grid.xmax);
    g.read("n", c.grid.n);
    g.finish();
    if (!(c.grid.xmin < c.grid.xmax)) fail(g.at("xmin"), "must be below xmax");
    if (c.grid.n <= 0) fail(g.at("n"), "must be positive");
  }
  if (r.has("solver")) {
    Reader s = r.child("solver");
    auto& sv = c.solver;
    s.read("delta", sv.delta);
    s.read("ymax", sv.ymax);
    s.read("nQuad", sv.n_quad);
    s.read("scheme", sv.scheme);
    s.read("maxDt", sv.max_dt);
    s.finish();
    if (!(sv.delta > 0.0 && sv.delta < 1.0)) fail(s.at("delta"), "must lie in (0, 1)");
    if (sv.ymax != 0.0 && !(sv.ymax > sv.delta)) fail(s.at("ymax"), "must exceed delta (or be 0 for automatic)");
    if (sv.n_quad <= 0) fail(s.at("nQuad"), "must be positive");
    expect_one_of(s.at("scheme"), sv.scheme, {"conservative", "pointwise"});
    if (sv.max_dt < 0.0) fail(s.at("maxDt"), "must be nonnegative");
  }
  if (r.has("compare")) {
    Reader s = r.child("compare");
    auto& cp = c.compare;
    if (s.has("a")) read_source(s.child("a"), cp.a);
    if (s.has("b")) read_source(s.child("b"), cp.b);
    s.read("time", cp.time);
    s.read("floor", cp.floor);
    s.read("bandFactor", cp.band_factor);
    s.finish();
    if (cp.time > c.time.horizon) fail(s.at("time"), "must not exceed the horizon");
    if (!(cp.floor >= 0.0)) fail(s.at("floor"), "must be nonnegative");
    if (!(cp.band_factor >= 0.0)) fail(s.at("bandFactor"), "must be nonnegative");
  }
  if (r.has("transformCheck")) {
    Reader s = r.child("transformCheck");
    auto& tc = c.transform_check;
    s.read("samples", tc.samples);
    s.read("seed", tc.seed);
    s.read("xRange", tc.x_range);
    s.read("yRange", tc.y_range);
    s.read("chainTolerance", tc.chain_tolerance);
    s.read("oracleTolerance", tc.oracle_tolerance);
    s.read("groupTolerance", tc.group_tolerance);
    s.finish();
    if (tc.samples <= 0) fail(s.at("samples"), "must be positive");
  }
  r.finish();
  return c;
}

std::string serialize_config(const RunConfig& c) {
  ordered j;
  auto& m = j["model"];
  auto& d = m["drift"];
  d["kind"] = c.model.drift.kind;
  if (c.model.drift.kind == "affine") {
    d["slope"] = c.model.drift.slope;
    d["intercept"] = c.model.drift.intercept;
  } else {
    d["coefficients"] = c.model.drift.coefficients;
  }
  auto& s = m["sigma"];
  const auto& sg = c.model.sigma;
  s["name"] = sg.name;
  if (sg.name == "linear") {
    s["slope"] = sg.slope;
    s["intercept"] = sg.intercept;
  } else if (sg.name == "constant") {
    s["value"] = sg.value;
  } else if (sg.name == "sine") {
    s["amplitude"] = sg.amplitude;
  } else {
    s["coefficients"] = sg.coefficients;
    s["zeros"] = sg.zeros;
    s["lipschitz"] = sg.lipschitz;
  }
  s["window"] = sg.window ? ordered(std::vector<double>{(*sg.window)[0], (*sg.window)[1]}) : ordered(nullptr);
  s["numeric"] = sg.numeric;
  s["anchors"] = sg.anchors;
  s["seriesOrder"] = sg.series_order;
  m["b"] = c.model.b;
  m["A"] = c.model.A;
  to_json(m["nu"], c.model.nu);
  to_json(j["initial"], c.initial);
  j["time"] = {{"horizon", c.time.horizon}, {"saveTimes", c.time.save_times}};
  const auto& sim = c.simulation;
  j["simulation"] = {{"dt", sim.dt},
                     {"epsilon", sim.epsilon},
                     {"nPaths", sim.n_paths},
                     {"seed", sim.seed},
                     {"blowupGuard", sim.blowup_guard},
                     {"maxFlaggedFraction", sim.max_flagged_fraction},
                     {"threads", sim.threads}};
  j["grid"] = {{"xmin", c.grid.xmin}, {"xmax", c.grid.xmax}, {"n", c.grid.n}};
  const auto& sv = c.solver;
  j["solver"] = {{"delta", sv.delta}, {"ymax", sv.ymax}, {"nQuad", sv.n_quad}, {"scheme", sv.scheme}, {"maxDt", sv.max_dt}};
  auto& cp = j["compare"];
  to_json(cp["a"], c.compare.a);
  to_json(cp["b"], c.compare.b);
  cp["time"] = c.compare.time;
  cp["floor"] = c.compare.floor;
  cp["bandFactor"] = c.compare.band_factor;
  const auto& tc = c.transform_check;
  j["transformCheck"] = {{"samples", tc.samples},
                         {"seed", tc.seed},
                         {"xRange", std::vector<double>{tc.x_range[0], tc.x_range[1]}},
                         {"yRange", std::vector<double>{tc.y_range[0], tc.y_range[1]}},
                         {"chainTolerance", tc.chain_tolerance},
                         {"oracleTolerance", tc.oracle_tolerance},
                         {"groupTolerance", tc.group_tolerance}};
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& config) {
  RunConfig copy = config;
  copy.simulation.threads = 1;  // execution detail; results do not depend on it
  const std::string text = serialize_config(copy);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> save_times(const RunConfig& c) {
  return c.time.save_times.empty() ? std::vector<double>{c.time.horizon} : c.time.save_times;
}

SigmaFunction build_sigma(const SigmaSpec& spec) {
  auto window = [&] {
    return spec.window ? Interval{(*spec.window)[0], (*spec.window)[1]} : Interval{};
  };
  std::optional<SigmaFunction> s;
  if (spec.name == "linear") {
    s = SigmaFunction::linear(spec.slope, spec.intercept);
  } else if (spec.name == "constant") {
    s = SigmaFunction::constant(spec.value);
  } else if (spec.name == "sine") {
    s = SigmaFunction::sine(spec.amplitude, window());
  } else if (spec.name == "polynomial") {
    s = SigmaFunction::polynomial(spec.coefficients, spec.zeros, window(), spec.lipschitz);
  } else {
    throw ConfigError("model.sigma.name is unknown: " + spec.name);
  }
  return spec.numeric ? s->without_closed_form() : *s;
}

namespace {

Density1D build_density(const DensitySpec& d) {
  if (d.kind == "normal") return Density1D::normal(d.mean, d.sd);
  if (d.kind == "lognormal") return Density1D::lognormal(d.log_mean, d.log_sd);
  if (d.kind == "uniform") return Density1D::uniform(d.lo, d.hi);
  throw ConfigError("density kind " + d.kind + " has no probability density");
}

}  // namespace

LevyMeasure build_measure(const MeasureSpec& spec) {
  if (spec.kind == "null") return LevyMeasure::null();
  if (spec.kind == "alphaStable") return LevyMeasure::alpha_stable(spec.alpha, spec.scale);
  if (spec.kind == "compoundPoisson") return LevyMeasure::compound_poisson(spec.rate, build_density(spec.jump));
  std::vector<LevyMeasure> parts;
  for (const auto& p : spec.parts) parts.push_back(build_measure(p));
  return LevyMeasure::sum(std::move(parts));
}

SdeModel build_model(const ModelSpec& spec) {
  TransformAtlas atlas(build_sigma(spec.sigma), spec.sigma.anchors, spec.sigma.series_order);
  LevyTriplet triplet(spec.b, spec.A, build_measure(spec.nu));
  if (spec.drift.kind == "affine") return SdeModel(AffineMap{spec.drift.slope, spec.drift.intercept}, std::move(atlas), triplet);
  auto coefficients = spec.drift.coefficients;
  auto f = [coefficients](double x) {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return acc;
  };
  return SdeModel(f, std::move(atlas), std::move(triplet));
}

SimulationPlan build_plan(const RunConfig& c) {
  SimulationPlan plan;
  if (c.initial.kind == "point") {
    plan.x0 = c.initial.x0;
  } else {
    plan.initial = build_density(c.initial);
  }
  plan.horizon = c.time.horizon;
  plan.dt = c.simulation.dt;
  plan.epsilon = c.simulation.epsilon;
  plan.n_paths = c.simulation.n_paths;
  plan.save_times = save_times(c);
  plan.seed = c.simulation.seed;
  plan.blowup_guard = c.simulation.blowup_guard;
  plan.threads = c.simulation.threads;
  return plan;
}

QuadratureParams build_quadrature(const SolverSpec& spec) { return {spec.delta, spec.ymax, spec.n_quad}; }

JumpScheme build_scheme(const SolverSpec& spec) {
  return spec.scheme == "pointwise" ? JumpScheme::kPointwise : JumpScheme::kConservative;
}

DensityGrid initial_density(const RunConfig& c) {
  if (c.initial.kind != "point") return DensityGrid::from_density(c.grid, build_density(c.initial));
  DensityGrid p(c.grid);
  const int j = c.grid.cell_of(c.initial.x0);
  if (j < 0) throw ConfigError("initial.x0 lies outside the grid");
  p.values[static_cast<std::size_t>(j)] = 1.0 / c.grid.dx();
  return p;
}

}  // namespace mfpe::cli
