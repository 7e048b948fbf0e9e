#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include <mfpe/error.hpp>
#include <mfpe/fpe.hpp>
#include <mfpe/io.hpp>
#include <mfpe/sde.hpp>
#include <mfpe/transform.hpp>
#include <mfpe/validate.hpp>

#include "config.hpp"

namespace mfpe::cli {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

namespace {

struct LoadedConfig {
  RunConfig config;
  fs::path path;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

LoadedConfig load(const std::string& path, const std::optional<int>& threads) {
  LoadedConfig c{};
  c.path = path;
  try {
    c.config = parse_config(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (threads) {
    if (*threads < 1) throw ConfigError("--threads must be at least 1");
    c.config.simulation.threads = *threads;
  }
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// Creates <out>/<key>/<command>, refusing a nonempty one unless forced.
fs::path prepare_run_dir(const CommandOptions& opt, const std::string& key, const std::string& command) {
  const fs::path dir = fs::path(opt.out_dir) / key / command;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!opt.force) throw ConfigError("output directory " + dir.string() + " already exists; pass --force to overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

ordered grid_json(const GridSpec& g) { return {{"xmin", g.xmin}, {"xmax", g.xmax}, {"n", g.n}}; }

ordered leak_json(const LeakAccount& l) {
  return {{"boundary", l.boundary}, {"jumpExit", l.jump_exit}, {"tail", l.tail}};
}

std::string dump(const ordered& j) { return j.dump(2) + "\n"; }

std::string density_text(const DensityGrid& d) {
  std::ostringstream s;
  write_density_csv(d, s);
  return s.str();
}

FpeSolution run_solver(const RunConfig& c, const std::vector<double>& times) {
  const SdeModel model = build_model(c.model);
  const auto op = assemble_operator(model, c.grid, build_quadrature(c.solver), build_scheme(c.solver));
  StepControl ctl;
  ctl.save_times = times;
  ctl.max_dt = c.solver.max_dt;
  return solve(op, initial_density(c), c.time.horizon, ctl);
}

// ---- simulate ------------------------------------------------------------

int cmd_simulate(const LoadedConfig& lc, const CommandOptions& opt, std::ostream& log) {
  const RunConfig& c = lc.config;
  const std::string hash = config_hash(c);
  const SdeModel model = build_model(c.model);
  const SimulationPlan plan = build_plan(c);
  const fs::path dir = prepare_run_dir(opt, hash, "simulate");
  write_text(dir / "config.json", serialize_config(c));

  const PathEnsemble ens = simulate(model, plan);

  {
    std::ofstream csv(dir / "ensemble.csv", std::ios::binary);
    write_ensemble_csv(ens, csv);
    std::ofstream bin(dir / "ensemble.bin", std::ios::binary);
    write_ensemble_binary(ens, bin);
  }
  std::vector<std::uint64_t> flagged_ids;
  std::size_t k = 0;
  for (std::uint64_t id = 0; id < static_cast<std::uint64_t>(ens.requested); ++id) {
    if (k < ens.path_ids.size() && ens.path_ids[k] == id) {
      ++k;
    } else {
      flagged_ids.push_back(id);
    }
  }
  const bool too_many = ens.flagged_fraction() > c.simulation.max_flagged_fraction;
  ordered report;
  report["configHash"] = hash;
  report["times"] = ens.times;
  report["requested"] = ens.requested;
  report["retained"] = ens.retained();
  report["flagged"] = ens.flagged;
  report["flaggedFraction"] = ens.flagged_fraction();
  report["maxFlaggedFraction"] = c.simulation.max_flagged_fraction;
  report["flaggedPathIds"] = flagged_ids;
  report["status"] = too_many ? "too many flagged paths" : "ok";
  write_text(dir / "simulate.json", dump(report));

  log << "simulate: " << ens.retained() << " of " << ens.requested << " paths retained, " << ens.flagged
      << " flagged -> " << dir.string() << "\n";
  if (too_many) {
    log << "simulate: flagged fraction " << ens.flagged_fraction() << " exceeds maxFlaggedFraction "
        << c.simulation.max_flagged_fraction << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// ---- solve ---------------------------------------------------------------

int cmd_solve(const LoadedConfig& lc, const CommandOptions& opt, std::ostream& log) {
  const RunConfig& c = lc.config;
  const std::string hash = config_hash(c);
  const auto times = save_times(c);
  // Build everything that can reject the config before touching the disk.
  const SdeModel model = build_model(c.model);
  const DensityGrid p0 = initial_density(c);
  const fs::path dir = prepare_run_dir(opt, hash, "solve");
  write_text(dir / "config.json", serialize_config(c));

  ordered manifest;
  manifest["configHash"] = hash;
  manifest["grid"] = grid_json(c.grid);
  manifest["scheme"] = c.solver.scheme;
  try {
    const auto op = assemble_operator(model, c.grid, build_quadrature(c.solver), build_scheme(c.solver));
    StepControl ctl;
    ctl.save_times = times;
    ctl.max_dt = c.solver.max_dt;
    manifest["stabilityLimit"] = stability_limit(op);
    manifest["quadrature"] = {{"nodes", op.nodes()},
                              {"delta", op.quad.delta},
                              {"ymax", op.quad.ymax},
                              {"totalRate", op.total_rate()},
                              {"tailRate", op.tail_rate}};
    const FpeSolution sol = solve(op, p0, c.time.horizon, ctl);
    ordered snaps = ordered::array();
    for (std::size_t i = 0; i < sol.snapshots.size(); ++i) {
      const std::string name = "density_" + std::to_string(i) + ".csv";
      write_text(dir / name, density_text(sol.snapshots[i]));
      snaps.push_back({{"time", sol.snapshots[i].time}, {"file", name}, {"mass", sol.snapshots[i].mass()}});
    }
    manifest["times"] = times;
    manifest["snapshots"] = snaps;
    manifest["leakBudget"] = sol.leak_budget();
    manifest["leak"] = leak_json(sol.leak);
    manifest["maxNegativity"] = sol.max_negativity;
    manifest["dt"] = sol.dt;
    manifest["steps"] = sol.steps;
    manifest["status"] = "ok";
    write_text(dir / "manifest.json", dump(manifest));
    log << "solve: " << sol.steps << " steps of dt " << sol.dt << ", leak budget " << sol.leak_budget() << " -> "
        << dir.string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    if (!is_numerical(e.code())) throw;
    manifest["leakBudget"] = nullptr;
    manifest["status"] = e.what();
    write_text(dir / "manifest.json", dump(manifest));
    throw;
  }
}

// ---- compare -------------------------------------------------------------

struct Evaluated {
  DensityGrid density;
  double band = 0.0;
  double flagged = 0.0;
  double leak = 0.0;
  bool too_many_flagged = false;
  std::string label;
};

Evaluated evaluate(const SourceSpec& src, const LoadedConfig& lc, double t) {
  const RunConfig& c = lc.config;
  Evaluated out;
  out.label = src.kind;
  if (src.kind == "mc") {
    RunConfig copy = c;
    copy.time.save_times = {t};
    const PathEnsemble ens = simulate(build_model(c.model), build_plan(copy));
    out.density = empirical_density(ens, 0, c.grid, src.smooth);
    out.band = mc_stderr_band(out.density, ens.requested);
    out.flagged = ens.flagged_fraction();
    out.too_many_flagged = out.flagged > c.simulation.max_flagged_fraction;
  } else if (src.kind == "fpe") {
    const FpeSolution sol = run_solver(c, {t});
    out.density = sol.snapshots.back();
    out.leak = sol.leak_budget();
  } else if (src.kind == "reference") {
    out.density = analytic_reference(src.reference, src.params, c.grid);
    out.density.time = t;
    out.label += ":" + src.reference;
  } else {
    fs::path p = src.path;
    if (p.is_relative()) p = lc.path.parent_path() / p;
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("compare source file " + p.string() + " cannot be read");
    out.density = read_density_csv(in, t);
    out.label += ":" + src.path;
  }
  return out;
}

std::string table_row(const char* name, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "  %-16s %14.6e\n", name, value);
  return buf;
}

int cmd_compare(const std::vector<LoadedConfig>& cfgs, const CommandOptions& opt, std::ostream& log) {
  const LoadedConfig& la = cfgs.front();
  const LoadedConfig& lb = cfgs.back();
  const RunConfig& c = la.config;
  const SourceSpec& sa = c.compare.a;
  const SourceSpec& sb = cfgs.size() > 1 ? lb.config.compare.a : c.compare.b;
  const double t = c.compare.time < 0.0 ? c.time.horizon : c.compare.time;
  std::string key = config_hash(c);
  if (cfgs.size() > 1) key += "-" + config_hash(lb.config);

  const fs::path dir = prepare_run_dir(opt, key, "compare");
  write_text(dir / "config.json", serialize_config(c));
  if (cfgs.size() > 1) write_text(dir / "config_b.json", serialize_config(lb.config));

  const Evaluated a = evaluate(sa, la, t);
  const Evaluated b = evaluate(sb, lb, t);
  write_text(dir / "a.csv", density_text(a.density));
  write_text(dir / "b.csv", density_text(b.density));

  ComparisonReport r = compare(a.density, b.density);
  r = judge(r, a.band + b.band, MassAccounting{a.flagged + b.flagged, a.leak + b.leak},
            ToleranceRule{c.compare.floor, c.compare.band_factor});
  write_text(dir / "report.json", to_json(r));

  log << "compare " << a.label << " vs " << b.label << " at t = " << t << "\n";
  log << table_row("l1Distance", r.l1_distance) << table_row("ksStatistic", r.ks_statistic)
      << table_row("mcStdErrBand", r.mc_stderr_band) << table_row("mcFlagged", r.mass.mc_flagged)
      << table_row("fpeLeak", r.mass.fpe_leak) << table_row("tolerance", r.tolerance);
  log << "  verdict          " << (r.pass ? "pass" : "fail") << "\n";
  if (a.too_many_flagged || b.too_many_flagged) {
    log << "compare: flagged fraction exceeds maxFlaggedFraction\n";
    return kExitNumerical;
  }
  return r.pass ? kExitOk : kExitTolerance;
}

// ---- transform-check -----------------------------------------------------

struct Check {
  double max_error = 0.0;
  double tolerance = 0.0;
  long failures = 0;

  void add(double err) {
    if (!(err <= tolerance)) ++failures;
    if (!(err <= max_error)) max_error = err;  // NaN sticks
  }
  ordered json() const {
    return {{"maxError", max_error}, {"tolerance", tolerance}, {"failures", failures}, {"pass", failures == 0}};
  }
};

int cmd_transform_check(const LoadedConfig& lc, const CommandOptions& opt, std::ostream& log) {
  const RunConfig& c = lc.config;
  const auto& tc = c.transform_check;
  const std::string hash = config_hash(c);
  const TransformAtlas atlas(build_sigma(c.model.sigma), c.model.sigma.anchors, c.model.sigma.series_order);
  const fs::path dir = prepare_run_dir(opt, hash, "transform-check");
  write_text(dir / "config.json", serialize_config(c));

  Check chain{0.0, tc.chain_tolerance}, oracle{0.0, tc.oracle_tolerance}, group{0.0, tc.group_tolerance};
  long confinement = 0, errors = 0, skipped = 0;
  std::string first_error;
  RngState rng(tc.seed);
  const auto& sigma = atlas.sigma();
  for (int s = 0; s < tc.samples; ++s) {
    const double x = tc.x_range[0] + (tc.x_range[1] - tc.x_range[0]) * rng.uniform();
    const double y = tc.y_range[0] + (tc.y_range[1] - tc.y_range[0]) * rng.uniform();
    const double split = rng.uniform();
    if (!sigma.domain().contains(x)) {
      ++skipped;
      continue;
    }
    try {
      const double z = h_tilde(atlas, x, y);
      if (atlas.zero_index(x)) {
        // Fixed point of the flow: only confinement applies.
        if (z != x) ++confinement;
        continue;
      }
      const IntervalValue hx = h_forward(atlas, x);
      const IntervalValue hz = h_forward(atlas, z);
      if (hz.interval != hx.interval) {
        ++confinement;
        continue;
      }
      chain.add(std::abs(hz.value - hx.value - y));
      oracle.add(std::abs(z - marcus_map_ode(sigma, y, x)));
      const double y1 = split * y;
      group.add(std::abs(h_tilde(atlas, h_tilde(atlas, x, y1), y - y1) - z));
    } catch (const Error& e) {
      if (!is_numerical(e.code()) && e.code() != ErrorCode::kOutOfDomain) throw;
      if (errors++ == 0) first_error = e.what();
    }
  }
  const bool pass = chain.failures == 0 && oracle.failures == 0 && group.failures == 0 && confinement == 0 &&
                    errors == 0;
  ordered report;
  report["configHash"] = hash;
  report["sigma"] = sigma.name();
  report["samples"] = tc.samples;
  report["skippedOutsideDomain"] = skipped;
  report["chain"] = chain.json();
  report["oracle"] = oracle.json();
  report["group"] = group.json();
  report["confinement"] = {{"violations", confinement}, {"pass", confinement == 0}};
  report["errors"] = {{"count", errors}, {"first", first_error}};
  report["verdict"] = pass ? "pass" : "fail";
  write_text(dir / "transform_check.json", dump(report));

  char buf[160];
  std::snprintf(buf, sizeof buf, "transform-check %s: chain %.3e, oracle %.3e, group %.3e, confinement %ld, errors %ld\n",
                sigma.name().c_str(), chain.max_error, oracle.max_error, group.max_error, confinement, errors);
  log << buf << "  verdict " << (pass ? "pass" : "fail") << "\n";
  return pass ? kExitOk : kExitTolerance;
}

}  // namespace

int run_command(const std::string& command, const CommandOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    if (opt.config_paths.empty()) throw ConfigError("--config is required");
    const std::size_t allowed = command == "compare" ? 2 : 1;
    if (opt.config_paths.size() > allowed)
      throw ConfigError(command + " takes " + (allowed == 1 ? "one --config" : "at most two --config files"));
    std::vector<LoadedConfig> cfgs;
    for (const auto& p : opt.config_paths) cfgs.push_back(load(p, opt.threads));

    if (command == "simulate") return cmd_simulate(cfgs.front(), opt, log);
    if (command == "solve") return cmd_solve(cfgs.front(), opt, log);
    if (command == "compare") return cmd_compare(cfgs, opt, log);
    if (command == "transform-check") return cmd_transform_check(cfgs.front(), opt, log);
    throw ConfigError("unknown command " + command);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    if (is_numerical(e.code())) {
      err << "numerical failure: " << e.what() << "\n";
      return kExitNumerical;
    }
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace mfpe::cli
