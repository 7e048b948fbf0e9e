#include "mfpe/fpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfpe/error.hpp"

namespace mfpe {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

GridLocation locate_edge(const GridSpec& g, double x) {
  const double u = (x - g.xmin) / g.dx();
  if (!(u > 0.0)) return {-1, 0.0};
  if (u >= g.n) return {g.n, 0.0};
  const int c = std::min(static_cast<int>(u), g.n - 1);
  return {c, u - c};
}

GridLocation locate_centre(const GridSpec& g, double x) {
  const double u = (x - g.center(0)) / g.dx();
  if (u < -1.0 || u > g.n) return {GridLocation::kOutside, 0.0};
  const int c = std::clamp(static_cast<int>(std::floor(u)), -1, g.n - 1);
  return {c, u - c};
}

// Cumulative mass at the edges and monotone edge slopes of it (densities).
void cumulative(const std::vector<double>& p, double dx, std::vector<double>& m, std::vector<double>& d) {
  const auto n = p.size();
  m.assign(n + 1, 0.0);
  d.assign(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) m[j + 1] = m[j] + p[j] * dx;
  auto at = [&](std::ptrdiff_t j) { return j < 0 || j >= static_cast<std::ptrdiff_t>(n) ? 0.0 : p[static_cast<std::size_t>(j)]; };
  for (std::size_t i = 0; i <= n; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    const double left = at(k - 1), right = at(k);
    const double raw = (-at(k - 2) + 7.0 * left + 7.0 * right - at(k + 1)) / 12.0;
    d[i] = std::clamp(raw, 0.0, std::max(0.0, 3.0 * std::min(left, right)));
  }
}

// Cubic Hermite in cell c with end values m[c], m[c+1] and slopes d[c], d[c+1].
inline double hermite_mass(const std::vector<double>& m, const std::vector<double>& d, double dx, GridLocation loc,
                           int n) {
  if (loc.cell < 0) return 0.0;
  if (loc.cell >= n) return m[static_cast<std::size_t>(n)];
  const auto c = static_cast<std::size_t>(loc.cell);
  const double s = loc.s, s2 = s * s, s3 = s2 * s;
  return m[c] + (m[c + 1] - m[c]) * (3.0 * s2 - 2.0 * s3) + dx * (d[c] * (s3 - 2.0 * s2 + s) + d[c + 1] * (s3 - s2));
}

// Jump term on grid values; `exit_rate` receives the mass per unit time that
// jumps carry off the grid.
std::vector<double> jump_term(const FpeOperatorData& op, const std::vector<double>& p, double& exit_rate) {
  const int n = op.grid.n;
  const double dx = op.grid.dx();
  const std::size_t nk = op.nodes();
  std::vector<double> out(p.size(), 0.0);
  exit_rate = 0.0;
  if (nk == 0) return out;
  const double total_rate = op.total_rate();

  if (op.scheme == JumpScheme::kConservative) {
    std::vector<double> m, d, mk(static_cast<std::size_t>(n) + 1);
    cumulative(p, dx, m, d);
    const double total = m.back();
    for (std::size_t k = 0; k < nk; ++k) {
      const GridLocation* row = &op.edge_pullback[k * (static_cast<std::size_t>(n) + 1)];
      for (int i = 0; i <= n; ++i) mk[static_cast<std::size_t>(i)] = hermite_mass(m, d, dx, row[i], n);
      const double w = op.rule.weights[k] / dx;
      for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] += w * (mk[static_cast<std::size_t>(j) + 1] - mk[static_cast<std::size_t>(j)]);
      exit_rate += op.rule.weights[k] * (total - (mk.back() - mk.front()));
    }
  } else {
    // Monotone (Fritsch-Butland) cubic through the centres plus zero ghosts.
    std::vector<double> v(static_cast<std::size_t>(n) + 2, 0.0), slope(v.size(), 0.0);
    std::copy(p.begin(), p.end(), v.begin() + 1);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      const double l = v[i] - v[i - 1], r = v[i + 1] - v[i];
      if (l * r > 0.0) slope[i] = 2.0 * l * r / (l + r);
    }
    double before = 0.0;
    for (double x : p) before += x;
    double after = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
      const std::size_t base = k * static_cast<std::size_t>(n);
      const double w = op.rule.weights[k];
      for (int j = 0; j < n; ++j) {
        const GridLocation loc = op.centre_pullback[base + static_cast<std::size_t>(j)];
        if (loc.cell == GridLocation::kOutside) continue;
        const auto a = static_cast<std::size_t>(loc.cell + 1);
        const double s = loc.s, s2 = s * s, s3 = s2 * s;
        const double val = v[a] * (2.0 * s3 - 3.0 * s2 + 1.0) + v[a + 1] * (3.0 * s2 - 2.0 * s3) +
                           slope[a] * (s3 - 2.0 * s2 + s) + slope[a + 1] * (s3 - s2);
        const double contrib = w * op.jacobian[base + static_cast<std::size_t>(j)] * val;
        out[static_cast<std::size_t>(j)] += contrib;
        after += contrib;
      }
    }
    // No exact exit flux in this scheme: report the net mass change instead.
    exit_rate = (total_rate * before - after) * dx;
  }
  for (std::size_t j = 0; j < p.size(); ++j) out[j] -= total_rate * p[j];
  return out;
}

// Upwind transport; returns the flux through both ends (mass per unit time).
double transport_term(const FpeOperatorData& op, const std::vector<double>& p, std::vector<double>& rate) {
  const int n = op.grid.n;
  const double dx = op.grid.dx();
  std::vector<double> flux(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double v = op.velocity[static_cast<std::size_t>(i)];
    const double left = i > 0 ? p[static_cast<std::size_t>(i) - 1] : 0.0;
    const double right = i < n ? p[static_cast<std::size_t>(i)] : 0.0;
    flux[static_cast<std::size_t>(i)] = std::max(v, 0.0) * left + std::min(v, 0.0) * right;
  }
  for (int j = 0; j < n; ++j)
    rate[static_cast<std::size_t>(j)] -= (flux[static_cast<std::size_t>(j) + 1] - flux[static_cast<std::size_t>(j)]) / dx;
  return flux.back() - flux.front();
}

// Coupling of cell j to its neighbours in K d/dx(sigma d/dx(sigma p)), per dx^2.
struct DiffusionRow {
  double lower, diag, upper;
};

DiffusionRow diffusion_row(const FpeOperatorData& op, int j) {
  const double k = op.diffusivity / (op.grid.dx() * op.grid.dx());
  const auto u = static_cast<std::size_t>(j);
  const double sj = op.compensator[u];
  const double left = j > 0 ? op.compensator[u - 1] : 0.0;
  const double right = j + 1 < op.grid.n ? op.compensator[u + 1] : 0.0;
  return {k * op.sigma_edge[u] * left, -k * sj * (op.sigma_edge[u] + op.sigma_edge[u + 1]),
          k * op.sigma_edge[u + 1] * right};
}

// Mass per unit time diffusing out through both ends (ghost values are 0).
double diffusion_outflow(const FpeOperatorData& op, const std::vector<double>& p) {
  const double k = op.diffusivity / op.grid.dx();
  return k * (op.sigma_edge.front() * op.compensator.front() * p.front() +
              op.sigma_edge.back() * op.compensator.back() * p.back());
}

double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

FpeOperatorData assemble_operator(const SdeModel& model, const GridSpec& grid, const QuadratureParams& quad,
                                  JumpScheme scheme) {
  grid.validate();
  require(quad.delta > 0.0 && quad.delta < 1.0, "delta must lie in (0, 1)");
  require(quad.n_quad > 0, "nQuad must be positive");
  const auto& s = model.sigma();
  const auto& dom = s.domain();
  require(grid.xmin >= dom.lo && grid.xmax <= dom.hi, "grid extends beyond the sigma domain");

  FpeOperatorData op;
  op.grid = grid;
  op.scheme = scheme;
  op.quad = quad;
  const int n = grid.n;
  const double dx = grid.dx();
  const auto& nu = model.triplet.nu;
  const double A = model.triplet.A, b = model.triplet.b;

  // Zeros inside the grid must be cell edges; the edge then takes the exact zero.
  std::vector<double> edges(static_cast<std::size_t>(n) + 1);
  std::vector<char> zero_edge(edges.size(), 0);
  for (int i = 0; i <= n; ++i) edges[static_cast<std::size_t>(i)] = grid.edge(i);
  for (double z : s.zeros()) {
    if (z < grid.xmin || z > grid.xmax) continue;
    const auto i = static_cast<std::size_t>(std::lround((z - grid.xmin) / dx));
    require(std::abs(edges[i] - z) <= 1e-12 * std::max(1.0, std::abs(z)),
            "sigma zero " + std::to_string(z) + " is not on a cell edge");
    edges[i] = z;
    zero_edge[i] = 1;
  }

  if (!nu.is_null()) {
    op.quad.ymax = quad.ymax > 0.0 ? quad.ymax : choose_ymax(nu, quad.delta);
    require(op.quad.ymax > quad.delta, "ymax must exceed delta");
    op.rule = measure_quadrature(nu, quad.delta, op.quad.ymax, quad.n_quad);
    op.tail_rate = nu.tail_mass(op.quad.ymax);
    op.c2 = 0.5 * small_jump_second_moment(nu, quad.delta);
    for (std::size_t k = 0; k < op.rule.size(); ++k)
      if (std::abs(op.rule.nodes[k]) < 1.0) op.c1 += op.rule.weights[k] * op.rule.nodes[k];
  }
  op.diffusivity = 0.5 * A + op.c2;

  op.drift_coef.resize(static_cast<std::size_t>(n));
  op.diff_coef.resize(static_cast<std::size_t>(n));
  op.compensator.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double x = grid.center(j), sx = s.value(x);
    const auto u = static_cast<std::size_t>(j);
    op.drift_coef[u] = model.drift(x) + b * sx + 0.5 * A * sx * s.derivative1(x);
    op.diff_coef[u] = 0.5 * A * sx * sx;
    op.compensator[u] = sx;
  }
  op.sigma_edge.resize(edges.size());
  op.velocity.resize(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    op.sigma_edge[i] = zero_edge[i] ? 0.0 : s.value(edges[i]);
    op.velocity[i] = model.drift(edges[i]) + (b - op.c1) * op.sigma_edge[i];
  }

  const std::size_t nk = op.rule.size();
  op.pullback.resize(nk * static_cast<std::size_t>(n));
  op.jacobian.resize(op.pullback.size());
  for (std::size_t k = 0; k < nk; ++k) {
    const double y = -op.rule.nodes[k];
    for (int j = 0; j < n; ++j) {
      const std::size_t at = k * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
      const double x = grid.center(j);
      op.pullback[at] = h_tilde(model.atlas, x, y);
      op.jacobian[at] = h_tilde_dx(model.atlas, x, y);
    }
  }

  if (nk > 0) {
    double ymin = std::numeric_limits<double>::infinity();
    for (double y : op.rule.nodes) ymin = std::min(ymin, std::abs(y));
    double worst = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
      if (std::abs(op.rule.nodes[k]) > ymin * (1.0 + 1e-12)) continue;
      for (int j = 0; j < n; ++j)
        worst = std::max(worst, std::abs(op.pullback[k * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] -
                                         grid.center(j)));
    }
    if (worst > 10.0 * dx)
      throw Error(ErrorCode::kGridTooCoarse, "smallest jump moves a point " + std::to_string(worst / dx) + " cells");
  }

  if (scheme == JumpScheme::kConservative) {
    op.edge_pullback.resize(nk * edges.size());
    for (std::size_t k = 0; k < nk; ++k) {
      const double y = -op.rule.nodes[k];
      for (std::size_t i = 0; i < edges.size(); ++i) {
        GridLocation loc;
        if (zero_edge[i]) {
          loc = {static_cast<int>(i), 0.0};  // fixed point; cell n reads the total mass
        } else {
          loc = locate_edge(grid, h_tilde(model.atlas, edges[i], y));
        }
        op.edge_pullback[k * edges.size() + i] = loc;
      }
    }
  } else {
    op.centre_pullback.resize(op.pullback.size());
    for (std::size_t at = 0; at < op.pullback.size(); ++at) op.centre_pullback[at] = locate_centre(grid, op.pullback[at]);
  }
  return op;
}

double stability_limit(const FpeOperatorData& op) {
  double vmax = 0.0;
  for (double v : op.velocity) vmax = std::max(vmax, std::abs(v));
  for (double v : op.drift_coef) vmax = std::max(vmax, std::abs(v));
  double limit = std::numeric_limits<double>::infinity();
  if (vmax > 0.0) limit = std::min(limit, op.grid.dx() / vmax);
  const double rate = op.total_rate();
  if (rate > 0.0) limit = std::min(limit, 1.0 / rate);
  return 0.8 * limit;
}

std::vector<double> apply_jump(const FpeOperatorData& op, const std::vector<double>& p) {
  require(p.size() == static_cast<std::size_t>(op.grid.n), "density size does not match the operator grid");
  double exit_rate = 0.0;
  return jump_term(op, p, exit_rate);
}

std::vector<double> apply_operator(const FpeOperatorData& op, const std::vector<double>& p) {
  auto rate = apply_jump(op, p);
  transport_term(op, p, rate);
  const int n = op.grid.n;
  for (int j = 0; j < n; ++j) {
    const auto r = diffusion_row(op, j);
    const auto u = static_cast<std::size_t>(j);
    rate[u] += r.diag * p[u] + (j > 0 ? r.lower * p[u - 1] : 0.0) + (j + 1 < n ? r.upper * p[u + 1] : 0.0);
  }
  return rate;
}

DensityGrid step(const FpeOperatorData& op, const DensityGrid& p, double dt, LeakAccount* leak) {
  if (!(p.grid == op.grid)) throw Error(ErrorCode::kGridMismatch, "density grid does not match the operator grid");
  require(dt > 0.0 && std::isfinite(dt), "step needs dt > 0");
  const int n = op.grid.n;
  const double dx = op.grid.dx();
  const auto& v = p.values;

  double exit_rate = 0.0;
  std::vector<double> rate = jump_term(op, v, exit_rate);
  const double boundary_rate = transport_term(op, v, rate);
  double mass = 0.0;
  for (double x : v) mass += x * dx;

  DensityGrid out(op.grid, p.time + dt);
  std::vector<double>& q = out.values;
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = v[j] + dt * rate[j];

  double diffused = 0.0;
  if (op.diffusivity > 0.0) {
    // (I - dt D) q_new = q by the Thomas algorithm.
    std::vector<double> c(static_cast<std::size_t>(n)), r(static_cast<std::size_t>(n));
    double prev_c = 0.0, prev_r = 0.0;
    for (int j = 0; j < n; ++j) {
      const auto row = diffusion_row(op, j);
      const auto u = static_cast<std::size_t>(j);
      const double lower = -dt * row.lower, diag = 1.0 - dt * row.diag, upper = -dt * row.upper;
      const double denom = diag - lower * prev_c;
      c[u] = upper / denom;
      r[u] = (q[u] - lower * prev_r) / denom;
      prev_c = c[u];
      prev_r = r[u];
    }
    for (int j = n - 1; j >= 0; --j) {
      const auto u = static_cast<std::size_t>(j);
      q[u] = r[u] - (j + 1 < n ? c[u] * q[u + 1] : 0.0);
    }
    diffused = dt * diffusion_outflow(op, q);
  }

  if (leak) {
    leak->boundary += dt * boundary_rate + diffused;
    leak->jump_exit += dt * exit_rate;
    leak->tail += dt * op.tail_rate * mass;
  }
  const double before = sup_norm(v), after = sup_norm(q);
  if (!std::isfinite(after) || after > 2.0 * before + 1e-300)
    throw Error(ErrorCode::kInstability, "sup norm grew from " + std::to_string(before) + " to " + std::to_string(after) +
                                             " in one step");
  return out;
}

FpeSolution solve(const FpeOperatorData& op, const DensityGrid& p0, double horizon, const StepControl& ctl) {
  if (!(p0.grid == op.grid)) throw Error(ErrorCode::kGridMismatch, "initial density grid does not match the operator grid");
  require(horizon >= 0.0 && std::isfinite(horizon), "horizon must be nonnegative");
  FpeSolution sol;
  sol.max_negativity = std::max(0.0, -p0.min_value());
  if (horizon == 0.0) {
    sol.snapshots.push_back(p0);
    return sol;
  }
  std::vector<double> times = ctl.save_times.empty() ? std::vector<double>{horizon} : ctl.save_times;
  require(std::is_sorted(times.begin(), times.end()) && std::adjacent_find(times.begin(), times.end()) == times.end(),
          "save times must be strictly increasing");
  require(times.front() >= 0.0 && times.back() <= horizon, "save times must lie in [0, horizon]");

  const double cap = ctl.max_dt > 0.0 ? ctl.max_dt : horizon / 1000.0;
  sol.dt = std::min(stability_limit(op), cap);

  DensityGrid p = p0;
  double t = 0.0;
  for (double target : times) {
    const double gap = target - t;
    const auto steps = gap > 0.0 ? static_cast<long>(std::ceil(gap / sol.dt * (1.0 - 1e-12))) : 0L;
    for (long i = 0; i < steps; ++i) {
      p = step(op, p, gap / static_cast<double>(steps), &sol.leak);
      sol.max_negativity = std::max(sol.max_negativity, -p.min_value());
    }
    sol.steps += steps;
    t = target;
    p.time = target;
    sol.snapshots.push_back(p);
  }
  return sol;
}

FpeSolution solve(const SdeModel& model, const DensityGrid& p0, double horizon, const StepControl& ctl,
                  const QuadratureParams& quad, JumpScheme scheme) {
  return solve(assemble_operator(model, p0.grid, quad, scheme), p0, horizon, ctl);
}

std::vector<double> kernel_apply(const FpeOperatorData& op, const SigmaFunction& sigma, const ScalarFn& p,
                                 const ScalarFn& dp) {
  const int n = op.grid.n;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const double x = op.grid.center(j), px = p(x);
    const double flux_slope = sigma.derivative1(x) * px + sigma.value(x) * dp(x);
    double acc = 0.0;
    for (std::size_t k = 0; k < op.nodes(); ++k) {
      const std::size_t at = k * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
      const double y = op.rule.nodes[k];
      double term = op.jacobian[at] * p(op.pullback[at]) - px;
      if (std::abs(y) < 1.0) term += y * flux_slope;
      acc += op.rule.weights[k] * term;
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

std::vector<double> generator_apply(const TransformAtlas& atlas, const QuadratureRule& rule, const GridSpec& grid,
                                    const ScalarFn& phi, const ScalarFn& dphi) {
  const auto& s = atlas.sigma();
  std::vector<double> out(static_cast<std::size_t>(grid.n), 0.0);
  for (int j = 0; j < grid.n; ++j) {
    const double x = grid.center(j), fx = phi(x), slope = dphi(x) * s.value(x);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const double y = rule.nodes[k];
      double term = phi(h_tilde(atlas, x, y)) - fx;
      if (std::abs(y) < 1.0) term -= slope * y;
      acc += rule.weights[k] * term;
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

}  // namespace mfpe
