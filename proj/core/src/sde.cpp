#include "mfpe/sde.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>

#include <Eigen/Core>

#include "mfpe/error.hpp"

namespace mfpe {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

struct PathKernel {
  const SdeModel& model;
  const SimulationPlan& plan;
  double comp;     // b + c_eps
  double half_a;   // A / 2
  double sqrt_a;
  bool has_jumps;

  // Returns false when the path blew up.
  bool run(std::uint64_t id, double* out, Eigen::ArrayXd& factor) const {
    RngState rng = RngState(plan.seed).split(id);
    const double x0 = plan.initial ? plan.initial->sample(rng) : plan.x0;
    const auto& s = model.sigma();
    const auto& affine = s.affine();
    std::optional<JumpStream> stream;
    if (has_jumps) stream.emplace(model.triplet.nu, plan.horizon, plan.epsilon, rng.split(0));

    // Affine sigma with affine drift and no Brownian part: the Euler step is
    // x += (p x + q) h and the Marcus map a dilation about the zero (or a
    // shift), with per-jump factors from one vectorized exp per batch.
    if (affine && model.affine_drift && sqrt_a == 0.0) {
      const double p = model.affine_drift->slope + comp * affine->slope;
      const double q = model.affine_drift->intercept + comp * affine->intercept;
      const double slope = affine->slope;
      const double center = slope != 0.0 ? s.zeros().front() : 0.0;
      auto prepare = [&](const JumpBuffer& b) {
        const Eigen::Map<const Eigen::ArrayXd> y(b.sizes.data(), static_cast<Eigen::Index>(b.size()));
        if (slope != 0.0) {
          factor = (y * slope).exp();
        } else {
          factor = y * affine->intercept;
        }
      };
      // Both updates are written as x * m + c so only one FMA each sits on the
      // dependency chain through x.
      auto euler = [&](double& x, double h) { x = std::fma(x, 1.0 + p * h, q * h); };
      auto jump = [&](double& x, std::size_t k) {
        const double f = factor[static_cast<Eigen::Index>(k)];
        x = slope != 0.0 ? std::fma(x, f, center * (1.0 - f)) : x + f;
      };
      if (p == 0.0 && q == 0.0) return march<false>(x0, out, stream, prepare, euler, jump);
      return march<true>(x0, out, stream, prepare, euler, jump);
    }

    const JumpBuffer* current = nullptr;
    auto prepare_generic = [&](const JumpBuffer& b) { current = &b; };
    auto euler = [&](double& x, double h) {
      const double sx = s.value(x);
      double a = model.drift(x) + comp * sx;
      if (half_a > 0.0) a += half_a * sx * s.derivative1(x);
      x += a * h;
      if (sqrt_a > 0.0) x += sx * sqrt_a * std::sqrt(h) * rng.normal();
    };
    auto jump = [&](double& x, std::size_t k) { x = h_tilde(model.atlas, x, current->sizes[k]); };
    try {
      return march<true>(x0, out, stream, prepare_generic, euler, jump);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonConvergence || e.code() == ErrorCode::kOutOfDomain) return false;
      throw;
    }
  }

  // Euler steps on the save-time mesh with every jump time inserted. Without
  // `kFlow` the continuous part is the identity and only jumps are applied.
  template <bool kFlow, class Prepare, class Euler, class Jump>
  bool march(double x, double* out, std::optional<JumpStream>& stream, Prepare&& prepare, Euler&& euler,
             Jump&& jump) const {
    const double guard = plan.blowup_guard;
    const double* times = nullptr;
    std::size_t k = 0, n_batch = 0;
    auto refill = [&] {
      const JumpBuffer& b = stream->next();
      prepare(b);
      times = b.times.data();
      k = 0;
      n_batch = b.size();
      return n_batch > 0;
    };
    bool more = stream && refill();

    double t = 0.0;
    for (std::size_t si = 0; si < plan.save_times.size(); ++si) {
      const double target = plan.save_times[si];
      if constexpr (!kFlow) {
        while (more && times[k] <= target) {
          jump(x, k);
          if (!(std::abs(x) <= guard)) return false;
          if (++k == n_batch) more = refill();
        }
        out[si] = x;
        continue;
      }
      const double gap = target - t;
      const auto steps = gap > 0.0 ? static_cast<long>(std::ceil(gap / plan.dt * (1.0 - 1e-12))) : 0L;
      const double t0 = t;
      for (long n = 0; n < steps; ++n) {
        const double t_end =
            (n + 1 == steps) ? target : t0 + gap * static_cast<double>(n + 1) / static_cast<double>(steps);
        while (more && times[k] <= t_end) {
          euler(x, times[k] - t);
          t = times[k];
          jump(x, k);
          if (!(std::abs(x) <= guard)) return false;
          if (++k == n_batch) more = refill();
        }
        euler(x, t_end - t);
        t = t_end;
        if (!(std::abs(x) <= guard)) return false;
      }
      out[si] = x;
    }
    return true;
  }
};

}  // namespace

SdeModel::SdeModel(std::function<double(double)> f, TransformAtlas atlas_, LevyTriplet triplet_)
    : drift(std::move(f)), atlas(std::move(atlas_)), triplet(std::move(triplet_)) {
  require(static_cast<bool>(drift), "model needs a drift function");
}

SdeModel::SdeModel(AffineMap f, TransformAtlas atlas_, LevyTriplet triplet_)
    : SdeModel(std::function<double(double)>(f), std::move(atlas_), std::move(triplet_)) {
  affine_drift = f;
}

void SimulationPlan::validate() const {
  require(n_paths > 0, "nPaths must be positive");
  require(horizon > 0.0 && std::isfinite(horizon), "horizon must be positive");
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(!save_times.empty(), "saveTimes must not be empty");
  require(std::is_sorted(save_times.begin(), save_times.end()) &&
              std::adjacent_find(save_times.begin(), save_times.end()) == save_times.end(),
          "saveTimes must be strictly increasing");
  require(save_times.front() >= 0.0 && save_times.back() <= horizon, "saveTimes must lie in [0, horizon]");
  require(blowup_guard > 0.0, "blowupGuard must be positive");
  require(threads >= 1, "threads must be at least 1");
  require(std::isfinite(x0), "x0 must be finite");
}

double continuous_drift(const SdeModel& model, double epsilon, double x) {
  const auto& s = model.sigma();
  const double c_eps = -small_jump_compensation(model.triplet.nu, epsilon);
  const double sx = s.value(x);
  return model.drift(x) + (model.triplet.b + c_eps) * sx + 0.5 * model.triplet.A * sx * s.derivative1(x);
}

PathEnsemble simulate(const SdeModel& model, const SimulationPlan& plan) {
  plan.validate();
  const auto n_paths = static_cast<std::size_t>(plan.n_paths);
  const std::size_t n_times = plan.save_times.size();

  const PathKernel kernel{model,
                          plan,
                          model.triplet.b - small_jump_compensation(model.triplet.nu, plan.epsilon),
                          0.5 * model.triplet.A,
                          std::sqrt(model.triplet.A),
                          !model.triplet.nu.is_null()};

  std::vector<double> all(n_paths * n_times);
  std::vector<unsigned char> good(n_paths);
  const auto workers = static_cast<std::size_t>(std::min<std::int64_t>(plan.threads, plan.n_paths));
  std::vector<std::exception_ptr> errors(workers);

  auto work = [&](std::size_t w) {
    try {
      Eigen::ArrayXd scratch;
      const std::size_t begin = n_paths * w / workers, end = n_paths * (w + 1) / workers;
      for (std::size_t p = begin; p < end; ++p) good[p] = kernel.run(p, &all[p * n_times], scratch) ? 1 : 0;
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PathEnsemble ens;
  ens.times = plan.save_times;
  ens.seed = plan.seed;
  ens.epsilon = plan.epsilon;
  ens.requested = plan.n_paths;
  ens.states.reserve(all.size());
  for (std::size_t p = 0; p < n_paths; ++p) {
    if (!good[p]) {
      ++ens.flagged;
      continue;
    }
    ens.path_ids.push_back(p);
    ens.states.insert(ens.states.end(), all.begin() + static_cast<std::ptrdiff_t>(p * n_times),
                      all.begin() + static_cast<std::ptrdiff_t>((p + 1) * n_times));
  }
  return ens;
}

double marcus_jump_apply(const SdeModel& model, double x_left, double jump) { return h_tilde(model.atlas, x_left, jump); }

DensityGrid empirical_density(const PathEnsemble& ensemble, int time_index, const GridSpec& grid, bool smooth) {
  grid.validate();
  if (time_index < 0 || static_cast<std::size_t>(time_index) >= ensemble.times.size())
    throw Error(ErrorCode::kInvalidArgument, "time index out of range");
  if (ensemble.requested <= 0 || ensemble.retained() == 0)
    throw Error(ErrorCode::kEmptyEnsemble, "ensemble has no retained paths");

  DensityGrid out(grid, ensemble.times[static_cast<std::size_t>(time_index)]);
  const double weight = 1.0 / (static_cast<double>(ensemble.requested) * grid.dx());
  for (std::size_t p = 0; p < ensemble.retained(); ++p) {
    const int j = grid.cell_of(ensemble.state(p, static_cast<std::size_t>(time_index)));
    if (j >= 0) out.values[static_cast<std::size_t>(j)] += weight;
  }
  if (!smooth) return out;

  // Silverman's rule from the retained sample.
  std::vector<double> xs(ensemble.retained());
  for (std::size_t p = 0; p < xs.size(); ++p) xs[p] = ensemble.state(p, static_cast<std::size_t>(time_index));
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / std::max(1.0, n - 1.0));
  auto quantile = [&](double q) {
    auto it = xs.begin() + static_cast<std::ptrdiff_t>(q * (n - 1.0));
    std::nth_element(xs.begin(), it, xs.end());
    return *it;
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0)) return out;

  const double dx = grid.dx();
  const int reach = static_cast<int>(std::ceil(5.0 * h / dx));
  std::vector<double> kernel(static_cast<std::size_t>(2 * reach + 1));
  auto cdf = [&](double u) { return 0.5 * std::erfc(-u / (h * std::sqrt(2.0))); };
  for (int m = -reach; m <= reach; ++m) kernel[static_cast<std::size_t>(m + reach)] = cdf((m + 0.5) * dx) - cdf((m - 0.5) * dx);
  std::vector<double> smoothed(out.values.size(), 0.0);
  for (int j = 0; j < grid.n; ++j) {
    const double v = out.values[static_cast<std::size_t>(j)];
    if (v == 0.0) continue;
    for (int m = -reach; m <= reach; ++m) {
      const int k = j + m;
      if (k >= 0 && k < grid.n) smoothed[static_cast<std::size_t>(k)] += v * kernel[static_cast<std::size_t>(m + reach)];
    }
  }
  out.values = std::move(smoothed);
  return out;
}

}  // namespace mfpe
