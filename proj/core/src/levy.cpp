#include "mfpe/levy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "mfpe/error.hpp"
#include "numeric.hpp"

namespace mfpe {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

/// [a, b] intersected with the support; empty when lo >= hi.
std::pair<double, double> clip(const Interval& support, double a, double b) {
  return {std::max(a, support.lo), std::min(b, support.hi)};
}

double integrate_density(const Density1D& d, double a, double b, const std::function<double(double)>& g) {
  auto [lo, hi] = clip(d.support(), a, b);
  if (!(lo < hi)) return 0.0;
  return detail::integrate([&](double y) { return g(y) * d.evaluate(y); }, lo, hi, 1e-13);
}

const detail::GaussLegendre8& gauss8() {
  static const detail::GaussLegendre8 rule;
  return rule;
}

/// Appends a composite 8-point rule on [a, b] with `panels` equal panels in
/// the variable s, where y = map(s) and the weight is weight(s) ds.
template <class Map, class Weight>
void append_panels(QuadratureRule& rule, double a, double b, int panels, Map&& map, Weight&& weight) {
  const auto& gl = gauss8();
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < 8; ++i) {
      const double s = mid + 0.5 * h * gl.x[i];
      rule.nodes.push_back(map(s));
      rule.weights.push_back(0.5 * h * gl.w[i] * weight(s));
    }
  }
}

/// Splits `panels` across sub-ranges proportionally to length, at least one each.
std::vector<int> allocate_panels(const std::vector<double>& breaks, int panels) {
  const double total = breaks.back() - breaks.front();
  std::vector<int> out;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double share = (breaks[i + 1] - breaks[i]) / total;
    out.push_back(std::max(1, static_cast<int>(std::lround(share * panels))));
  }
  return out;
}

void append_rule(const LevyMeasure& nu, double delta, double ymax, int n, QuadratureRule& rule) {
  const int panels = std::max(1, (n + 7) / 8);
  std::visit(
      Overloaded{
          [](const NullMeasure&) {},
          [&](const AlphaStable& m) {
            // y = delta * exp(s); nu(dy) = scale * y^(-alpha) ds
            const double s_max = std::log(ymax / delta);
            std::vector<double> breaks{0.0};
            if (delta < 1.0 && 1.0 < ymax) breaks.push_back(std::log(1.0 / delta));
            breaks.push_back(s_max);
            const auto counts = allocate_panels(breaks, panels);
            for (double sign : {1.0, -1.0}) {
              for (std::size_t r = 0; r < counts.size(); ++r) {
                append_panels(
                    rule, breaks[r], breaks[r + 1], counts[r],
                    [&](double s) { return sign * delta * std::exp(s); },
                    [&](double s) { return m.scale * std::pow(delta * std::exp(s), -m.alpha); });
              }
            }
          },
          [&](const CompoundPoisson& m) {
            for (double sign : {1.0, -1.0}) {
              // Positive-side range in |y|, intersected with the mirrored support.
              const double lo = sign > 0 ? std::max(delta, m.jump.support().lo)
                                         : std::max(delta, -m.jump.support().hi);
              const double hi = sign > 0 ? std::min(ymax, m.jump.support().hi)
                                         : std::min(ymax, -m.jump.support().lo);
              if (!(lo < hi)) continue;
              std::vector<double> breaks{lo};
              if (lo < 1.0 && 1.0 < hi) breaks.push_back(1.0);
              breaks.push_back(hi);
              const auto counts = allocate_panels(breaks, panels);
              for (std::size_t r = 0; r < counts.size(); ++r) {
                append_panels(
                    rule, breaks[r], breaks[r + 1], counts[r], [&](double s) { return sign * s; },
                    [&](double s) { return m.rate * m.jump.evaluate(sign * s); });
              }
            }
          },
          [&](const SumMeasure& m) {
            for (const auto& part : m.parts) append_rule(part, delta, ymax, n, rule);
          },
      },
      nu.kind());
}

constexpr std::size_t kStableBatch = 1024;

/// Appends up to one batch of alpha-stable jumps after time t; returns false
/// once the horizon is passed. One raw draw per jump: the high 32 bits give
/// the Exp(rate) gap, the next 31 the uniform for eps * U^(-1/alpha), the low
/// bit the sign. log/exp run vectorized over the batch.
struct StableScratch {
  alignas(64) std::array<std::uint64_t, kStableBatch> raw;
  alignas(64) std::array<double, 2 * kStableBatch> u;  // gap uniforms, then magnitude uniforms
  alignas(64) std::array<double, kStableBatch> sign;
};

// (k + 0.5) 2^-m is built by placing k in the mantissa of a number in [1, 2);
// exact, and unlike integer-to-double conversion it vectorizes.
void split_draws(const std::uint64_t* __restrict raw, double* __restrict u, double* __restrict sign, double eps) {
  constexpr std::uint64_t kOne = 0x3FF0000000000000ULL;
  for (std::size_t i = 0; i < kStableBatch; ++i) {
    const std::uint64_t bits = raw[i];
    u[i] = (std::bit_cast<double>(kOne | ((bits >> 32) << 20)) - 1.0) + 0x1.0p-33;
    u[kStableBatch + i] = (std::bit_cast<double>(kOne | (((bits >> 1) & 0x7FFFFFFFULL) << 21)) - 1.0) + 0x1.0p-32;
    sign[i] = (bits & 1u) ? eps : -eps;
  }
}

bool alpha_stable_batch(const AlphaStable& m, double horizon, double eps, RngState& rng, double& t, JumpBuffer& out) {
  const double rate = 2.0 * m.scale * std::pow(eps, -m.alpha) / m.alpha;
  thread_local StableScratch scratch;
  auto& sc = scratch;
  RngState local = rng;  // a local copy keeps the state in registers
  for (auto& r : sc.raw) r = local();
  rng = local;
  split_draws(sc.raw.data(), sc.u.data(), sc.sign.data(), eps);
  constexpr auto n = static_cast<Eigen::Index>(kStableBatch);
  Eigen::Map<Eigen::ArrayXd> logs(sc.u.data(), 2 * n);
  logs = logs.log();
  Eigen::Map<Eigen::ArrayXd> mag(sc.u.data() + n, n);
  mag = Eigen::Map<const Eigen::ArrayXd>(sc.sign.data(), n) * (mag * (-1.0 / m.alpha)).exp();

  const std::size_t used = out.size();
  out.times.resize(used + kStableBatch);
  out.sizes.resize(used + kStableBatch);
  double* times = out.times.data() + used;
  double* sizes = out.sizes.data() + used;
  const double* gap = sc.u.data();
  const double* size = sc.u.data() + kStableBatch;
  const double scale = -1.0 / rate;
  std::size_t i = 0;
  for (; i < kStableBatch; ++i) {
    t += gap[i] * scale;
    if (t > horizon) break;
    times[i] = t;
    sizes[i] = size[i];
  }
  out.times.resize(used + i);
  out.sizes.resize(used + i);
  return i == kStableBatch;
}

void sample_alpha_stable(const AlphaStable& m, double horizon, double eps, RngState& rng, JumpBuffer& out) {
  double t = 0.0;
  while (alpha_stable_batch(m, horizon, eps, rng, t, out)) {
  }
}

void sample_compound_poisson(const CompoundPoisson& m, double horizon, double eps, RngState& rng, JumpBuffer& out) {
  const double inv_rate = 1.0 / m.rate;
  double t = 0.0;
  for (;;) {
    t += rng.exponential() * inv_rate;
    if (t > horizon) break;
    const double y = m.jump.sample(rng);
    if (std::abs(y) > eps) {
      out.times.push_back(t);
      out.sizes.push_back(y);
    }
  }
}

void sample_into(const LevyMeasure& nu, double horizon, double eps, RngState& rng, JumpBuffer& out) {
  std::visit(Overloaded{
                 [](const NullMeasure&) {},
                 [&](const AlphaStable& m) { sample_alpha_stable(m, horizon, eps, rng, out); },
                 [&](const CompoundPoisson& m) { sample_compound_poisson(m, horizon, eps, rng, out); },
                 [&](const SumMeasure& m) {
                   const std::size_t first = out.size();
                   for (const auto& part : m.parts) sample_into(part, horizon, eps, rng, out);
                   // Merge the parts into one time-ordered list.
                   std::vector<std::size_t> order(out.size() - first);
                   for (std::size_t k = 0; k < order.size(); ++k) order[k] = first + k;
                   std::stable_sort(order.begin(), order.end(),
                                    [&](std::size_t a, std::size_t b) { return out.times[a] < out.times[b]; });
                   std::vector<double> times(order.size()), sizes(order.size());
                   for (std::size_t k = 0; k < order.size(); ++k) {
                     times[k] = out.times[order[k]];
                     sizes[k] = out.sizes[order[k]];
                   }
                   std::copy(times.begin(), times.end(), out.times.begin() + static_cast<std::ptrdiff_t>(first));
                   std::copy(sizes.begin(), sizes.end(), out.sizes.begin() + static_cast<std::ptrdiff_t>(first));
                 },
             },
             nu.kind());
}

}  // namespace

// ---------------------------------------------------------------------------
// Density1D

Density1D::Density1D(std::string name, Pdf pdf, Interval support, Sampler sampler, Cdf cdf)
    : name_(std::move(name)),
      pdf_(std::move(pdf)),
      support_(support),
      sampler_(std::move(sampler)),
      cdf_(std::move(cdf)) {
  require(static_cast<bool>(pdf_), "Density1D needs a pdf");
  require(support_.lo < support_.hi, "Density1D support must be a non-empty interval");
  if (!sampler_) {
    require(support_.bounded(), "Density1D without a sampler needs bounded support for rejection sampling");
    constexpr int kProbes = 4001;
    double peak = 0.0;
    for (int i = 0; i < kProbes; ++i) {
      const double x = support_.lo + (support_.hi - support_.lo) * i / (kProbes - 1);
      peak = std::max(peak, pdf_(x));
    }
    require(peak > 0.0, "Density1D pdf vanishes on its support");
    envelope_ = 1.25 * peak;
  }
}

Density1D Density1D::normal(double mean, double sd) {
  require(sd > 0.0, "normal density needs sd > 0");
  const double norm = 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
  return Density1D(
      "normal",
      [=](double x) {
        const double z = (x - mean) / sd;
        return norm * std::exp(-0.5 * z * z);
      },
      Interval{}, [=](RngState& rng) { return mean + sd * rng.normal(); },
      [=](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2)); });
}

Density1D Density1D::uniform(double lo, double hi) {
  require(lo < hi, "uniform density needs lo < hi");
  const double height = 1.0 / (hi - lo);
  return Density1D(
      "uniform", [=](double) { return height; }, Interval{lo, hi},
      [=](RngState& rng) { return lo + (hi - lo) * rng.uniform(); },
      [=](double x) { return std::clamp((x - lo) * height, 0.0, 1.0); });
}

Density1D Density1D::lognormal(double log_mean, double log_sd) {
  require(log_sd > 0.0, "lognormal density needs log_sd > 0");
  const double norm = 1.0 / (log_sd * std::sqrt(2.0 * std::numbers::pi));
  return Density1D(
      "lognormal",
      [=](double x) {
        if (x <= 0.0) return 0.0;
        const double z = (std::log(x) - log_mean) / log_sd;
        return norm * std::exp(-0.5 * z * z) / x;
      },
      Interval{0.0, std::numeric_limits<double>::infinity()},
      [=](RngState& rng) { return std::exp(log_mean + log_sd * rng.normal()); },
      [=](double x) {
        if (x <= 0.0) return 0.0;
        return 0.5 * std::erfc(-(std::log(x) - log_mean) / (log_sd * std::numbers::sqrt2));
      });
}

double Density1D::evaluate(double x) const { return support_.contains(x) ? pdf_(x) : 0.0; }

double Density1D::cdf(double x) const {
  if (cdf_) return cdf_(x);
  if (x <= support_.lo) return 0.0;
  const double hi = std::min(x, support_.hi);
  return detail::integrate([this](double t) { return pdf_(t); }, support_.lo, hi, 1e-13);
}

double Density1D::mass(double a, double b) const {
  if (!(a < b)) return 0.0;
  if (cdf_) return cdf_(b) - cdf_(a);
  auto [lo, hi] = clip(support_, a, b);
  if (!(lo < hi)) return 0.0;
  return detail::integrate([this](double t) { return pdf_(t); }, lo, hi, 1e-13);
}

double Density1D::sample(RngState& rng) const {
  if (sampler_) return sampler_(rng);
  const double width = support_.hi - support_.lo;
  for (;;) {
    const double x = support_.lo + width * rng.uniform();
    if (rng.uniform() * envelope_ <= pdf_(x)) return x;
  }
}

double Density1D::total_mass() const {
  return detail::integrate([this](double t) { return pdf_(t); }, support_.lo, support_.hi, 1e-14);
}

// ---------------------------------------------------------------------------
// LevyMeasure

LevyMeasure LevyMeasure::alpha_stable(double alpha, double scale) {
  require(alpha > 0.0 && alpha < 2.0, "alpha-stable measure needs 0 < alpha < 2");
  require(scale > 0.0, "alpha-stable measure needs scale > 0");
  return LevyMeasure(AlphaStable{alpha, scale});
}

LevyMeasure LevyMeasure::compound_poisson(double rate, Density1D jump) {
  require(rate > 0.0, "compound Poisson measure needs rate > 0");
  const double mass = jump.total_mass();
  require(std::abs(mass - 1.0) <= 1e-8, "compound Poisson jump density must integrate to 1 (got " +
                                            std::to_string(mass) + ")");
  return LevyMeasure(CompoundPoisson{rate, std::move(jump)});
}

LevyMeasure LevyMeasure::sum(std::vector<LevyMeasure> parts) { return LevyMeasure(SumMeasure{std::move(parts)}); }

bool LevyMeasure::is_null() const noexcept {
  if (std::holds_alternative<NullMeasure>(kind_)) return true;
  if (const auto* s = std::get_if<SumMeasure>(&kind_)) {
    return std::all_of(s->parts.begin(), s->parts.end(), [](const LevyMeasure& p) { return p.is_null(); });
  }
  return false;
}

bool LevyMeasure::is_symmetric() const {
  return std::visit(Overloaded{
                        [](const NullMeasure&) { return true; },
                        [](const AlphaStable&) { return true; },
                        [](const CompoundPoisson& m) {
                          const auto& s = m.jump.support();
                          if (s.lo != -s.hi) return false;
                          for (int i = 1; i <= 64; ++i) {
                            const double y = std::isfinite(s.hi) ? s.hi * i / 65.0 : 0.1 * i;
                            const double a = m.jump.evaluate(y), b = m.jump.evaluate(-y);
                            if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) return false;
                          }
                          return true;
                        },
                        [](const SumMeasure& m) {
                          return std::all_of(m.parts.begin(), m.parts.end(),
                                             [](const LevyMeasure& p) { return p.is_symmetric(); });
                        },
                    },
                    kind_);
}

double LevyMeasure::density(double y) const {
  return std::visit(Overloaded{
                        [](const NullMeasure&) { return 0.0; },
                        [y](const AlphaStable& m) { return m.scale * std::pow(std::abs(y), -1.0 - m.alpha); },
                        [y](const CompoundPoisson& m) { return m.rate * m.jump.evaluate(y); },
                        [y](const SumMeasure& m) {
                          double total = 0.0;
                          for (const auto& p : m.parts) total += p.density(y);
                          return total;
                        },
                    },
                    kind_);
}

double LevyMeasure::tail_mass(double eps) const {
  require(eps > 0.0, "tail mass needs eps > 0");
  return std::visit(Overloaded{
                        [](const NullMeasure&) { return 0.0; },
                        [eps](const AlphaStable& m) { return 2.0 * m.scale * std::pow(eps, -m.alpha) / m.alpha; },
                        [eps](const CompoundPoisson& m) {
                          return m.rate * (m.jump.cdf(-eps) + (1.0 - m.jump.cdf(eps)));
                        },
                        [eps](const SumMeasure& m) {
                          double total = 0.0;
                          for (const auto& p : m.parts) total += p.tail_mass(eps);
                          return total;
                        },
                    },
                    kind_);
}

LevyTriplet::LevyTriplet(double b_, double A_, LevyMeasure nu_) : b(b_), A(A_), nu(std::move(nu_)) {
  require(A >= 0.0, "Brownian variance A must be >= 0");
}

double QuadratureRule::total_weight() const {
  double total = 0.0;
  for (double w : weights) total += w;
  return total;
}

// ---------------------------------------------------------------------------
// Operations

double sample_brownian_increment(double A, double dt, RngState& rng) {
  require(dt > 0.0, "Brownian increment needs dt > 0");
  if (A == 0.0) return 0.0;
  return std::sqrt(A * dt) * rng.normal();
}

std::vector<JumpEvent> sample_jumps(const LevyMeasure& nu, double horizon, double eps, RngState& rng) {
  std::vector<JumpEvent> out;
  sample_jumps_into(nu, horizon, eps, rng, out);
  return out;
}

void sample_jumps_into(const LevyMeasure& nu, double horizon, double eps, RngState& rng, JumpBuffer& out) {
  require(eps > 0.0, "jump truncation eps must be > 0");
  require(horizon > 0.0, "jump horizon must be > 0");
  out.clear();
  sample_into(nu, horizon, eps, rng, out);
}

void sample_jumps_into(const LevyMeasure& nu, double horizon, double eps, RngState& rng,
                       std::vector<JumpEvent>& out) {
  thread_local JumpBuffer buffer;
  sample_jumps_into(nu, horizon, eps, rng, buffer);
  out.resize(buffer.size());
  for (std::size_t k = 0; k < buffer.size(); ++k) out[k] = {buffer.times[k], buffer.sizes[k]};
}

JumpStream::JumpStream(const LevyMeasure& nu, double horizon, double eps, RngState rng)
    : nu_(&nu), horizon_(horizon), eps_(eps), rng_(rng) {
  require(eps > 0.0, "jump truncation eps must be > 0");
  require(horizon > 0.0, "jump horizon must be > 0");
}

const JumpBuffer& JumpStream::next() {
  batch_.clear();
  if (done_) return batch_;
  if (const auto* stable = std::get_if<AlphaStable>(&nu_->kind())) {
    done_ = !alpha_stable_batch(*stable, horizon_, eps_, rng_, t_, batch_);
  } else {
    sample_into(*nu_, horizon_, eps_, rng_, batch_);
    done_ = true;
  }
  return batch_;
}

double small_jump_compensation(const LevyMeasure& nu, double eps) {
  require(eps > 0.0, "compensation needs eps > 0");
  if (eps >= 1.0) return 0.0;
  return std::visit(Overloaded{
                        [](const NullMeasure&) { return 0.0; },
                        [](const AlphaStable&) { return 0.0; },
                        [eps](const CompoundPoisson& m) {
                          auto id = [](double y) { return y; };
                          return m.rate * (integrate_density(m.jump, eps, 1.0, id) +
                                           integrate_density(m.jump, -1.0, -eps, id));
                        },
                        [eps](const SumMeasure& m) {
                          double total = 0.0;
                          for (const auto& p : m.parts) total += small_jump_compensation(p, eps);
                          return total;
                        },
                    },
                    nu.kind());
}

double small_jump_second_moment(const LevyMeasure& nu, double delta) {
  require(delta > 0.0, "second moment needs delta > 0");
  return std::visit(Overloaded{
                        [](const NullMeasure&) { return 0.0; },
                        [delta](const AlphaStable& m) {
                          return 2.0 * m.scale * std::pow(delta, 2.0 - m.alpha) / (2.0 - m.alpha);
                        },
                        [delta](const CompoundPoisson& m) {
                          return m.rate * integrate_density(m.jump, -delta, delta, [](double y) { return y * y; });
                        },
                        [delta](const SumMeasure& m) {
                          double total = 0.0;
                          for (const auto& p : m.parts) total += small_jump_second_moment(p, delta);
                          return total;
                        },
                    },
                    nu.kind());
}

double truncated_second_moment(const LevyMeasure& nu) {
  return std::visit(
      Overloaded{
          [](const NullMeasure&) { return 0.0; },
          [](const AlphaStable& m) {
            const double inner = detail::integrate_singular([&](double y) { return std::pow(y, 1.0 - m.alpha); }, 0.0, 1.0);
            const double outer = detail::integrate_to_infinity([&](double y) { return std::pow(y, -1.0 - m.alpha); }, 1.0);
            return 2.0 * m.scale * (inner + outer);
          },
          [](const CompoundPoisson& m) {
            const double inf = std::numeric_limits<double>::infinity();
            auto sq = [](double y) { return y * y; };
            auto one = [](double) { return 1.0; };
            return m.rate * (integrate_density(m.jump, -1.0, 1.0, sq) + integrate_density(m.jump, 1.0, inf, one) +
                             integrate_density(m.jump, -inf, -1.0, one));
          },
          [](const SumMeasure& m) {
            double total = 0.0;
            for (const auto& p : m.parts) total += truncated_second_moment(p);
            return total;
          },
      },
      nu.kind());
}

QuadratureRule measure_quadrature(const LevyMeasure& nu, double delta, double ymax, int n) {
  require(delta > 0.0, "quadrature needs delta > 0");
  require(delta < ymax, "quadrature needs delta < ymax");
  require(n > 0, "quadrature needs n > 0");
  QuadratureRule rule;
  append_rule(nu, delta, ymax, n, rule);
  return rule;
}

double choose_ymax(const LevyMeasure& nu, double delta, double rel) {
  const double target = rel * nu.tail_mass(delta);
  if (target <= 0.0) return 2.0 * delta;
  double hi = 2.0 * delta;
  while (nu.tail_mass(hi) > target) {
    hi *= 2.0;
    if (hi > 1e12) throw Error(ErrorCode::kNonConvergence, "choose_ymax: tail mass does not decay");
  }
  double lo = hi / 2.0;
  for (int i = 0; i < 60 && hi - lo > 1e-9 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (nu.tail_mass(mid) > target ? lo : hi) = mid;
  }
  return hi;
}

double stable_exponent_constant(double alpha) {
  require(alpha > 0.0 && alpha < 2.0, "stable exponent needs 0 < alpha < 2");
  if (std::abs(alpha - 1.0) < 1e-9) return std::numbers::pi;
  return 2.0 * std::tgamma(1.0 - alpha) * std::cos(std::numbers::pi * alpha / 2.0) / alpha;
}

}  // namespace mfpe
