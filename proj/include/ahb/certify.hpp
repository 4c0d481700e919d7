#ifndef AHB_CERTIFY_HPP
#define AHB_CERTIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ahb/error.hpp"
#include "ahb/objective.hpp"
#include "ahb/prox.hpp"
#include "ahb/trace.hpp"
#include "json.hpp"

namespace ahb {

// Desingularizing function phi(t) = c t^alpha, alpha in (0, 1].
struct HolderFunction {
  double c = 1.0;
  double alpha = 1.0;

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("phi: c must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("phi: alpha must lie in (0, 1]");
  }
  double operator()(double t) const { return t <= 0.0 ? 0.0 : c * std::pow(t, alpha); }
  double derivative(double t) const { return c * alpha * std::pow(t, alpha - 1.0); }
};

struct FittedParams {
  double c = 0.0;
  double alpha = 0.0;
  double residual = 0.0;
};

// Outcome of a certification run. `worst_ratio` is the largest
// (asserted LHS) / (asserted RHS) over the checked items, attained at `witness`;
// a ratio above 1 + 1e-9 counts as a violation.
struct CertReport {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
  double worst_ratio = 0.0;
  Vector witness;
  std::optional<FittedParams> fitted;
  std::vector<std::string> notes;
};

inline constexpr double kRatioTolerance = 1e-9;

inline void to_json(nlohmann::json& j, const CertReport& r) {
  j = nlohmann::json{{"checked", r.checked},
                     {"violations", r.violations},
                     {"worst_ratio", r.worst_ratio},
                     {"witness", std::vector<double>(r.witness.data(), r.witness.data() + r.witness.size())},
                     {"fitted", nullptr}};
  if (r.fitted) j["fitted"] = {{"C", r.fitted->c}, {"alpha", r.fitted->alpha}, {"residual", r.fitted->residual}};
  if (!r.notes.empty()) j["notes"] = r.notes;
}

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> residuals;
  double rms = 0.0;
};

// Ordinary least squares y = intercept + slope x, centered for stability.
inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InvalidInput("fit: abscissae are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  fit.residuals.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fit.residuals.push_back(ys[i] - (fit.intercept + fit.slope * xs[i]));
    ss += fit.residuals.back() * fit.residuals.back();
  }
  fit.rms = std::sqrt(ss / n);
  return fit;
}

inline Vector uniform_in_ball(std::mt19937_64& rng, const Vector& center, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index d = center.size();
  Vector dir(d);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) dir(i) = normal(rng);
    norm = dir.norm();
  } while (norm == 0.0);
  const double rho = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(d));
  return center + (rho / norm) * dir;
}

struct Worst {
  double ratio = -std::numeric_limits<double>::infinity();
  Vector witness;
  std::int64_t violations = 0;

  void add(double ratio_i, const Vector& x) {
    if (std::isnan(ratio_i)) ratio_i = std::numeric_limits<double>::infinity();
    if (ratio_i > 1.0 + kRatioTolerance) ++violations;
    if (ratio_i > ratio) {
      ratio = ratio_i;
      witness = x;
    }
  }
};

inline double safe_ratio(double lhs, double rhs) {
  if (rhs > 0.0) return lhs / rhs;
  return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

}  // namespace detail

// Seeded uniform samples from B_r(xbar) intersected with
// {f(xbar) < f < f(xbar) + eta}, by rejection with at most 100 n trials.
// Throws EmptyRegion when no trial lands in the slice.
struct SliceSamples {
  std::vector<Vector> points;
  std::vector<std::string> notes;
};

inline SliceSamples sample_level_slice(const Objective& obj, const Vector& xbar, double r, double eta,
                                       std::int64_t num_samples, std::uint64_t seed) {
  if (num_samples <= 0) throw InvalidInput("sampler: num_samples must be positive");
  if (!(r > 0.0)) throw InvalidInput("sampler: r must be positive");
  if (!(eta > 0.0)) throw InvalidInput("sampler: eta must be positive");
  if (xbar.size() != obj.dim) throw InvalidInput("sampler: xbar has the wrong dimension");

  SliceSamples out;
  if (std::isinf(eta)) out.notes.emplace_back("eta = +inf: level slice bounded only below");
  const double fbar = obj.value(xbar);
  std::mt19937_64 rng(seed);
  const std::int64_t cap = 100 * num_samples;
  for (std::int64_t trial = 0; trial < cap && static_cast<std::int64_t>(out.points.size()) < num_samples; ++trial) {
    Vector x = detail::uniform_in_ball(rng, xbar, r);
    const double f = obj.value(x);
    if (f > fbar && f < fbar + eta) out.points.push_back(std::move(x));
  }
  if (out.points.empty()) throw EmptyRegion("sampler: no point of B_r(xbar) falls in the level slice");
  if (static_cast<std::int64_t>(out.points.size()) < num_samples)
    out.notes.push_back("rejection cap reached: " + std::to_string(out.points.size()) + " of " +
                        std::to_string(num_samples) + " samples");
  return out;
}

// Ratio form of phi'(f(x) - f(xbar)) d(0, df(x)) >= 1.
inline double kl_ratio(const Objective& obj, double fbar, const HolderFunction& phi, const Vector& x) {
  const double gap = obj.value(x) - fbar;
  return detail::safe_ratio(1.0, phi.derivative(gap) * obj.stationarity(x));
}

// Ratio form of d(x, S) <= factor phi(f(x) - f_*).
inline double growth_ratio(const Objective& obj, const HolderFunction& phi, double factor, const Vector& x) {
  const double gap = obj.value(x) - obj.require_min_value();
  return detail::safe_ratio(obj.solution_distance(x), factor * phi(gap));
}

// Ratio form of (f(x) - f(xbar))^{1 - alpha} <= (C / alpha) d(0, df(x)).
inline double growth_kl_ratio(const Objective& obj, double fbar, double c, double alpha, const Vector& x) {
  const double gap = obj.value(x) - fbar;
  return detail::safe_ratio(std::pow(gap, 1.0 - alpha), (c / alpha) * obj.stationarity(x));
}

namespace detail {

template <class RatioFn>
CertReport certify_samples(const SliceSamples& samples, RatioFn&& ratio) {
  CertReport report;
  Worst worst;
  for (const auto& x : samples.points) worst.add(ratio(x), x);
  report.checked = static_cast<std::int64_t>(samples.points.size());
  report.violations = worst.violations;
  report.worst_ratio = worst.ratio;
  report.witness = worst.witness;
  report.notes = samples.notes;
  return report;
}

inline void require_subdifferential(const Objective& obj) {
  if (!obj.gradient && !obj.min_norm_subgradient) throw CapabilityError("gradient");
}

}  // namespace detail

inline CertReport check_kl(const Objective& obj, const Vector& xbar, double r, double eta,
                           const HolderFunction& phi, std::int64_t num_samples, std::uint64_t seed) {
  phi.validate();
  detail::require_subdifferential(obj);
  const auto samples = sample_level_slice(obj, xbar, r, eta, num_samples, seed);
  const double fbar = obj.value(xbar);
  return detail::certify_samples(samples, [&](const Vector& x) { return kl_ratio(obj, fbar, phi, x); });
}

inline CertReport certify_growth_direct(const Objective& obj, const Vector& xbar, double r, double eta,
                                        const HolderFunction& phi, double factor, std::int64_t num_samples,
                                        std::uint64_t seed) {
  phi.validate();
  if (!(factor > 0.0)) throw InvalidInput("growth: factor must be positive");
  if (!obj.solution_distance) throw CapabilityError("solution_oracle");
  obj.require_min_value();
  const auto samples = sample_level_slice(obj, xbar, r, eta, num_samples, seed);
  return detail::certify_samples(samples, [&](const Vector& x) { return growth_ratio(obj, phi, factor, x); });
}

inline CertReport check_growth_implies_kl(const Objective& obj, const Vector& xbar, double r, double eta,
                                          double c, double alpha, std::int64_t num_samples,
                                          std::uint64_t seed) {
  HolderFunction{c, alpha}.validate();
  detail::require_subdifferential(obj);
  const auto samples = sample_level_slice(obj, xbar, r, eta, num_samples, seed);
  const double fbar = obj.value(xbar);
  return detail::certify_samples(samples,
                                 [&](const Vector& x) { return growth_kl_ratio(obj, fbar, c, alpha, x); });
}

// Least-squares fit of log dist = log C + alpha log gap. C is raised by the
// largest positive log-residual so that C gap^alpha majorizes every sample.
inline FittedParams fit_growth_exponent(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 8) throw InvalidInput("fit_growth_exponent: need at least 8 samples");
  std::vector<double> lx, ly;
  lx.reserve(samples.size());
  ly.reserve(samples.size());
  for (auto [gap, dist] : samples) {
    if (!(gap > 0.0) || !(dist > 0.0) || !std::isfinite(gap) || !std::isfinite(dist))
      throw InvalidInput("fit_growth_exponent: gaps and distances must be positive");
    lx.push_back(std::log(gap));
    ly.push_back(std::log(dist));
  }
  const auto fit = detail::fit_line(lx, ly);
  const double margin = std::max(0.0, *std::max_element(fit.residuals.begin(), fit.residuals.end()));
  return {std::exp(fit.intercept + margin), fit.slope, fit.rms};
}

// Fits the growth exponent of the Moreau envelope M_{lambda f} around the
// minimizer xbar and compares it with min{alpha, 1/2}, alpha the registered
// exponent of f. The report's ratio is |fitted - target| / 0.05.
inline CertReport check_moreau_exponent(const Objective& obj, double lambda, const Vector& xbar, double r,
                                        std::int64_t num_samples, std::uint64_t seed) {
  constexpr double kExponentTolerance = 0.05;
  if (!obj.convex) throw InvalidInput("moreau: objective must be convex");
  if (!obj.growth_exponent) throw CapabilityError("growth_exponent");
  if (!obj.solution_distance) throw CapabilityError("solution_oracle");
  if (!(lambda > 0.0)) throw InvalidInput("moreau: lambda must be positive");

  const auto samples = sample_level_slice(obj, xbar, r, std::numeric_limits<double>::infinity(), num_samples, seed);
  const double m_bar = moreau_value(obj, lambda, xbar);
  std::vector<std::pair<double, double>> data;
  std::int64_t skipped = 0;
  for (const auto& x : samples.points) {
    const double gap = moreau_value(obj, lambda, x) - m_bar;
    const double dist = obj.solution_distance(x);
    if (gap > 0.0 && dist > 0.0) data.emplace_back(gap, dist);
    else ++skipped;
  }

  const double target = std::min(*obj.growth_exponent, 0.5);
  const FittedParams fit = fit_growth_exponent(data);
  CertReport report;
  report.checked = static_cast<std::int64_t>(data.size());
  report.worst_ratio = std::abs(fit.alpha - target) / kExponentTolerance;
  report.violations = report.worst_ratio > 1.0 ? 1 : 0;
  report.witness = Vector(2);
  report.witness << fit.alpha, target;
  report.fitted = fit;
  if (skipped > 0) report.notes.push_back(std::to_string(skipped) + " samples with zero envelope gap skipped");
  return report;
}

struct PpaTauResult {
  double tau = 0.0;
  double path_length = 0.0;  // sum |x_{k+1} - x_k|
  double first_step = 0.0;   // |x_1 - x_0|
  double bound = 0.0;        // 2 |x_1 - x_0| + 2 phi(f(x) - f_*)
  double slack = 0.0;        // bound - d(x, S)
};

struct PpaGrowthResult {
  CertReport report;
  std::vector<PpaTauResult> per_tau;
  bool slack_monotone = true;
};

// For each tau runs K proximal point steps from x and checks
//   path length <= 2 |x_1 - x_0| + 2 phi(f(x) - f_*)   (+1e-9)
//   |x_1 - x_0| <= sqrt(2 tau (f(x) - f_*))            (+1e-12)
// The bound on d(x, S) therefore tends to 2 phi(gap) like sqrt(tau); its slack
// over d(x, S) must not grow as tau decreases. Each failed check counts as a
// violation; a non-monotone slack adds one more.
inline PpaGrowthResult certify_growth_via_ppa(const Objective& obj, const Vector& x, const HolderFunction& phi,
                                              const std::vector<double>& tau_list, int iterations) {
  phi.validate();
  if (tau_list.empty()) throw InvalidInput("growth-ppa: tau list is empty");
  if (iterations <= 0) throw InvalidInput("growth-ppa: K must be positive");
  const double gap = obj.value(x) - obj.require_min_value();

  PpaGrowthResult out;
  detail::Worst worst;
  for (double tau : tau_list) {
    const PpaRun run = ppa_run(obj, tau, x, iterations);
    PpaTauResult t;
    t.tau = tau;
    for (std::size_t k = 1; k < run.step_norms.size(); ++k) t.path_length += run.step_norms[k];
    t.first_step = run.step_norms.size() > 1 ? run.step_norms[1] : 0.0;
    t.bound = 2.0 * t.first_step + 2.0 * phi(gap);
    const double dist = obj.solution_distance ? obj.solution_distance(x) : (x - run.points.back()).norm();
    t.slack = t.bound - dist;

    Vector w(3);
    w << tau, t.path_length, t.bound;
    const double ratio = detail::safe_ratio(t.path_length, t.bound);
    if (t.path_length > t.bound + 1e-9) ++worst.violations;
    if (t.first_step > std::sqrt(2.0 * tau * std::max(gap, 0.0)) + 1e-12) ++worst.violations;
    if (ratio > worst.ratio) {
      worst.ratio = ratio;
      worst.witness = w;
    }
    out.per_tau.push_back(t);
  }

  std::vector<PpaTauResult> by_tau = out.per_tau;
  std::sort(by_tau.begin(), by_tau.end(), [](const auto& a, const auto& b) { return a.tau > b.tau; });
  for (std::size_t i = 1; i < by_tau.size(); ++i)
    if (by_tau[i].slack > by_tau[i - 1].slack + 1e-12) out.slack_monotone = false;

  out.report.checked = static_cast<std::int64_t>(tau_list.size());
  out.report.violations = worst.violations + (out.slack_monotone ? 0 : 1);
  out.report.worst_ratio = worst.ratio;
  out.report.witness = worst.witness;
  if (!out.slack_monotone) out.report.notes.emplace_back("bound slack grows as tau decreases");
  return out;
}

struct RecursiveRateResult {
  CertReport report;
  std::vector<double> deltas;  // Delta_0 .. Delta_K
  double c_tilde = 0.0;
  std::int64_t argmax_k = 0;
  std::optional<double> tail_slope;  // log-log slope over k in [K/10, K]
};

// Equality case Delta_{k+1} = Delta_k - C Delta_k^theta. With
// C~ = max_k Delta_k (1+k)^{1/(theta-1)}, checks Delta_k <= C~ (1+k)^{-1/(theta-1)}.
inline RecursiveRateResult verify_recursive_rate(double delta0, double c, double theta, std::int64_t iterations) {
  if (!(delta0 >= 0.0) || !std::isfinite(delta0)) throw InvalidInput("rate: delta0 must be nonnegative");
  if (!(c > 0.0)) throw InvalidInput("rate: C must be positive");
  if (!(theta > 1.0)) throw InvalidInput("rate: theta must exceed 1");
  if (iterations <= 0) throw InvalidInput("rate: K must be positive");
  if (!(c * std::pow(delta0, theta - 1.0) < 1.0)) throw InvalidInput("rate: need C delta0^(theta-1) < 1");

  const double e = 1.0 / (theta - 1.0);
  RecursiveRateResult out;
  out.deltas.reserve(static_cast<std::size_t>(iterations) + 1);
  out.deltas.push_back(delta0);
  for (std::int64_t k = 0; k < iterations; ++k) {
    const double d = out.deltas.back();
    out.deltas.push_back(d - c * std::pow(d, theta));
  }

  std::vector<double> scaled(out.deltas.size());
  for (std::size_t k = 0; k < out.deltas.size(); ++k) {
    scaled[k] = out.deltas[k] * std::pow(1.0 + static_cast<double>(k), e);
    if (scaled[k] > out.c_tilde) {
      out.c_tilde = scaled[k];
      out.argmax_k = static_cast<std::int64_t>(k);
    }
  }
  detail::Worst worst;
  for (std::size_t k = 0; k < scaled.size(); ++k) {
    Vector w(2);
    w << static_cast<double>(k), out.deltas[k];
    worst.add(detail::safe_ratio(scaled[k], out.c_tilde), w);
  }

  std::vector<double> lk, ld;
  for (std::int64_t k = std::max<std::int64_t>(1, iterations / 10); k <= iterations; ++k) {
    const double d = out.deltas[static_cast<std::size_t>(k)];
    if (d > 0.0) {
      lk.push_back(std::log(static_cast<double>(k)));
      ld.push_back(std::log(d));
    }
  }
  out.report.checked = static_cast<std::int64_t>(scaled.size());
  out.report.violations = worst.violations;
  out.report.worst_ratio = worst.ratio;
  out.report.witness = worst.witness;
  if (lk.size() >= 2) {
    const auto fit = detail::fit_line(lk, ld);
    out.tail_slope = fit.slope;
    out.report.fitted = FittedParams{out.c_tilde, fit.slope, fit.rms};
  }
  out.report.notes.push_back("max of Delta_k (1+k)^{1/(theta-1)} attained at k = " + std::to_string(out.argmax_k));
  return out;
}

enum class RateModel { linear, power };

inline RateModel parse_rate_model(std::string_view s) {
  if (s == "linear") return RateModel::linear;
  if (s == "power") return RateModel::power;
  throw InvalidInput("unknown rate model '" + std::string(s) + "'");
}

struct RateFit {
  RateModel model = RateModel::linear;
  double rate = 0.0;       // contraction factor (linear) or exponent (power)
  double intercept = 0.0;  // log-domain
  double residual = 0.0;   // RMS of log residuals
  std::int64_t points = 0;
};

inline void to_json(nlohmann::json& j, const RateFit& f) {
  j = nlohmann::json{{"model", f.model == RateModel::linear ? "linear" : "power"},
                     {"rate", f.rate},
                     {"intercept", f.intercept},
                     {"residual", f.residual},
                     {"points", f.points}};
}

// Linear: log dist ~ k, rate = exp(slope). Power: log dist ~ log(k + 1),
// rate = slope. Only records with a positive finite dist and k in
// [k_min, k_max] enter the fit.
inline RateFit fit_rate_from_trace(const Trace& trace, RateModel model, std::int64_t k_min = 0,
                                   std::int64_t k_max = std::numeric_limits<std::int64_t>::max()) {
  std::vector<double> xs, ys;
  for (const auto& r : trace.records) {
    if (r.k < k_min || r.k > k_max) continue;
    if (!r.dist || !(*r.dist > 0.0) || !std::isfinite(*r.dist)) continue;
    const double k = static_cast<double>(r.k);
    xs.push_back(model == RateModel::linear ? k : std::log(k + 1.0));
    ys.push_back(std::log(*r.dist));
  }
  if (xs.size() < 8) throw InvalidInput("fit_rate: need at least 8 records with a positive dist");
  const auto fit = detail::fit_line(xs, ys);
  RateFit out;
  out.model = model;
  out.rate = model == RateModel::linear ? std::exp(fit.slope) : fit.slope;
  out.intercept = fit.intercept;
  out.residual = fit.rms;
  out.points = static_cast<std::int64_t>(xs.size());
  return out;
}

}  // namespace ahb

#endif  // AHB_CERTIFY_HPP
