#ifndef AHB_SOLVERS_HPP
#define AHB_SOLVERS_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "ahb/error.hpp"
#include "ahb/objective.hpp"
#include "ahb/trace.hpp"
#include "json.hpp"

namespace ahb {

enum class Method { ahb, gd, nesterov, alrhb };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::ahb: return "ahb";
    case Method::gd: return "gd";
    case Method::nesterov: return "nesterov";
    case Method::alrhb: return "alrhb";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::ahb, Method::gd, Method::nesterov, Method::alrhb})
    if (to_string(m) == s) return m;
  throw InvalidSpec("unknown method '" + std::string(s) + "'");
}

// Defaults are the working configuration of the tomography comparison:
// AHB with mu0 = 0.96 and cap 1, GD with 1.96/L, Nesterov nu = 3, ALR-HB 0.96.
struct SolverConfig {
  Method method = Method::ahb;
  double mu0 = 0.96;
  double beta_cap = 1.0;  // may be +inf
  double gd_mu = 1.96;
  double nesterov_nu = 3.0;
  double alrhb_beta = 0.96;
  std::int64_t max_iters = 1000;
  double gap_tol = 0.0;  // may be +inf
  std::int64_t record_every = 1;

  void validate() const {
    if (!(mu0 >= 0.0 && mu0 < 1.0)) throw InvalidSpec("mu0 must lie in [0, 1)");
    if (!(beta_cap > 0.0)) throw InvalidSpec("beta_cap must be positive");
    if (!(gd_mu > 0.0 && gd_mu < 2.0)) throw InvalidSpec("gd_mu must lie in (0, 2)");
    if (!(nesterov_nu >= 2.0) || !std::isfinite(nesterov_nu)) throw InvalidSpec("nesterov_nu must be >= 2");
    if (!(alrhb_beta > 0.0 && alrhb_beta < 1.0)) throw InvalidSpec("alrhb_beta must lie in (0, 1)");
    if (max_iters < 0) throw InvalidSpec("max_iters must be nonnegative");
    if (!(gap_tol >= 0.0)) throw InvalidSpec("gap_tol must be nonnegative");
    if (record_every <= 0) throw InvalidSpec("record_every must be positive");
  }

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

namespace detail {

// JSON has no infinity; +inf is written as null and read back from null or "inf".
inline nlohmann::json extended_to_json(double v) {
  return std::isinf(v) && v > 0 ? nlohmann::json(nullptr) : nlohmann::json(v);
}

inline double extended_from_json(const nlohmann::json& j, const char* key) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw InvalidSpec(std::string(key) + ": expected a number or \"inf\"");
  }
  if (!j.is_number()) throw InvalidSpec(std::string(key) + ": expected a number");
  return j.get<double>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"method", std::string(to_string(c.method))},
                     {"mu0", c.mu0},
                     {"beta_cap", detail::extended_to_json(c.beta_cap)},
                     {"gd_mu", c.gd_mu},
                     {"nesterov_nu", c.nesterov_nu},
                     {"alrhb_beta", c.alrhb_beta},
                     {"max_iters", c.max_iters},
                     {"gap_tol", detail::extended_to_json(c.gap_tol)},
                     {"record_every", c.record_every}};
}

// Absent fields keep their defaults.
inline void from_json(const nlohmann::json& j, SolverConfig& c) {
  if (!j.is_object()) throw InvalidSpec("solver config: expected a JSON object");
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number()) throw InvalidSpec(std::string(key) + ": expected a number");
    out = j.at(key).get<double>();
  };
  auto integer = [&](const char* key, std::int64_t& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_integer()) throw InvalidSpec(std::string(key) + ": expected an integer");
    out = j.at(key).get<std::int64_t>();
  };
  if (j.contains("method")) {
    if (!j.at("method").is_string()) throw InvalidSpec("method: expected a string");
    c.method = parse_method(j.at("method").get<std::string>());
  }
  number("mu0", c.mu0);
  if (j.contains("beta_cap")) c.beta_cap = detail::extended_from_json(j.at("beta_cap"), "beta_cap");
  number("gd_mu", c.gd_mu);
  number("nesterov_nu", c.nesterov_nu);
  number("alrhb_beta", c.alrhb_beta);
  integer("max_iters", c.max_iters);
  if (j.contains("gap_tol")) c.gap_tol = detail::extended_from_json(j.at("gap_tol"), "gap_tol");
  integer("record_every", c.record_every);
}

// Iteration state. After a step returns, the *_prev fields describe the step
// just taken (alpha_k, beta_k, f(x_k) - f_*, |g_k|^2), which is what the
// trace records for iteration k, and gamma_tilde already holds the surrogate
// for the new iterate.
struct SolverState {
  std::int64_t k = 0;
  Vector x;
  Vector x_prev;
  double gamma_tilde = 0.0;
  double alpha_prev = 0.0;
  double beta_prev = 0.0;
  double f_prev_value = 0.0;
  double f_prev_gap = 0.0;
  double g_prev_norm_sq = 0.0;
  Vector z;  // Nesterov extrapolation point
  bool converged = false;
};

// x_{-1} = x_0 and the k = 0 surrogate is zero.
inline SolverState initial_state(const Vector& x0) {
  SolverState s;
  s.x = x0;
  s.x_prev = x0;
  s.z = x0;
  return s;
}

inline double ahb_alpha(double lipschitz, double mu0) {
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) throw InvalidInput("ahb_alpha: L must be positive");
  if (!(mu0 >= 0.0 && mu0 < 1.0)) throw InvalidInput("ahb_alpha: mu0 must lie in [0, 1)");
  return (1.0 + mu0) / lipschitz;
}

// Computable upper bound for gamma_k = <m_k, x_k - x-hat>, from co-coercivity:
//   gt_k = |m_k|^2 - alpha_{k-1} (f(x_{k-1}) - f_* + |g_{k-1}|^2 / (2L)) + beta_{k-1} gt_{k-1}.
// `state` carries the k-1 quantities; the k = 0 value is 0 and is not computed here.
inline double update_gamma_tilde(const SolverState& state, double m_norm_sq, double lipschitz) {
  return m_norm_sq -
         state.alpha_prev * (state.f_prev_gap + state.g_prev_norm_sq / (2.0 * lipschitz)) +
         state.beta_prev * state.gamma_tilde;
}

// Minimizer over [0, cap] of the quadratic distance-decrease bound in beta.
inline double ahb_beta(double alpha, const Vector& g, const Vector& m, double gamma_tilde, double beta_cap) {
  const double mm = m.squaredNorm();
  if (mm == 0.0) return 0.0;
  const double unclamped = (alpha * g.dot(m) - gamma_tilde) / mm;
  return std::min(std::max(0.0, unclamped), beta_cap);
}

namespace detail {

inline double checked_value(const Objective& obj, const Vector& x, std::int64_t k) {
  const double v = obj.value(x);
  if (!std::isfinite(v)) throw NumericalFailure("non-finite objective value", static_cast<std::size_t>(k));
  return v;
}

inline Vector checked_gradient(const Objective& obj, const Vector& x, std::int64_t k) {
  if (!obj.gradient) throw CapabilityError("gradient");
  Vector g = obj.gradient(x);
  if (!g.allFinite()) throw NumericalFailure("non-finite gradient", static_cast<std::size_t>(k));
  return g;
}

inline double gap_of(const Objective& obj, double fval) {
  return obj.min_value ? fval - *obj.min_value : std::numeric_limits<double>::quiet_NaN();
}

// Shared tail of every step: shift x, record the k-th quantities.
inline SolverState advance(const SolverState& s, Vector x_next, double alpha, double beta,
                           double fval, double gap, double g_norm_sq) {
  SolverState next;
  next.k = s.k + 1;
  next.x_prev = s.x;
  next.x = std::move(x_next);
  next.gamma_tilde = s.gamma_tilde;
  next.alpha_prev = alpha;
  next.beta_prev = beta;
  next.f_prev_value = fval;
  next.f_prev_gap = gap;
  next.g_prev_norm_sq = g_norm_sq;
  next.z = s.z;
  return next;
}

}  // namespace detail

// One step of the adaptive heavy ball method:
//   (i)   g_k = grad f(x_k), alpha_k = (1 + mu0) / L
//   (ii)  m_k = x_k - x_{k-1}, surrogate gt_k (carried in `state`)
//   (iii) beta_k = clamp((alpha_k <g_k, m_k> - gt_k) / |m_k|^2, 0, cap), 0 if m_k = 0
//   (iv)  x_{k+1} = x_k - alpha_k g_k + beta_k m_k
inline SolverState ahb_step(const SolverState& state, const Objective& obj, const SolverConfig& cfg) {
  const double lip = obj.require_lipschitz();
  const double fstar = obj.require_min_value();
  const double fval = detail::checked_value(obj, state.x, state.k);
  const Vector g = detail::checked_gradient(obj, state.x, state.k);

  const double alpha = ahb_alpha(lip, cfg.mu0);
  const Vector m = state.x - state.x_prev;
  const double beta = ahb_beta(alpha, g, m, state.gamma_tilde, cfg.beta_cap);

  Vector x_next = state.x - alpha * g + beta * m;
  SolverState next = detail::advance(state, std::move(x_next), alpha, beta, fval, fval - fstar, g.squaredNorm());
  next.gamma_tilde = update_gamma_tilde(next, (next.x - next.x_prev).squaredNorm(), lip);
  return next;
}

inline SolverState gd_step(const SolverState& state, const Objective& obj, const SolverConfig& cfg) {
  const double lip = obj.require_lipschitz();
  const double fval = detail::checked_value(obj, state.x, state.k);
  const Vector g = detail::checked_gradient(obj, state.x, state.k);
  const double alpha = cfg.gd_mu / lip;
  return detail::advance(state, state.x - alpha * g, alpha, 0.0, fval, detail::gap_of(obj, fval), g.squaredNorm());
}

// z_k = x_k + (k-1)/(k+nu) (x_k - x_{k-1}),  x_{k+1} = z_k - grad f(z_k) / L.
// The coefficient is applied verbatim from k = 0, where m_0 = 0. The recorded
// gradient norm is that of grad f(z_k).
inline SolverState nesterov_step(const SolverState& state, const Objective& obj, const SolverConfig& cfg) {
  if (!(cfg.nesterov_nu >= 2.0)) throw InvalidSpec("nesterov_nu must be >= 2");
  const double lip = obj.require_lipschitz();
  const double fval = detail::checked_value(obj, state.x, state.k);
  const double kk = static_cast<double>(state.k);
  const double coeff = (kk - 1.0) / (kk + cfg.nesterov_nu);
  Vector z = state.x + coeff * (state.x - state.x_prev);
  const Vector g = detail::checked_gradient(obj, z, state.k);
  const double alpha = 1.0 / lip;
  Vector x_next = z - alpha * g;
  SolverState next = detail::advance(state, std::move(x_next), alpha, coeff, fval,
                                     detail::gap_of(obj, fval), g.squaredNorm());
  next.z = std::move(z);
  return next;
}

// Heavy ball with constant momentum beta and
//   alpha_k = 1/(2L) + (f(x_k) - f_*)/|g_k|^2 + beta <g_k, m_k>/|g_k|^2.
// At a critical point alpha_k is undefined; the state comes back unchanged
// with `converged` set and alpha = beta = 0 recorded.
inline SolverState alrhb_step(const SolverState& state, const Objective& obj, const SolverConfig& cfg) {
  const double lip = obj.require_lipschitz();
  const double fstar = obj.require_min_value();
  const double fval = detail::checked_value(obj, state.x, state.k);
  const Vector g = detail::checked_gradient(obj, state.x, state.k);
  const double gg = g.squaredNorm();
  if (gg == 0.0) {
    SolverState same = state;
    same.alpha_prev = 0.0;
    same.beta_prev = 0.0;
    same.f_prev_value = fval;
    same.f_prev_gap = fval - fstar;
    same.g_prev_norm_sq = 0.0;
    same.converged = true;
    return same;
  }
  const Vector m = state.x - state.x_prev;
  const double beta = cfg.alrhb_beta;
  const double alpha = 1.0 / (2.0 * lip) + (fval - fstar) / gg + beta * g.dot(m) / gg;
  return detail::advance(state, state.x - alpha * g + beta * m, alpha, beta, fval, fval - fstar, gg);
}

inline SolverState solver_step(const SolverState& state, const Objective& obj, const SolverConfig& cfg) {
  switch (cfg.method) {
    case Method::ahb: return ahb_step(state, obj, cfg);
    case Method::gd: return gd_step(state, obj, cfg);
    case Method::nesterov: return nesterov_step(state, obj, cfg);
    case Method::alrhb: return alrhb_step(state, obj, cfg);
  }
  throw InvalidSpec("unknown method");
}

// Checks that the objective offers what `cfg.method` needs and, for
// locally-Lipschitz objectives, that B(x-hat, 2 |x0 - x-hat|) fits inside the
// ball on which L holds. Returns that radius R when the check applies.
inline std::optional<double> check_run_preconditions(const Objective& obj, const SolverConfig& cfg,
                                                     const Vector& x0) {
  cfg.validate();
  if (!obj.value) throw CapabilityError("value");
  if (!obj.gradient) throw CapabilityError("gradient");
  if (!obj.lipschitz) throw CapabilityError("lipschitz");
  if ((cfg.method == Method::ahb || cfg.method == Method::alrhb) && !obj.min_value)
    throw CapabilityError("min_value");
  if (x0.size() != obj.dim)
    throw InvalidInput("x0 has dimension " + std::to_string(x0.size()) + ", expected " + std::to_string(obj.dim));
  if (!obj.domain_radius) return std::nullopt;

  const Vector& xhat = obj.require_minimizer();
  const double d0 = obj.solution_distance ? obj.solution_distance(x0) : (x0 - xhat).norm();
  const double local_radius = 2.0 * d0;
  if (xhat.norm() + local_radius > *obj.domain_radius)
    throw InvalidInput("x0 too far from the solution: need |x-hat| + 2 d(x0, S) <= domain_radius " +
                       std::to_string(*obj.domain_radius));
  return local_radius;
}

// Drives the chosen method from x0. Records every `record_every`-th iterate
// plus the final one; the final record carries the quantities the next step
// would have used. Stops on gap_tol, max_iters, or a critical point (ALR-HB).
inline Trace run_solver(const Objective& obj, const SolverConfig& cfg, const Vector& x0) {
  const auto started = std::chrono::steady_clock::now();
  Trace trace;
  trace.meta.config = cfg;
  trace.meta.local_radius = check_run_preconditions(obj, cfg, x0);

  SolverState state = initial_state(x0);
  for (;;) {
    SolverState next = solver_step(state, obj, cfg);
    const double gap = next.f_prev_gap;
    std::string reason;
    if (gap <= cfg.gap_tol) reason = "gap_tol";
    else if (next.converged) reason = "critical_point";
    else if (state.k >= cfg.max_iters) reason = "max_iters";

    if (!reason.empty() || state.k % cfg.record_every == 0) {
      IterationRecord rec;
      rec.k = state.k;
      rec.fval = next.f_prev_value;
      rec.gap = gap;
      rec.gnorm = std::sqrt(next.g_prev_norm_sq);
      rec.alpha = next.alpha_prev;
      rec.beta = next.beta_prev;
      rec.step_norm = (state.x - state.x_prev).norm();
      if (obj.solution_distance) rec.dist = obj.solution_distance(state.x);
      trace.records.push_back(rec);
    }
    if (!reason.empty()) {
      trace.meta.stop_reason = reason;
      break;
    }
    if (!next.x.allFinite()) throw NumericalFailure("non-finite iterate", static_cast<std::size_t>(next.k));
    state = std::move(next);
  }
  trace.meta.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return trace;
}

}  // namespace ahb

#endif  // AHB_SOLVERS_HPP
