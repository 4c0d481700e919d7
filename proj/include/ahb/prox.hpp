#ifndef AHB_PROX_HPP
#define AHB_PROX_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ahb/error.hpp"
#include "ahb/objective.hpp"
#include "ahb/trace.hpp"

namespace ahb {

// Sequence produced by the proximal point algorithm.
struct PpaRun {
  double tau = 0.0;
  std::vector<Vector> points;       // x_0 .. x_K
  std::vector<double> values;       // f(x_k)
  std::vector<double> step_norms;   // |x_k - x_{k-1}|, 0 for k = 0
};

// Axis-aligned grid for the nonconvex inner argmin, at most two dimensions.
struct GridSpec {
  int dim = 1;
  std::array<double, 2> lo{-1.0, -1.0};
  std::array<double, 2> hi{1.0, 1.0};
  std::int64_t points_per_axis = 101;

  static constexpr std::int64_t kMaxPoints = 1'000'000;

  std::int64_t total_points() const {
    std::int64_t n = 1;
    for (int i = 0; i < dim; ++i) n *= points_per_axis;
    return n;
  }

  void validate() const {
    if (dim != 1 && dim != 2) throw InvalidInput("grid: dim must be 1 or 2");
    if (points_per_axis < 2) throw InvalidInput("grid: need at least 2 points per axis");
    for (int i = 0; i < dim; ++i)
      if (!(lo[static_cast<std::size_t>(i)] < hi[static_cast<std::size_t>(i)]))
        throw InvalidInput("grid: lo must be below hi on every axis");
    if (points_per_axis > kMaxPoints || total_points() > kMaxPoints)
      throw DeskScaleLimit("grid: more than 1e6 points");
  }

  // Point with lexicographic index (i0, i1); i0 is the slowest axis.
  Vector point(std::int64_t flat) const {
    Vector z(dim);
    for (int axis = dim - 1; axis >= 0; --axis) {
      const auto a = static_cast<std::size_t>(axis);
      const std::int64_t i = flat % points_per_axis;
      flat /= points_per_axis;
      z(axis) = lo[a] + (hi[a] - lo[a]) * static_cast<double>(i) / static_cast<double>(points_per_axis - 1);
    }
    return z;
  }
};

// Tolerances of the gradient-descent fallback for prox without closed form.
inline constexpr double kInnerTolerance = 1e-12;
inline constexpr int kInnerMaxIterations = 100'000;

// argmin_z f(z) + |z - x|^2 / (2 tau). Uses the exact prox when registered,
// else gradient descent with step 1/(L + 1/tau) on the (1/tau)-strongly convex
// inner problem, started at x, until the inner gradient is below
// 1e-12 (1 + |x|) / tau.
inline Vector prox_point(const Objective& obj, double tau, const Vector& x) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("prox: tau must be positive");
  if (obj.prox) return obj.prox(tau, x);
  if (!obj.convex || !obj.gradient) throw CapabilityError("prox");
  const double lip = obj.require_lipschitz();

  const double step = 1.0 / (lip + 1.0 / tau);
  const double tol = kInnerTolerance * (1.0 + x.norm()) / tau;
  Vector z = x;
  for (int it = 0; it < kInnerMaxIterations; ++it) {
    const Vector grad = obj.gradient(z) + (z - x) / tau;
    if (!grad.allFinite()) throw InnerSolveError("prox: non-finite inner gradient");
    if (grad.norm() <= tol) return z;
    z -= step * grad;
  }
  throw InnerSolveError("prox: inner solver did not reach tolerance in 1e5 iterations");
}

inline PpaRun ppa_run(const Objective& obj, double tau, const Vector& x0, int iterations) {
  if (iterations < 0) throw InvalidInput("ppa: K must be nonnegative");
  if (!obj.convex) throw InvalidInput("ppa: objective must be convex; use ppa_run_nonconvex");
  PpaRun run;
  run.tau = tau;
  run.points.push_back(x0);
  run.values.push_back(obj.value(x0));
  run.step_norms.push_back(0.0);
  for (int k = 1; k <= iterations; ++k) {
    Vector next = prox_point(obj, tau, run.points.back());
    run.step_norms.push_back((next - run.points.back()).norm());
    run.values.push_back(obj.value(next));
    run.points.push_back(std::move(next));
  }
  return run;
}

// Proximal point iteration for nonconvex f with the inner argmin taken by
// exhaustive search over `grid` plus the previous iterate. Including x_{k-1}
// as a candidate makes f(x_k) + |x_k - x_{k-1}|^2/(2 tau) <= f(x_{k-1}) exact.
// Ties go to the lowest grid index; the previous iterate ranks after the grid.
inline PpaRun ppa_run_nonconvex(const Objective& obj, double tau, const Vector& x0, int iterations,
                                const GridSpec& grid) {
  grid.validate();
  if (!(tau > 0.0)) throw InvalidInput("ppa: tau must be positive");
  if (iterations < 0) throw InvalidInput("ppa: K must be nonnegative");
  if (x0.size() != grid.dim || obj.dim != grid.dim) throw InvalidInput("ppa: grid and objective dimensions differ");

  const std::int64_t n = grid.total_points();
  std::vector<Vector> nodes;
  std::vector<double> node_values;
  nodes.reserve(static_cast<std::size_t>(n));
  node_values.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    nodes.push_back(grid.point(i));
    node_values.push_back(obj.value(nodes.back()));
  }

  PpaRun run;
  run.tau = tau;
  run.points.push_back(x0);
  run.values.push_back(obj.value(x0));
  run.step_norms.push_back(0.0);
  for (int k = 1; k <= iterations; ++k) {
    const Vector& prev = run.points.back();
    const double prev_value = run.values.back();
    double best = prev_value;  // the previous iterate, distance 0
    std::int64_t best_index = -1;
    for (std::int64_t i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double v = node_values[ui] + (nodes[ui] - prev).squaredNorm() / (2.0 * tau);
      if (v < best || (v == best && best_index < 0)) {
        best = v;
        best_index = i;
      }
    }
    Vector next = best_index < 0 ? prev : nodes[static_cast<std::size_t>(best_index)];
    const double next_value = best_index < 0 ? prev_value : node_values[static_cast<std::size_t>(best_index)];
    run.step_norms.push_back((next - prev).norm());
    run.values.push_back(next_value);
    run.points.push_back(std::move(next));
  }
  return run;
}

// M_{lambda f}(x) = min_z f(z) + |z - x|^2 / (2 lambda).
inline double moreau_value(const Objective& obj, double lambda, const Vector& x) {
  const Vector p = prox_point(obj, lambda, x);
  return obj.value(p) + (p - x).squaredNorm() / (2.0 * lambda);
}

// grad M_{lambda f}(x) = (x - prox_{lambda f}(x)) / lambda.
inline Vector moreau_gradient(const Objective& obj, double lambda, const Vector& x) {
  return (x - prox_point(obj, lambda, x)) / lambda;
}

// CSV with header k,x0..x{d-1},fval,step_norm.
inline std::string render_ppa_csv(const PpaRun& run) {
  const Eigen::Index d = run.points.empty() ? 0 : run.points.front().size();
  std::string out = "k";
  for (Eigen::Index i = 0; i < d; ++i) out += ",x" + std::to_string(i);
  out += ",fval,step_norm\n";
  for (std::size_t k = 0; k < run.points.size(); ++k) {
    out += std::to_string(k);
    for (Eigen::Index i = 0; i < d; ++i) out += "," + format_double(run.points[k](i));
    out += "," + format_double(run.values[k]) + "," + format_double(run.step_norms[k]) + "\n";
  }
  return out;
}

inline void write_ppa_csv(const PpaRun& run, const std::filesystem::path& path) {
  write_file_atomic(path, render_ppa_csv(run));
}

}  // namespace ahb

#endif  // AHB_PROX_HPP
