#ifndef AHB_OBJECTIVE_HPP
#define AHB_OBJECTIVE_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ahb/error.hpp"
#include "json.hpp"

namespace ahb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// A (dense or sparse) linear map with its data vector; backs f(x) = 1/2 |Ax - y|^2.
class LinearModel {
 public:
  LinearModel(Matrix a, Vector y) : a_(std::move(a)), y_(std::move(y)) { check(); }
  LinearModel(SparseMatrix a, Vector y) : a_(std::move(a)), y_(std::move(y)) { check(); }

  Eigen::Index rows() const {
    return std::visit([](const auto& m) { return m.rows(); }, a_);
  }
  Eigen::Index cols() const {
    return std::visit([](const auto& m) { return m.cols(); }, a_);
  }
  Vector apply(const Vector& x) const {
    return std::visit([&](const auto& m) -> Vector { return m * x; }, a_);
  }
  Vector apply_adjoint(const Vector& r) const {
    return std::visit([&](const auto& m) -> Vector { return m.transpose() * r; }, a_);
  }
  Vector residual(const Vector& x) const { return apply(x) - y_; }
  const Vector& rhs() const noexcept { return y_; }

  bool is_sparse() const noexcept { return std::holds_alternative<SparseMatrix>(a_); }
  const Matrix& dense() const { return std::get<Matrix>(a_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(a_); }

 private:
  void check() const {
    if (rows() != y_.size()) throw InvalidSpec("linear model: data length != rows");
  }

  std::variant<Matrix, SparseMatrix> a_;
  Vector y_;
};

// Black-box objective. Absent capabilities are empty std::function / nullopt.
// Instances are immutable once built and every callable is reentrant.
struct Objective {
  std::string name;
  Eigen::Index dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::optional<double> lipschitz;
  std::optional<double> min_value;
  std::function<double(const Vector&)> solution_distance;
  std::function<Vector(double, const Vector&)> prox;
  bool convex = false;
  // Ball around the origin on which `lipschitz` is valid, when only local.
  std::optional<double> domain_radius;

  // Minimal-norm element of the subdifferential for nonsmooth built-ins.
  std::function<Vector(const Vector&)> min_norm_subgradient;
  // Exponent a in d(x,S) <= C (f(x) - f_*)^a near the solution set.
  std::optional<double> growth_exponent;
  // A known minimizer (x-hat / x-dagger) when one is available.
  std::optional<Vector> minimizer;
  std::shared_ptr<const LinearModel> linear;

  bool smooth() const noexcept { return static_cast<bool>(gradient); }

  // d(0, df(x)): gradient norm for smooth f, registered subdifferential otherwise.
  double stationarity(const Vector& x) const {
    if (gradient) return gradient(x).norm();
    if (min_norm_subgradient) return min_norm_subgradient(x).norm();
    throw CapabilityError("gradient");
  }

  double require_lipschitz() const {
    if (!lipschitz) throw CapabilityError("lipschitz");
    return *lipschitz;
  }
  double require_min_value() const {
    if (!min_value) throw CapabilityError("min_value");
    return *min_value;
  }
  const Vector& require_minimizer() const {
    if (!minimizer) throw CapabilityError("minimizer");
    return *minimizer;
  }
};

// ---------------------------------------------------------------------------
// Problem specifications

enum class ProblemKind { quadratic, least_squares, power, abs_value, radon };

inline std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::least_squares: return "least_squares";
    case ProblemKind::power: return "power";
    case ProblemKind::abs_value: return "abs_value";
    case ProblemKind::radon: return "radon";
  }
  return "unknown";
}

inline ProblemKind parse_problem_kind(std::string_view s) {
  for (auto k : {ProblemKind::quadratic, ProblemKind::least_squares, ProblemKind::power,
                 ProblemKind::abs_value, ProblemKind::radon}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidSpec("unknown problem kind '" + std::string(s) + "'");
}

struct ProblemSpec {
  ProblemKind kind = ProblemKind::quadratic;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;

  friend bool operator==(const ProblemSpec& a, const ProblemSpec& b) {
    return a.kind == b.kind && a.params == b.params && a.seed == b.seed;
  }
};

inline void to_json(nlohmann::json& j, const ProblemSpec& s) {
  j = nlohmann::json{{"kind", std::string(to_string(s.kind))}, {"params", s.params}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, ProblemSpec& s) {
  if (!j.is_object()) throw InvalidSpec("problem: expected a JSON object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw InvalidSpec("problem.kind: missing or not a string");
  s.kind = parse_problem_kind(j.at("kind").get<std::string>());
  s.params = j.value("params", nlohmann::json::object());
  if (!s.params.is_object()) throw InvalidSpec("problem.params: expected an object");
  s.seed = j.value("seed", std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// Built-in problems

namespace detail {

inline Vector standard_normal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Matrix standard_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

// Orthonormal Q from QR of a Gaussian matrix, columns sign-fixed so diag(R) > 0.
inline Matrix random_orthonormal(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Matrix> qr(standard_normal(rng, n, n));
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

inline Vector soft_threshold(double lambda, const Vector& x) {
  return x.unaryExpr([lambda](double v) {
    return std::copysign(std::max(std::abs(v) - lambda, 0.0), v);
  });
}

inline Objective least_squares_objective(std::shared_ptr<const LinearModel> model) {
  Objective obj;
  obj.dim = model->cols();
  obj.value = [model](const Vector& x) { return 0.5 * model->residual(x).squaredNorm(); };
  obj.gradient = [model](const Vector& x) { return model->apply_adjoint(model->residual(x)); };
  obj.min_value = 0.0;
  obj.convex = true;
  obj.linear = std::move(model);
  return obj;
}

}  // namespace detail

// f(x) = 1/2 sum_i s_i x_i^2.
inline Objective make_quadratic(const std::vector<double>& spectrum) {
  if (spectrum.empty()) throw InvalidSpec("quadratic: spectrum is empty");
  for (double s : spectrum)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidSpec("quadratic: spectrum entries must be positive");
  const Vector lam = Eigen::Map<const Vector>(spectrum.data(), static_cast<Eigen::Index>(spectrum.size()));

  Objective obj;
  obj.name = "quadratic";
  obj.dim = lam.size();
  obj.value = [lam](const Vector& x) { return 0.5 * lam.dot(x.cwiseAbs2()); };
  obj.gradient = [lam](const Vector& x) -> Vector { return lam.cwiseProduct(x); };
  obj.lipschitz = lam.maxCoeff();
  obj.min_value = 0.0;
  obj.solution_distance = [](const Vector& x) { return x.norm(); };
  obj.prox = [lam](double t, const Vector& x) -> Vector {
    return (x.array() / (1.0 + t * lam.array())).matrix();
  };
  obj.convex = true;
  obj.growth_exponent = 0.5;
  obj.minimizer = Vector::Zero(lam.size());
  return obj;
}

// Matrix A = U diag(sigma) V^T and planted solution, exposed for inspection.
struct LeastSquaresFactors {
  Matrix a;
  Matrix u;  // rows x rows
  Matrix v;  // cols x cols
  Vector x_true;
};

inline LeastSquaresFactors least_squares_factors(Eigen::Index rows, Eigen::Index cols,
                                                 const std::vector<double>& singular_values,
                                                 std::uint64_t seed) {
  if (rows <= 0 || cols <= 0) throw InvalidSpec("least_squares: rows and cols must be positive");
  const Eigen::Index r = std::min(rows, cols);
  if (static_cast<Eigen::Index>(singular_values.size()) != r)
    throw InvalidSpec("least_squares: singular_values length must equal min(rows, cols)");
  for (std::size_t i = 0; i < singular_values.size(); ++i) {
    if (!(singular_values[i] > 0.0)) throw InvalidSpec("least_squares: singular values must be positive");
    if (i > 0 && singular_values[i] > singular_values[i - 1])
      throw InvalidSpec("least_squares: singular values must be nonincreasing");
  }

  std::mt19937_64 rng(seed);
  LeastSquaresFactors out;
  out.u = detail::random_orthonormal(rng, rows);
  out.v = detail::random_orthonormal(rng, cols);
  const Vector sigma = Eigen::Map<const Vector>(singular_values.data(), r);
  out.a = out.u.leftCols(r) * sigma.asDiagonal() * out.v.leftCols(r).transpose();
  out.x_true = detail::standard_normal(rng, cols);
  out.x_true *= 10.0 / out.x_true.norm();
  return out;
}

inline Objective make_least_squares(Eigen::Index rows, Eigen::Index cols,
                                    const std::vector<double>& singular_values, std::uint64_t seed) {
  auto factors = least_squares_factors(rows, cols, singular_values, seed);
  Vector y = factors.a * factors.x_true;
  auto model = std::make_shared<const LinearModel>(std::move(factors.a), std::move(y));
  Objective obj = detail::least_squares_objective(model);
  obj.name = "least_squares";
  obj.lipschitz = singular_values.front() * singular_values.front();
  obj.minimizer = factors.x_true;
  if (rows >= cols) {
    // Full column rank: the solution set is the single point x_true.
    obj.solution_distance = [xt = factors.x_true](const Vector& x) { return (x - xt).norm(); };
    obj.growth_exponent = 0.5;
  }
  return obj;
}

// f(x) = |x|^p / p. The gradient is only locally Lipschitz for p > 2, so the
// bound is stated on B(0, ball_radius). AHB iterates never leave
// B(x-hat, |x0 - x-hat|) because the distance to any minimizer is
// nonincreasing, which is what makes a ball-local constant sound.
inline Objective make_power(double p, Eigen::Index dim, double ball_radius) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw InvalidSpec("power: exponent p must be >= 2");
  if (dim <= 0) throw InvalidSpec("power: dim must be positive");
  if (!(ball_radius > 0.0)) throw InvalidSpec("power: ball_radius must be positive");

  Objective obj;
  obj.name = "power";
  obj.dim = dim;
  obj.value = [p](const Vector& x) { return std::pow(x.norm(), p) / p; };
  obj.gradient = [p](const Vector& x) -> Vector { return std::pow(x.norm(), p - 2.0) * x; };
  obj.lipschitz = (p - 1.0) * std::pow(ball_radius, p - 2.0);
  obj.domain_radius = ball_radius;
  obj.min_value = 0.0;
  obj.solution_distance = [](const Vector& x) { return x.norm(); };
  obj.convex = true;
  obj.growth_exponent = 1.0 / p;
  obj.minimizer = Vector::Zero(dim);
  return obj;
}

inline Objective make_abs_value() {
  Objective obj;
  obj.name = "abs_value";
  obj.dim = 1;
  obj.value = [](const Vector& x) { return std::abs(x(0)); };
  obj.prox = [](double t, const Vector& x) { return detail::soft_threshold(t, x); };
  obj.min_norm_subgradient = [](const Vector& x) -> Vector {
    Vector g(1);
    g(0) = x(0) > 0.0 ? 1.0 : (x(0) < 0.0 ? -1.0 : 0.0);
    return g;
  };
  obj.min_value = 0.0;
  obj.solution_distance = [](const Vector& x) { return std::abs(x(0)); };
  obj.convex = true;
  obj.growth_exponent = 1.0;
  obj.minimizer = Vector::Zero(1);
  return obj;
}

// ---------------------------------------------------------------------------
// Spectral norm estimate

struct LipschitzEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Power iteration on A^T A. The Rayleigh quotient is inflated by 1.01 so that
// steps of the form (1 + mu0) / L stay admissible under estimation error.
inline LipschitzEstimate power_iteration_normal(const LinearModel& model, int iters, double tol,
                                                std::uint64_t seed = 0x5eedULL) {
  if (iters <= 0) throw InvalidInput("lipschitz_estimate: iters must be positive");
  if (!(tol > 0.0)) throw InvalidInput("lipschitz_estimate: tol must be positive");
  constexpr double kSafety = 1.01;

  std::mt19937_64 rng(seed);
  Vector v = detail::standard_normal(rng, model.cols());
  v.normalize();

  LipschitzEstimate est;
  double previous = 0.0;
  for (int it = 1; it <= iters; ++it) {
    Vector w = model.apply_adjoint(model.apply(v));
    const double rayleigh = v.dot(w);
    const double wnorm = w.norm();
    est.iterations = it;
    if (wnorm == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    est.value = std::max(est.value, rayleigh);
    if (it > 1 && std::abs(rayleigh - previous) < tol * std::abs(rayleigh)) {
      est.converged = true;
      break;
    }
    previous = rayleigh;
    v = w / wnorm;
  }
  est.value *= kSafety;
  return est;
}

inline LipschitzEstimate lipschitz_estimate(const Objective& obj, int iters, double tol) {
  if (!obj.linear) throw CapabilityError("linear_operator");
  return power_iteration_normal(*obj.linear, iters, tol);
}

// ---------------------------------------------------------------------------
// Parallel-beam tomography on an n x n pixel grid covering [-1, 1]^2.

enum class Phantom { blocks, disks };

inline Phantom parse_phantom(std::string_view s) {
  if (s == "blocks") return Phantom::blocks;
  if (s == "disks") return Phantom::disks;
  throw InvalidSpec("radon: unknown phantom '" + std::string(s) + "'");
}

inline constexpr int kMaxRadonGrid = 64;

// Pixel (ix, iy) spans [-1 + ix h, -1 + (ix+1) h] x [-1 + iy h, -1 + (iy+1) h]
// with h = 2/n and maps to column ix * n + iy (column stacking).
inline SparseMatrix radon_matrix(int grid_n, int num_angles, int rays_per_angle) {
  if (grid_n <= 0 || num_angles <= 0 || rays_per_angle <= 0)
    throw InvalidSpec("radon: grid_n, num_angles and rays_per_angle must be positive");
  if (grid_n > kMaxRadonGrid)
    throw DeskScaleLimit("radon: grid_n " + std::to_string(grid_n) + " exceeds the limit of " +
                         std::to_string(kMaxRadonGrid));
  const double h = 2.0 / grid_n;
  const double pi = std::acos(-1.0);
  constexpr double kEps = 1e-14;

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> ts;
  for (int a = 0; a < num_angles; ++a) {
    const double theta = pi * a / num_angles;
    const double dx = std::cos(theta), dy = std::sin(theta);
    for (int j = 0; j < rays_per_angle; ++j) {
      const int row = a * rays_per_angle + j;
      const double s = -1.0 + (j + 0.5) * 2.0 / rays_per_angle;
      const double px = -s * dy, py = s * dx;  // foot point s * normal

      // Clip p + t d against the square (slab method).
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      bool hit = true;
      for (auto [p, d] : {std::pair{px, dx}, std::pair{py, dy}}) {
        if (std::abs(d) < kEps) {
          if (p < -1.0 || p > 1.0) hit = false;
          continue;
        }
        double lo = (-1.0 - p) / d, hi = (1.0 - p) / d;
        if (lo > hi) std::swap(lo, hi);
        t0 = std::max(t0, lo);
        t1 = std::min(t1, hi);
      }
      if (!hit || !(t1 > t0)) continue;

      ts.assign({t0, t1});
      for (auto [p, d] : {std::pair{px, dx}, std::pair{py, dy}}) {
        if (std::abs(d) < kEps) continue;
        for (int i = 0; i <= grid_n; ++i) {
          const double t = (-1.0 + i * h - p) / d;
          if (t > t0 && t < t1) ts.push_back(t);
        }
      }
      std::sort(ts.begin(), ts.end());
      for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double len = ts[k + 1] - ts[k];
        if (len <= kEps) continue;
        const double mid = 0.5 * (ts[k] + ts[k + 1]);
        const int ix = std::clamp(static_cast<int>(std::floor((px + mid * dx + 1.0) / h)), 0, grid_n - 1);
        const int iy = std::clamp(static_cast<int>(std::floor((py + mid * dy + 1.0) / h)), 0, grid_n - 1);
        triplets.emplace_back(row, ix * grid_n + iy, len);
      }
    }
  }
  SparseMatrix a(static_cast<Eigen::Index>(num_angles) * rays_per_angle,
                 static_cast<Eigen::Index>(grid_n) * grid_n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

// Piecewise-constant test image sampled at pixel centers.
inline Vector radon_phantom(int grid_n, Phantom phantom) {
  const double h = 2.0 / grid_n;
  Vector img = Vector::Zero(static_cast<Eigen::Index>(grid_n) * grid_n);
  auto disk = [](double x, double y, double cx, double cy, double r) {
    return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
  };
  for (int ix = 0; ix < grid_n; ++ix) {
    for (int iy = 0; iy < grid_n; ++iy) {
      const double x = -1.0 + (ix + 0.5) * h, y = -1.0 + (iy + 0.5) * h;
      double v = 0.0;
      if (phantom == Phantom::blocks) {
        if (std::abs(x) <= 0.5 && std::abs(y) <= 0.5) v += 1.0;
        if (x >= 0.1 && x <= 0.4 && y >= -0.4 && y <= -0.1) v += 0.5;
        if (x >= -0.8 && x <= -0.6 && y >= 0.2 && y <= 0.7) v += 0.75;
      } else {
        if (disk(x, y, 0.0, 0.0, 0.7)) v += 1.0;
        if (disk(x, y, 0.25, 0.2, 0.2)) v -= 0.5;
        if (disk(x, y, -0.3, -0.25, 0.15)) v += 0.3;
      }
      img(ix * grid_n + iy) = v;
    }
  }
  return img;
}

inline Objective make_radon(int grid_n, int num_angles, int rays_per_angle, Phantom phantom) {
  SparseMatrix a = radon_matrix(grid_n, num_angles, rays_per_angle);
  Vector x_true = radon_phantom(grid_n, phantom);
  Vector y = a * x_true;
  auto model = std::make_shared<const LinearModel>(std::move(a), std::move(y));
  Objective obj = detail::least_squares_objective(model);
  obj.name = "radon";
  obj.lipschitz = power_iteration_normal(*model, 5000, 1e-12).value;
  obj.minimizer = std::move(x_true);
  return obj;
}

// ---------------------------------------------------------------------------
// ProblemSpec -> Objective

namespace detail {

template <class T>
T param(const nlohmann::json& params, const char* key, const char* kind) {
  if (!params.contains(key)) throw InvalidSpec(std::string(kind) + ".params." + key + ": missing");
  try {
    return params.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidSpec(std::string(kind) + ".params." + key + ": wrong type");
  }
}

template <class T>
T param_or(const nlohmann::json& params, const char* key, const char* kind, T fallback) {
  return params.contains(key) ? param<T>(params, key, kind) : fallback;
}

}  // namespace detail

// Harmonic spectrum sigma_i = 1/i, the default for least_squares specs.
inline std::vector<double> harmonic_spectrum(Eigen::Index n) {
  std::vector<double> s(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = 1.0 / static_cast<double>(i + 1);
  return s;
}

inline Objective make_objective(const ProblemSpec& spec) {
  const auto& p = spec.params;
  switch (spec.kind) {
    case ProblemKind::quadratic:
      return make_quadratic(detail::param<std::vector<double>>(p, "spectrum", "quadratic"));
    case ProblemKind::least_squares: {
      const auto rows = detail::param<Eigen::Index>(p, "rows", "least_squares");
      const auto cols = detail::param<Eigen::Index>(p, "cols", "least_squares");
      if (rows <= 0 || cols <= 0) throw InvalidSpec("least_squares: rows and cols must be positive");
      auto sv = detail::param_or<std::vector<double>>(p, "singular_values", "least_squares",
                                                      harmonic_spectrum(std::min(rows, cols)));
      return make_least_squares(rows, cols, sv, spec.seed);
    }
    case ProblemKind::power:
      return make_power(detail::param<double>(p, "p", "power"),
                        detail::param_or<Eigen::Index>(p, "dim", "power", 1),
                        detail::param<double>(p, "ball_radius", "power"));
    case ProblemKind::abs_value:
      return make_abs_value();
    case ProblemKind::radon:
      return make_radon(detail::param<int>(p, "grid_n", "radon"),
                        detail::param<int>(p, "num_angles", "radon"),
                        detail::param<int>(p, "rays_per_angle", "radon"),
                        parse_phantom(detail::param_or<std::string>(p, "phantom", "radon", "blocks")));
  }
  throw InvalidSpec("unknown problem kind");
}

}  // namespace ahb

#endif  // AHB_OBJECTIVE_HPP
