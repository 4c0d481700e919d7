// Test-only reference computations. Nothing here calls into the code paths it
// is used to check.
#ifndef AHB_TESTS_ORACLES_HPP
#define AHB_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Vector = Eigen::VectorXd;

// Central differences with step 1e-6 (1 + |x|).
inline Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x) {
  const double h = 1e-6 * (1.0 + x.norm());
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// 1/2 |A x - y|^2 with explicit loops.
inline double least_squares_value(const Eigen::MatrixXd& a, const Vector& y, const Vector& x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double r = -y(i);
    for (Eigen::Index j = 0; j < a.cols(); ++j) r += a(i, j) * x(j);
    s += r * r;
  }
  return 0.5 * s;
}

// Scalar adaptive heavy ball written straight from the recursion, used to
// cross-check the vector implementation on 1-D problems.
struct ScalarAhbStep {
  double x, g, m, gamma_tilde, beta, x_next;
};

inline std::vector<ScalarAhbStep> scalar_ahb(const std::function<double(double)>& f,
                                             const std::function<double(double)>& df, double lip,
                                             double fstar, double mu0, double cap, double x0, int steps) {
  std::vector<ScalarAhbStep> out;
  const double alpha = (1.0 + mu0) / lip;
  double x = x0, x_prev = x0, gt = 0.0;
  double a_prev = 0.0, b_prev = 0.0, gap_prev = 0.0, g2_prev = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double g = df(x);
    const double m = x - x_prev;
    if (k > 0) gt = m * m - a_prev * (gap_prev + g2_prev / (2.0 * lip)) + b_prev * gt;
    double beta = 0.0;
    if (m != 0.0) beta = std::min(std::max(0.0, (alpha * g * m - gt) / (m * m)), cap);
    const double xn = x - alpha * g + beta * m;
    out.push_back({x, g, m, gt, beta, xn});
    a_prev = alpha;
    b_prev = beta;
    gap_prev = f(x) - fstar;
    g2_prev = g * g;
    x_prev = x;
    x = xn;
  }
  return out;
}

// Length of the part of the line {p + t d} inside the axis-aligned box
// [x0, x1] x [y0, y1], by dense midpoint sampling of the clipped chord.
inline double sampled_length_in_box(double px, double py, double dx, double dy, double x0, double x1, double y0,
                                    double y1, int samples = 200000) {
  // Parameter range covering the whole [-1, 1]^2 square is within [-2, 2].
  const double t_lo = -2.0, t_hi = 2.0;
  const double dt = (t_hi - t_lo) / samples;
  double len = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = t_lo + (i + 0.5) * dt;
    const double x = px + t * dx, y = py + t * dy;
    if (x >= x0 && x < x1 && y >= y0 && y < y1) len += dt;
  }
  return len;
}

// Exact chord length of a line through the square [-1, 1]^2.
inline double chord_length_in_square(double px, double py, double dx, double dy) {
  double lo = -1e300, hi = 1e300;
  const double p[2] = {px, py}, d[2] = {dx, dy};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(d[i]) < 1e-14) {
      if (p[i] < -1.0 || p[i] > 1.0) return 0.0;
      continue;
    }
    double a = (-1.0 - p[i]) / d[i], b = (1.0 - p[i]) / d[i];
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
  }
  return hi > lo ? hi - lo : 0.0;
}

inline double soft_threshold(double lambda, double x) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

// Huber function: Moreau envelope of |x|.
inline double huber(double lambda, double x) {
  return std::abs(x) <= lambda ? x * x / (2.0 * lambda) : std::abs(x) - lambda / 2.0;
}

}  // namespace oracle

#endif  // AHB_TESTS_ORACLES_HPP
