#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ahb/prox.hpp"
#include "oracles.hpp"

using ahb::Objective;
using ahb::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Quadratic without its closed-form prox, to exercise the inner solver.
Objective quadratic_without_prox(std::vector<double> spectrum) {
  Objective obj = ahb::make_quadratic(spectrum);
  obj.prox = nullptr;
  return obj;
}

Objective double_well() {
  Objective obj;
  obj.name = "double_well";
  obj.dim = 1;
  obj.value = [](const Vector& x) {
    const double a = (x(0) - 1.0) * (x(0) - 1.0);
    const double b = (x(0) + 1.0) * (x(0) + 1.0) + 0.5;
    return std::min(a, b);
  };
  obj.min_value = 0.0;
  return obj;
}

}  // namespace

TEST(ProxPoint, Examples) {
  EXPECT_DOUBLE_EQ(ahb::prox_point(ahb::make_quadratic({1.0}), 1.0, vec({2}))(0), 1.0);
  EXPECT_EQ(ahb::prox_point(ahb::make_abs_value(), 0.5, vec({0.2}))(0), 0.0);
  const Vector p = ahb::prox_point(ahb::make_quadratic({1.0, 10.0}), 0.1, vec({1, 1}));
  EXPECT_NEAR(p(0), 1.0 / 1.1, 1e-15);
  EXPECT_NEAR(p(1), 0.5, 1e-15);
}

TEST(ProxPoint, InnerSolverMatchesClosedForm) {
  auto with = ahb::make_quadratic({1.0, 10.0, 0.2});
  auto without = quadratic_without_prox({1.0, 10.0, 0.2});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (double tau : {0.01, 0.1, 1.0, 5.0}) {
    for (int i = 0; i < 10; ++i) {
      const Vector x = vec({3 * n(rng), 3 * n(rng), 3 * n(rng)});
      EXPECT_LE((ahb::prox_point(without, tau, x) - with.prox(tau, x)).norm(), 1e-10 * (1 + x.norm()));
    }
  }
}

TEST(ProxPoint, Errors) {
  EXPECT_THROW(ahb::prox_point(ahb::make_quadratic({1.0}), 0.0, vec({1})), ahb::InvalidInput);
  EXPECT_THROW(ahb::prox_point(double_well(), 1.0, vec({1})), ahb::CapabilityError);

  Objective bad = quadratic_without_prox({1.0});
  bad.gradient = [](const Vector& x) -> Vector { return Vector::Constant(x.size(), std::nan("")); };
  EXPECT_THROW(ahb::prox_point(bad, 1.0, vec({0})), ahb::InnerSolveError);

  // An understated L makes the inner iteration diverge.
  Objective wrong_lip = quadratic_without_prox({100.0});
  wrong_lip.lipschitz = 1e-3;
  EXPECT_THROW(ahb::prox_point(wrong_lip, 1.0, vec({1})), ahb::InnerSolveError);
}

TEST(PpaRun, ClosedFormTrajectories) {
  auto q = ahb::ppa_run(ahb::make_quadratic({1.0}), 1.0, vec({4}), 3);
  ASSERT_EQ(q.points.size(), 4u);
  const double expect_q[] = {4, 2, 1, 0.5};
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(q.points[static_cast<std::size_t>(k)](0), expect_q[k]);
  EXPECT_DOUBLE_EQ(q.step_norms[1], 2.0);
  EXPECT_DOUBLE_EQ(q.values[3], 0.125);

  auto a = ahb::ppa_run(ahb::make_abs_value(), 1.0, vec({2.5}), 3);
  const double expect_a[] = {2.5, 1.5, 0.5, 0};
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(a.points[static_cast<std::size_t>(k)](0), expect_a[k]);

  auto fixed = ahb::ppa_run(ahb::make_quadratic({2.0}), 0.3, vec({0}), 5);
  for (const auto& p : fixed.points) EXPECT_EQ(p(0), 0.0);
}

TEST(PpaRun, MonotoneValuesAndDistances) {
  std::vector<Objective> objs = {ahb::make_quadratic({1.0, 10.0}), quadratic_without_prox({0.5, 2.0}),
                                 ahb::make_power(4.0, 2, 4.0)};
  for (const auto& obj : objs) {
    for (double tau : {0.05, 1.0, 10.0}) {
      auto run = ahb::ppa_run(obj, tau, vec({1.5, -2}), 40);
      for (std::size_t k = 1; k < run.points.size(); ++k) {
        EXPECT_LE(run.values[k], run.values[k - 1] + 1e-10);
        EXPECT_LE(run.points[k].norm(), run.points[k - 1].norm() + 1e-10);
        EXPECT_DOUBLE_EQ(run.step_norms[k], (run.points[k] - run.points[k - 1]).norm());
      }
    }
  }
}

TEST(PpaNonconvex, ConvexCaseMatchesExactPpa) {
  ahb::GridSpec grid;
  grid.lo = {-4.0, 0.0};
  grid.hi = {4.0, 0.0};
  grid.points_per_axis = 17;  // spacing 0.5: contains 2, 1 and 0.5
  auto q = ahb::make_quadratic({1.0});
  auto grid_run = ahb::ppa_run_nonconvex(q, 1.0, vec({4}), 3, grid);
  auto exact = ahb::ppa_run(q, 1.0, vec({4}), 3);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(grid_run.points[k](0), exact.points[k](0));

  // Off-grid prox points are matched to grid resolution.
  grid.points_per_axis = 801;
  auto fine = ahb::ppa_run_nonconvex(q, 0.7, vec({3}), 10, grid);
  auto fine_exact = ahb::ppa_run(q, 0.7, vec({3}), 10);
  for (std::size_t k = 0; k <= 10; ++k) EXPECT_NEAR(fine.points[k](0), fine_exact.points[k](0), 0.01 * (k + 1));
}

TEST(PpaNonconvex, DoubleWellDescendsIntoBasin) {
  ahb::GridSpec grid;
  grid.lo = {-3.0, 0.0};
  grid.hi = {3.0, 0.0};
  grid.points_per_axis = 6001;
  auto f = double_well();
  const double tau = 0.5;
  auto run = ahb::ppa_run_nonconvex(f, tau, vec({0.9}), 30, grid);
  for (std::size_t k = 1; k < run.points.size(); ++k) {
    EXPECT_LE(run.values[k], run.values[k - 1]);
    // Sufficient decrease holds exactly thanks to the injected previous iterate.
    EXPECT_LE(run.values[k] + run.step_norms[k] * run.step_norms[k] / (2 * tau), run.values[k - 1]);
  }
  EXPECT_NEAR(run.points.back()(0), 1.0, 1e-3);
  EXPECT_NEAR(run.values.back(), 0.0, 1e-6);
}

TEST(PpaNonconvex, TwoDimensionalAndEdgeCases) {
  ahb::GridSpec grid;
  grid.dim = 2;
  grid.lo = {-2.0, -2.0};
  grid.hi = {2.0, 2.0};
  grid.points_per_axis = 81;
  Objective ring;
  ring.dim = 2;
  ring.value = [](const Vector& x) { return (x.squaredNorm() - 1.0) * (x.squaredNorm() - 1.0); };
  auto run = ahb::ppa_run_nonconvex(ring, 0.2, vec({0.3, 0.1}), 20, grid);
  for (std::size_t k = 1; k < run.points.size(); ++k) EXPECT_LE(run.values[k], run.values[k - 1]);
  EXPECT_LT(run.values.back(), 0.01);

  auto zero = ahb::ppa_run_nonconvex(ring, 0.2, vec({0.3, 0.1}), 0, grid);
  ASSERT_EQ(zero.points.size(), 1u);
  EXPECT_EQ(zero.points[0], vec({0.3, 0.1}));

  ahb::GridSpec huge;
  huge.dim = 2;
  huge.points_per_axis = 1001;
  EXPECT_THROW(ahb::ppa_run_nonconvex(ring, 1.0, vec({0, 0}), 1, huge), ahb::DeskScaleLimit);
  ahb::GridSpec three;
  three.dim = 3;
  EXPECT_THROW(three.validate(), ahb::InvalidInput);
}

TEST(PpaNonconvex, TieBreakIsLexicographic) {
  Objective flat;
  flat.dim = 1;
  flat.value = [](const Vector&) { return 0.0; };
  ahb::GridSpec g;
  g.lo = {-1.0, 0.0};
  g.hi = {1.0, 0.0};
  g.points_per_axis = 2;  // nodes -1 and 1, equidistant from 0
  auto run = ahb::ppa_run_nonconvex(flat, 1e6, vec({0}), 1, g);
  // Both nodes cost 1/(2 tau) > 0 = cost of staying, so x stays.
  EXPECT_EQ(run.points[1](0), 0.0);

  Objective tilted;
  tilted.dim = 1;
  tilted.value = [](const Vector& x) { return x(0) == 0.0 ? 1.0 : 0.0; };
  auto moved = ahb::ppa_run_nonconvex(tilted, 1e6, vec({0}), 1, g);
  EXPECT_EQ(moved.points[1](0), -1.0);
}

TEST(Moreau, ValueExamples) {
  EXPECT_NEAR(ahb::moreau_value(ahb::make_quadratic({1.0}), 1.0, vec({2})), 1.0, 1e-15);
  EXPECT_NEAR(ahb::moreau_value(ahb::make_abs_value(), 1.0, vec({0.5})), 0.125, 1e-15);
  EXPECT_EQ(ahb::moreau_value(ahb::make_quadratic({3.0}), 0.4, vec({0})), 0.0);
  for (double x : {-3.0, -0.7, 0.2, 1.0, 4.0})
    EXPECT_NEAR(ahb::moreau_value(ahb::make_abs_value(), 0.8, vec({x})), oracle::huber(0.8, x), 1e-15);
}

TEST(Moreau, GradientExamples) {
  EXPECT_NEAR(ahb::moreau_gradient(ahb::make_quadratic({1.0}), 1.0, vec({2}))(0), 1.0, 1e-15);
  EXPECT_NEAR(ahb::moreau_gradient(ahb::make_abs_value(), 1.0, vec({3}))(0), 1.0, 1e-15);
  EXPECT_EQ(ahb::moreau_gradient(ahb::make_quadratic({1.0, 2.0}), 1.0, vec({0, 0})).norm(), 0.0);
}

TEST(Moreau, EnvelopeProperties) {
  std::vector<Objective> objs = {ahb::make_quadratic({1.0, 10.0}), ahb::make_power(4.0, 2, 4.0)};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (const auto& obj : objs) {
    for (double lambda : {0.1, 1.0}) {
      for (int i = 0; i < 50; ++i) {
        const Vector x = vec({u(rng), u(rng)});
        const Vector y = vec({u(rng), u(rng)});
        EXPECT_LE(ahb::moreau_value(obj, lambda, x), obj.value(x) + 1e-15);
        const Vector gx = ahb::moreau_gradient(obj, lambda, x);
        const Vector gy = ahb::moreau_gradient(obj, lambda, y);
        EXPECT_LE((gx - gy).norm(), (x - y).norm() / lambda * (1 + 1e-9) + 1e-12);
      }
      EXPECT_NEAR(ahb::moreau_value(obj, lambda, *obj.minimizer), *obj.min_value, 1e-15);
    }
  }
}

TEST(PpaCsv, Format) {
  auto run = ahb::ppa_run(ahb::make_quadratic({1.0, 1.0}), 1.0, vec({4, 2}), 1);
  const std::string csv = ahb::render_ppa_csv(run);
  EXPECT_EQ(csv, "k,x0,x1,fval,step_norm\n0,4,2,10,0\n1,2,1,2.5,2.2360679774997898\n");
  const auto path = std::filesystem::temp_directory_path() / "ahb_ppa_test.csv";
  ahb::write_ppa_csv(run, path);
  std::ifstream in(path);
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(contents, csv);
  std::filesystem::remove(path);
}
