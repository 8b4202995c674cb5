#include <cmath>

#include <gtest/gtest.h>

#include "edgecache/convex_program.hpp"

using namespace edgecache;

namespace {

ScalarFn square() {
  return [](double t) { return ScalarEval{t * t, 2.0 * t, 2.0}; };
}

}  // namespace

TEST(Ipm, BoxConstrainedQuadratic) {
  // min (x - 3)^2 + (y + 1)^2  s.t. 0 <= x <= 2, y >= 0
  ConvexProgram p;
  p.num_vars = 2;
  CostTerm a;
  a.arg.add(0, 1.0);
  a.offset = -3.0;
  a.fn = square();
  CostTerm b;
  b.arg.add(1, 1.0);
  b.offset = 1.0;
  b.fn = square();
  p.terms = {a, b};
  const int up = p.add_upper_bound(0, 2.0);
  p.add_lower_bound(0, 0.0);
  const int ylo = p.add_lower_bound(1, 0.0);
  const auto r = solve_ipm(p, Eigen::VectorXd::Zero(2));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 2.0, 1e-7);
  EXPECT_NEAR(r.x[1], 0.0, 1e-7);
  EXPECT_NEAR(r.objective, 2.0, 1e-7);
  EXPECT_NEAR(r.multipliers[up], 2.0, 1e-6);
  EXPECT_NEAR(r.multipliers[ylo], 2.0, 1e-6);
}

TEST(Ipm, LinearProgramWithInfeasibleStart) {
  // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2)
  ConvexProgram p;
  p.num_vars = 2;
  p.linear = {-1.0, -1.0};
  SparseRow r1;
  r1.add(0, 1.0);
  r1.add(1, 2.0);
  SparseRow r2;
  r2.add(0, 3.0);
  r2.add(1, 1.0);
  p.add_row(r1, 4.0);
  p.add_row(r2, 6.0);
  p.add_lower_bound(0, 0.0);
  p.add_lower_bound(1, 0.0);
  Eigen::VectorXd x0(2);
  x0 << 10.0, -5.0;
  const auto r = solve_ipm(p, x0);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.6, 1e-7);
  EXPECT_NEAR(r.x[1], 1.2, 1e-7);
  EXPECT_NEAR(r.objective, -2.8, 1e-7);
}

TEST(Ipm, ExponentialCostNeedsCappedSum) {
  // min e^x + e^y  s.t. x + y >= 2  -> x = y = 1
  ConvexProgram p;
  p.num_vars = 2;
  for (int i = 0; i < 2; ++i) {
    CostTerm t;
    t.arg.add(i, 1.0);
    t.fn = [](double v) {
      const double e = std::exp(v);
      return ScalarEval{e, e, e};
    };
    p.terms.push_back(t);
  }
  SparseRow r;
  r.add(0, -1.0);
  r.add(1, -1.0);
  const int row = p.add_row(r, -2.0);
  const auto res = solve_ipm(p, Eigen::VectorXd::Zero(2));
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.x[0], 1.0, 1e-7);
  EXPECT_NEAR(res.x[1], 1.0, 1e-7);
  EXPECT_NEAR(res.multipliers[row], std::exp(1.0), 1e-6);
}

TEST(Ipm, ScalarCostContinuesBelowZero) {
  const auto g = scalar_cost(CostModel::energy(1.0));
  const auto at0 = g(0.0);
  const auto below = g(-0.5);
  EXPECT_DOUBLE_EQ(at0.value, 0.0);
  EXPECT_NEAR(below.value, -0.5 + 0.5 * 0.25, 1e-15);
  EXPECT_NEAR(below.d1, 0.5, 1e-15);
}

TEST(Ipm, RejectsWrongStartSize) {
  ConvexProgram p;
  p.num_vars = 2;
  EXPECT_THROW(solve_ipm(p, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}
