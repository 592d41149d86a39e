#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fraccolloc/spatial_fem.hpp"

using namespace fraccolloc;

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

double bubble(double x) { return x * (1.0 - x); }

}  // namespace

TEST(Assemble, DofCountsAndDegenerateMesh) {
  EXPECT_EQ(assemble(0.0, 1.0, 10, 2).dofs(), 19);
  EXPECT_EQ(assemble(0.0, 1.0, 10, 1).dofs(), 9);
  EXPECT_THROW(assemble(0.0, 1.0, 1, 1), std::invalid_argument);
  EXPECT_THROW(assemble(0.0, 1.0, 0, 2), std::invalid_argument);
  EXPECT_THROW(assemble(0.0, 1.0, 4, 3), std::invalid_argument);
  EXPECT_THROW(assemble(1.0, 0.0, 4, 2), std::invalid_argument);
}

TEST(Assemble, RejectsNonPositiveDiffusion) {
  auto cf = OperatorCoefficients::general([](double x) { return x - 0.5; }, {}, [](double) { return 0.0; },
                                          [](double) { return 0.0; });
  EXPECT_THROW(assemble(0.0, 1.0, 4, 2, cf), std::invalid_argument);
}

TEST(Assemble, SmallestEigenvalueNearPiSquared) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  const double lam = smallest_generalized_eigenvalue(sys);
  // leading P2 error term on a uniform mesh: lambda^3 h^4 / 720, from above
  auto leading = [](double h) { return kPi2 * kPi2 * kPi2 * std::pow(h, 4) / 720.0; };
  EXPECT_GT(lam, kPi2);
  EXPECT_NEAR(lam - kPi2, leading(0.1), 0.02 * leading(0.1));
  const double fine = smallest_generalized_eigenvalue(assemble(0.0, 1.0, 20, 2));
  EXPECT_NEAR(fine - kPi2, leading(0.05), 0.02 * leading(0.05));
}

TEST(Assemble, LaplacianOfBubbleIsTwo) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  const Eigen::VectorXd lhs = sys.stiff() * sys.interpolate(bubble);
  const Eigen::VectorXd rhs = sys.load_vector([](double) { return 2.0; });
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Assemble, GeneralOperatorGalerkinIdentity) {
  auto a = [](double x) { return 1.0 + x; };
  auto b = [](double x) { return x; };
  auto c = [](double) { return 2.0; };
  for (bool analytic_da : {true, false}) {
    auto cf = OperatorCoefficients::general(a, analytic_da ? ScalarField([](double) { return 1.0; }) : ScalarField{}, b, c);
    const auto sys = assemble(0.0, 1.0, 8, 2, cf);
    // L u for u = x(1-x): -(a u')' + b u' + c u
    auto lu = [&](double x) { return -(1.0 - 2.0 * x) + 2.0 * a(x) + b(x) * (1.0 - 2.0 * x) + c(x) * bubble(x); };
    const Eigen::VectorXd u = sys.interpolate(bubble);
    EXPECT_LE((sys.stiff() * u - sys.load_vector(lu)).cwiseAbs().maxCoeff(), 1e-12);
    for (double x : {0.13, 0.5, 0.91}) EXPECT_NEAR(eval_Lu(sys, u, x), lu(x), analytic_da ? 1e-12 : 1e-8);
  }
}

TEST(Assemble, MassSymmetricPositiveDefinite) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  EXPECT_LE((sys.mass() - sys.mass().transpose()).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::LLT<Eigen::MatrixXd> llt(sys.mass());
  EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Assemble, StiffSymmetricWithoutConvection) {
  auto cf = OperatorCoefficients::general([](double x) { return 2.0 + std::sin(x); }, {}, [](double) { return 0.0; },
                                          [](double x) { return x * x; });
  for (int deg : {1, 2}) {
    const auto sys = assemble(0.0, 1.0, 7, deg, cf);
    EXPECT_LE((sys.stiff() - sys.stiff().transpose()).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Assemble, EnergyCoercivityOnRandomVectors) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  const double lam = smallest_generalized_eigenvalue(sys);
  ASSERT_GT(lam, 0.0);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(sys.dofs());
    for (auto& x : v) x = n(gen);
    EXPECT_GE(v.dot(sys.stiff() * v), (1.0 - 1e-12) * lam * v.dot(sys.mass() * v));
  }
}

TEST(EvalField, QuadraticExactness) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto q = [](double x) { return 3.0 * x * (1.0 - x) + 0.0; };
  const Eigen::VectorXd dofs = sys.interpolate(q);
  for (int i = 0; i < 50; ++i) {
    const double x = u(gen);
    EXPECT_LE(std::abs(eval_field(sys, dofs, x) - q(x)), 1e-13);
  }
}

TEST(EvalField, NodesZeroAndDomain) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  Eigen::VectorXd v(sys.dofs());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i) - 0.7;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    EXPECT_NEAR(eval_field(sys, v, sys.dof_coords()[static_cast<std::size_t>(i)]), v[i], 1e-14);
  EXPECT_EQ(eval_field(sys, Eigen::VectorXd::Zero(sys.dofs()), 0.4321), 0.0);
  EXPECT_EQ(eval_field(sys, v, 0.0), 0.0);
  EXPECT_EQ(eval_field(sys, v, 1.0), 0.0);
  EXPECT_THROW(eval_field(sys, v, 1.5), std::domain_error);
}

TEST(EvalLu, BubbleGivesTwo) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  EXPECT_NEAR(eval_Lu(sys, sys.interpolate(bubble), 0.37), 2.0, 1e-11);
  const auto p1 = assemble(0.0, 1.0, 10, 1);
  EXPECT_EQ(eval_Lu(p1, p1.interpolate(bubble), 0.37), 0.0);
}

TEST(SamplePoints, DofsPlusFourPerCell) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  EXPECT_EQ(sys.sample_points().size(), 19u + 40u);
  EXPECT_TRUE(std::is_sorted(sys.sample_points().begin(), sys.sample_points().end()));
  Eigen::VectorXd v = sys.interpolate(bubble);
  const Eigen::VectorXd vals = sys.sample_matrix() * v;
  for (std::size_t p = 0; p < sys.sample_points().size(); ++p)
    EXPECT_NEAR(vals[static_cast<Eigen::Index>(p)], bubble(sys.sample_points()[p]), 1e-14);
}

TEST(BarrierPair, LaplacianOnUnitInterval) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  const auto pair = barrier_pair(sys);
  EXPECT_NEAR(pair.lambda, kPi2, 1e-14);
  EXPECT_NEAR(pair.omega, kPi2 / 8.0, 1e-14);
}

TEST(BarrierPair, ScalesWithDomainLength) {
  const auto sys = assemble(0.0, 2.0, 10, 2);
  const auto pair = barrier_pair(sys);
  EXPECT_NEAR(pair.lambda, kPi2 / 4.0, 1e-14);
  EXPECT_NEAR(pair.omega, kPi2 / 8.0, 1e-14);
}

TEST(BarrierPair, UserSuppliedComparisonFunction) {
  const auto sys = assemble(0.0, 1.0, 10, 2);
  const double lam = 5.0;
  auto g = [&](double x) { return 1.0 + 0.5 * lam * bubble(x); };
  auto lg = [&](double) { return lam; };
  const auto pair = barrier_pair(sys, lam, lam / 8.0, g, lg);
  EXPECT_EQ(pair.lambda, lam);
  // omega too small: g exceeds 1 + omega at the midpoint
  EXPECT_THROW(barrier_pair(sys, lam, lam / 16.0, g, lg), std::runtime_error);
  EXPECT_THROW(barrier_pair(sys, lam + 1.0, lam / 8.0, g, lg), std::runtime_error);
  EXPECT_THROW(barrier_pair(sys, lam, -1.0, g, lg), std::invalid_argument);
}

TEST(BarrierPair, ConstantComparisonAndL2Route) {
  auto cf = OperatorCoefficients::general([](double) { return 1.0; }, {}, [](double) { return 0.0; },
                                          [](double x) { return 3.0 + x; });
  const auto sys = assemble(0.0, 1.0, 10, 2, cf);
  const auto pair = barrier_pair_constant(sys);
  EXPECT_NEAR(pair.lambda, 3.0, 1e-15);
  EXPECT_EQ(pair.omega, 0.0);
  EXPECT_THROW(barrier_pair(sys), std::invalid_argument);
  const auto lap = assemble(0.0, 1.0, 10, 2);
  EXPECT_NEAR(smallest_generalized_eigenvalue(lap), kPi2, 1.4e-4);
}
