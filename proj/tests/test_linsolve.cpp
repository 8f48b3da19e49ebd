#include "mcs/linsolve.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace {

using namespace mcs;

TEST(Linsolve, IdentityReturnsRhs) {
  SparseMatrix I(5, 5);
  I.setIdentity();
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(5, -2, 3);
  EXPECT_LT((solve(I, b) - b).norm(), 1e-15);
}

TEST(Linsolve, IndefiniteTwoByTwo) {
  const SparseMatrix A = compile(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
  const Eigen::VectorXd x = solve(A, Eigen::Vector2d(1, 2));
  EXPECT_NEAR(x[0], 2.0, 1e-15);
  EXPECT_NEAR(x[1], 1.0, 1e-15);
}

TEST(Linsolve, DuplicateTripletsAreSummed) {
  const SparseMatrix A = compile(1, 1, {{0, 0, 1.5}, {0, 0, 2.5}});
  EXPECT_EQ(A.nonZeros(), 1);
  EXPECT_DOUBLE_EQ(A.coeff(0, 0), 4.0);
}

TEST(Linsolve, SingularMatrixThrows) {
  const SparseMatrix A = compile(3, 3, {{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, 2.0}});
  EXPECT_THROW(solve(A, Eigen::Vector3d(1, 1, 1)), std::runtime_error);
}

TEST(Linsolve, NonSquareThrows) {
  const SparseMatrix A = compile(2, 3, {{0, 0, 1.0}});
  EXPECT_THROW(solve(A, Eigen::Vector2d(1, 1)), std::invalid_argument);
}

TEST(Linsolve, ZeroRhsGivesZero) {
  const SparseMatrix A = compile(2, 2, {{0, 0, 3.0}, {1, 1, -1.0}, {0, 1, 1.0}});
  SolveInfo info;
  const Eigen::VectorXd x = solve(A, Eigen::Vector2d::Zero(), &info);
  EXPECT_EQ(x.norm(), 0.0);
  EXPECT_EQ(info.residual, 0.0);
}

TEST(Linsolve, ResidualContractOnRandomIndefiniteSystem) {
  // symmetric indefinite tridiagonal matrix with alternating diagonal signs
  const int n = 200;
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, (i % 2 ? -1.0 : 1.0) * (1 + 0.01 * i));
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, 0.3);
      t.emplace_back(i + 1, i, 0.3);
    }
  }
  const SparseMatrix A = compile(n, n, t);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 1, 2);
  SolveInfo info;
  const Eigen::VectorXd x = solve(A, b, &info);
  EXPECT_LE((A * x - b).norm() / b.norm(), 1e-10);
  EXPECT_LE(info.residual, 1e-10);
  EXPECT_NEAR(symmetry_defect(A), 0.0, 0.0);
}

TEST(Linsolve, MatrixMarketExport) {
  const SparseMatrix A = compile(2, 3, {{0, 2, 1.25}, {1, 0, -2.0}});
  std::ostringstream os;
  write_matrix_market(A, os);
  EXPECT_EQ(os.str(), "%%MatrixMarket matrix coordinate real general\n2 3 2\n2 1 -2\n1 3 1.25\n");
}

}  // namespace
