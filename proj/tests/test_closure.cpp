// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"

using namespace ddvms;

namespace
{

closure::LeastSquaresSystem<double> random_system(std::mt19937_64 &rng, Index r, Index M)
{
  const MatrixXd truth = test::random_matrix(rng, r, M);
  rom::ClosureTargets<double> t{test::random_matrix(rng, r, M)};
  return closure::assemble_system<double>(truth, t);
}

// Brute-force reference for r = 2: every pattern of active diagonal constraints is solved as
// an equality-constrained least-squares problem; the best feasible candidate wins.
MatrixXd enumerate_active_sets(const MatrixXd &Ek, const VectorXd &f)
{
  const double c = 1.0 / std::sqrt(2.0);
  // vec(A) (row-major) = P y with y = (skew, d1, d2).
  MatrixXd P = MatrixXd::Zero(4, 3);
  P(1, 0) = c;
  P(2, 0) = -c;
  P(0, 1) = 1.0;
  P(3, 2) = 1.0;
  const MatrixXd C = Ek * P;
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_y;
  for (int mask = 0; mask < 4; ++mask)
  {
    std::vector<Index> free = {0};
    for (int d = 0; d < 2; ++d)
    {
      if (!(mask & (1 << d)))
      {
        free.push_back(1 + d);
      }
    }
    MatrixXd Cf(C.rows(), static_cast<Index>(free.size()));
    for (std::size_t j = 0; j < free.size(); ++j)
    {
      Cf.col(static_cast<Index>(j)) = C.col(free[j]);
    }
    const VectorXd yf = Cf.completeOrthogonalDecomposition().solve(f);
    VectorXd y = VectorXd::Zero(3);
    for (std::size_t j = 0; j < free.size(); ++j)
    {
      y(free[j]) = yf(static_cast<Index>(j));
    }
    if (y(1) > 1e-14 || y(2) > 1e-14)
    {
      continue;
    }
    const double obj = (C * y - f).squaredNorm();
    if (best_y.size() == 0 || obj < best - 1e-15 * (1.0 + best))
    {
      best = obj;
      best_y = y;
    }
  }
  MatrixXd A(2, 2);
  A << best_y(1), c * best_y(0), -c * best_y(0), best_y(2);
  return A;
}

}  // namespace

TEST(Closure, KroneckerSvdMatchesDenseSvd)
{
  std::mt19937_64 rng(21);
  for (const auto &[r, M] : {std::pair<Index, Index>{2, 3}, {3, 7}, {4, 2}})
  {
    const auto sys = random_system(rng, r, M);
    const MatrixXd E = sys.dense_E();
    Eigen::JacobiSVD<MatrixXd> svd(E);
    VectorXd ref = VectorXd::Zero(r * r);
    ref.head(svd.singularValues().size()) = svd.singularValues();
    VectorXd ours = sys.singular_values();
    std::sort(ours.data(), ours.data() + ours.size(), std::greater<>());
    EXPECT_LT((ours - ref).cwiseAbs().maxCoeff(), 1e-12 * ref(0));
    // Triplets reconstruct E and are orthonormal.
    const MatrixXd U = sys.dense_U(), V = sys.dense_V();
    const Index rank = std::min(M, r) * r;
    EXPECT_LT((U.leftCols(rank).transpose() * U.leftCols(rank) - MatrixXd::Identity(rank, rank)).norm(), 1e-12);
    EXPECT_LT((V.transpose() * V - MatrixXd::Identity(r * r, r * r)).norm(), 1e-12);
    EXPECT_LT((U * sys.singular_values().asDiagonal() * V.transpose() - E).norm(), 1e-12 * E.norm());
    // Projected rhs.
    EXPECT_LT((sys.projected_rhs() - U.transpose() * sys.dense_f()).norm(), 1e-12);
  }
}

TEST(Closure, ConditionNumberOfNormalMatrix)
{
  std::mt19937_64 rng(22);
  const auto sys = random_system(rng, 3, 10);
  const MatrixXd EtE = sys.dense_E().transpose() * sys.dense_E();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(EtE);
  EXPECT_NEAR(sys.cond_EtE / (eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff()), 1.0, 1e-9);
}

TEST(Closure, TruncationIsBestRankKApproximation)
{
  std::mt19937_64 rng(23);
  const auto sys = random_system(rng, 3, 6);
  VectorXd s = sys.singular_values();
  for (Index k = 1; k < 9; ++k)
  {
    const auto reg = closure::truncated_svd(sys, k);
    const MatrixXd Ek = reg.dense();
    Eigen::JacobiSVD<MatrixXd> svd(sys.dense_E() - Ek);
    EXPECT_NEAR(svd.singularValues()(0), s(k), 1e-12 * s(0));
    EXPECT_EQ(Eigen::FullPivLU<MatrixXd>(Ek).rank(), k);
    // Minimum-norm unconstrained solution.
    const VectorXd x = Ek.completeOrthogonalDecomposition().solve(sys.dense_f());
    const MatrixXd X = reg.unconstrained_solution();
    EXPECT_LT((Eigen::Map<const VectorXd>(MatrixXd(X.transpose()).data(), 9) - x).norm(), 1e-10 * (1 + x.norm()));
    EXPECT_NEAR(reg.unconstrained_residual(), (Ek * x - sys.dense_f()).norm(), 1e-10);
  }
  EXPECT_THROW(closure::truncated_svd(sys, 0), ConfigError);
  EXPECT_THROW(closure::truncated_svd(sys, 10), ConfigError);
}

TEST(Closure, ObjectiveMatchesDenseEvaluation)
{
  std::mt19937_64 rng(24);
  const auto sys = random_system(rng, 3, 5);
  const MatrixXd A = test::random_matrix(rng, 3, 3);
  const MatrixXd At = A.transpose();
  const Eigen::Map<const VectorXd> vec(At.data(), 9);
  for (const Index k : {2, 5, 9})
  {
    const auto reg = closure::truncated_svd(sys, k);
    EXPECT_NEAR(reg.objective(A), (reg.dense() * vec - sys.dense_f()).squaredNorm(), 1e-10);
  }
  EXPECT_NEAR(closure::residuals_per_snapshot(sys, A).sum(), (sys.dense_E() * vec - sys.dense_f()).squaredNorm(),
              1e-10);
}

TEST(Closure, NnlsSatisfiesKkt)
{
  std::mt19937_64 rng(25);
  for (int t = 0; t < 50; ++t)
  {
    const MatrixXd A = test::random_matrix(rng, 8, 5);
    const VectorXd b = test::random_vector(rng, 8);
    const auto res = closure::nnls<double>(A, b, 100, 1e-12);
    ASSERT_TRUE(res.converged);
    const VectorXd grad = A.transpose() * (A * res.z - b);
    for (Index i = 0; i < 5; ++i)
    {
      EXPECT_GE(res.z(i), 0.0);
      if (res.z(i) > 0)
      {
        EXPECT_NEAR(grad(i), 0.0, 1e-10);
      }
      else
      {
        EXPECT_GE(grad(i), -1e-10);
      }
    }
  }
}

TEST(Closure, ConstrainedSolverMatchesActiveSetEnumeration)
{
  std::mt19937_64 rng(26);
  int compared = 0;
  for (int inst = 0; inst < 200; ++inst)
  {
    const auto sys = random_system(rng, 2, 3);
    for (const Index k : {3, 4})
    {
      const auto reg = closure::truncated_svd(sys, k);
      const auto fit = closure::solve_constrained(reg);
      ASSERT_TRUE(fit.ok()) << fit.failure_reason;
      const MatrixXd ref = enumerate_active_sets(reg.dense(), sys.dense_f());
      EXPECT_LT((fit.A_tilde - ref).cwiseAbs().maxCoeff(), 1e-9) << "instance " << inst << " k " << k;
      ++compared;
    }
  }
  EXPECT_EQ(compared, 400);
}

TEST(Closure, FittedMatricesHaveTheRequiredStructure)
{
  std::mt19937_64 rng(27);
  for (int inst = 0; inst < 20; ++inst)
  {
    const Index r = 2 + inst % 5;
    const auto sys = random_system(rng, r, 4 * r);
    for (const Index k : {Index(1), r, r * r})
    {
      const auto fit = closure::solve_constrained(closure::truncated_svd(sys, k));
      ASSERT_TRUE(fit.ok());
      const MatrixXd &A = fit.A_tilde;
      for (Index i = 0; i < r; ++i)
      {
        EXPECT_LE(A(i, i), 0.0);
        for (Index j = 0; j < r; ++j)
        {
          if (i != j)
          {
            EXPECT_EQ(A(i, j), -A(j, i));
          }
        }
      }
      for (int v = 0; v < 50; ++v)
      {
        const VectorXd a = test::random_vector(rng, r);
        EXPECT_LE(a.dot(A * a), 1e-12 * A.norm() * a.squaredNorm());
      }
    }
  }
}

TEST(Closure, ResidualsUseTheUnregularizedData)
{
  std::mt19937_64 rng(28);
  const auto sys = random_system(rng, 3, 6);
  const auto fit = closure::solve_constrained(closure::truncated_svd(sys, 4));
  const VectorXd res = (fit.A_tilde * sys.truth - sys.rhs).colwise().squaredNorm().transpose();
  EXPECT_LT((fit.residual_sq_per_snapshot - res).norm(), 1e-12);
}
