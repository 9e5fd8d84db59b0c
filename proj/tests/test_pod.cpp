// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace ddvms;

namespace
{

// Method of snapshots: eigen-decomposition of the M-weighted Gram matrix S^T M S.
struct GramPod
{
  VectorXd sigma;
  MatrixXd modes;
};

GramPod gram_pod(const MatrixXd &S, const MatrixXd &M, Index d)
{
  const MatrixXd G = S.transpose() * M * S;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(G);
  GramPod out;
  out.sigma.resize(d);
  out.modes.resize(S.rows(), d);
  for (Index i = 0; i < d; ++i)
  {
    const Index c = G.rows() - 1 - i;
    const double lambda = eig.eigenvalues()(c);
    out.sigma(i) = std::sqrt(lambda);
    out.modes.col(i) = S * eig.eigenvectors().col(c) / out.sigma(i);
  }
  return out;
}

}  // namespace

TEST(Pod, ModesAreMassOrthonormal)
{
  const auto &set = test::desk_snapshots();
  const auto &basis = test::desk_basis();
  const MatrixXd gram = basis.modes.transpose() * set.inner_product.mass.apply(basis.modes);
  EXPECT_LT((gram - MatrixXd::Identity(basis.rank(), basis.rank())).norm(), 1e-10);
}

TEST(Pod, FullRankReconstructionAndIdempotence)
{
  const auto &set = test::desk_snapshots();
  const auto &basis = test::desk_basis();
  const auto &M = set.inner_product.mass;
  const MatrixXd coeffs = pod::project_coefficients(basis, set, basis.rank());
  const MatrixXd rec = pod::reconstruct(basis, coeffs);
  for (Index n = 0; n < set.size(); ++n)
  {
    const VectorXd u = set.trajectory.states.col(n);
    const VectorXd e = rec.col(n) - u;
    EXPECT_LE(std::sqrt(e.dot(M * e)), 1e-8 * std::sqrt(u.dot(M * u)));
  }
  for (const Index r : {1, 3, 7})
  {
    const MatrixXd P1 = pod::reconstruct(basis, pod::project_coefficients(basis, set, r));
    const MatrixXd P2 = pod::reconstruct(basis, pod::project_coefficients(basis, P1, M, r));
    EXPECT_LT((P2 - P1).cwiseAbs().maxCoeff(), 1e-12 * P1.cwiseAbs().maxCoeff());
  }
}

TEST(Pod, MatchesMethodOfSnapshotsOracle)
{
  const auto &set = test::desk_snapshots();
  const auto &basis = test::desk_basis();
  const Index d = 10;
  const auto ref = gram_pod(set.trajectory.states, set.inner_product.mass.dense(), d);
  for (Index i = 0; i < d; ++i)
  {
    EXPECT_NEAR(basis.singular_values(i), ref.sigma(i), 1e-9 * ref.sigma(0));
    // Modes agree up to sign.
    const double s = basis.modes.col(i).dot(ref.modes.col(i)) > 0 ? 1.0 : -1.0;
    EXPECT_LT((basis.modes.col(i) - s * ref.modes.col(i)).cwiseAbs().maxCoeff(), 1e-6) << "mode " << i;
  }
}

TEST(Pod, SingularValuesAreNonincreasingAndSignsFixed)
{
  const auto &basis = test::desk_basis();
  for (Index i = 0; i + 1 < basis.rank(); ++i)
  {
    EXPECT_GE(basis.singular_values(i), basis.singular_values(i + 1));
  }
  for (Index i = 0; i < basis.rank(); ++i)
  {
    Index arg = 0;
    basis.modes.col(i).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(basis.modes(arg, i), 0.0);
  }
}

TEST(Pod, RankPolicies)
{
  const auto &set = test::desk_snapshots();
  const auto capped = pod::compute_pod(set, pod::RankPolicy::capped(5));
  EXPECT_EQ(capped.rank(), 5);
  const auto energy = pod::compute_pod(set, pod::RankPolicy::energy(0.99));
  const VectorXd s2 = energy.all_singular_values.array().square();
  const double total = s2.sum();
  const Index d = energy.rank();
  EXPECT_GE(s2.head(d).sum() / total, 0.99);
  EXPECT_LT(s2.head(d - 1).sum() / total, 0.99);
}

TEST(Pod, DegenerateInputsThrow)
{
  const auto &set = test::desk_snapshots();
  EXPECT_THROW(pod::compute_pod<double>(MatrixXd::Zero(set.n_dof(), 4), set.inner_product.mass), NumericalError);
  EXPECT_THROW(pod::compute_pod<double>(MatrixXd::Ones(3, 4), set.inner_product.mass), DimensionError);
}

TEST(Pod, DirectAndGramRoutesAgreeOnLowRankData)
{
  // Rank-3 data: exactly three modes are kept.
  std::mt19937_64 rng(2);
  const auto ops = fe1d::assemble_fe_operators<double>(fe1d::Mesh1D::uniform(20));
  const MatrixXd S = test::random_matrix(rng, 19, 3) * test::random_matrix(rng, 3, 12);
  const auto basis = pod::compute_pod<double>(S, ops.mass);
  EXPECT_EQ(basis.rank(), 3);
  const auto ref = gram_pod(S, ops.mass.dense(), 3);
  EXPECT_LT((basis.singular_values - ref.sigma).norm(), 1e-10 * ref.sigma(0));
}
