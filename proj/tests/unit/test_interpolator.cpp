#include <cmath>
#include <vector>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "helpers.hpp"
#include "w2s/interpolator.hpp"
#include "w2s/random.hpp"

using namespace w2s;

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, random::Stream& rng) {
  Eigen::MatrixXd X(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) X(i, j) = rng.normal();
  return X;
}

Eigen::VectorXd signs(Eigen::Index n, random::Stream& rng) {
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return y;
}

}  // namespace

TEST(Mni, OnePoint) {
  Eigen::MatrixXd X(1, 2);
  X << 2, 0;
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
  const LinearModel f = fit_mni(X, y);
  EXPECT_NEAR(f.coeffs[0], 0.5, 1e-15);
  EXPECT_EQ(f.coeffs[1], 0.0);
}

TEST(Mni, MatchesSvdPseudoInverse) {
  random::Stream rng(random::StreamKey{1});
  const Eigen::MatrixXd X = gaussian_matrix(4, 10, rng);
  const Eigen::VectorXd y = signs(4, rng);
  const LinearModel f = fit_mni(X, y);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd oracle = svd.solve(y);
  EXPECT_LE((f.coeffs - oracle).norm(), 1e-8 * oracle.norm());
  EXPECT_LE((X * f.coeffs - y).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Mni, LinearInLabels) {
  random::Stream rng(random::StreamKey{2});
  const Eigen::MatrixXd X = gaussian_matrix(6, 15, rng);
  const Eigen::VectorXd y1 = signs(6, rng), y2 = signs(6, rng);
  const Eigen::VectorXd sum = fit_mni(X, y1).coeffs + fit_mni(X, y2).coeffs;
  const Eigen::VectorXd joint = fit_mni(X, Eigen::VectorXd(y1 + y2)).coeffs;
  EXPECT_LE((sum - joint).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Mni, MultiHeadEqualsSeparateFits) {
  random::Stream rng(random::StreamKey{3});
  const Eigen::MatrixXd X = gaussian_matrix(5, 12, rng);
  Eigen::MatrixXd Y(5, 2);
  Y.col(0) = signs(5, rng);
  Y.col(1) = signs(5, rng);
  const auto heads = fit_mni_heads(X, Y);
  ASSERT_EQ(heads.size(), 2u);
  for (int h = 0; h < 2; ++h) {
    const Eigen::VectorXd single = fit_mni(X, Eigen::VectorXd(Y.col(h))).coeffs;
    EXPECT_LE((heads[static_cast<std::size_t>(h)].coeffs - single).norm(), 1e-12 * single.norm());
  }
}

TEST(Mni, RowSpaceAndErrors) {
  random::Stream rng(random::StreamKey{4});
  const Eigen::MatrixXd X = gaussian_matrix(3, 8, rng);
  const Eigen::VectorXd y = signs(3, rng);
  const LinearModel f = fit_mni(X, y);
  // Projection onto the row space leaves f unchanged.
  const Eigen::MatrixXd P = X.transpose() * (X * X.transpose()).inverse() * X;
  EXPECT_LE((P * f.coeffs - f.coeffs).norm(), 1e-10 * f.coeffs.norm());

  EXPECT_W2S_ERROR(fit_mni(gaussian_matrix(5, 3, rng), signs(5, rng)), ErrorKind::rank_deficient);
  Eigen::MatrixXd dup(2, 4);
  dup.row(0) << 1, 2, 3, 4;
  dup.row(1) = dup.row(0);
  // Duplicate rows: the jitter retry rescues the factorization.
  EXPECT_TRUE(GramSolver(dup).jittered());
  EXPECT_W2S_ERROR(fit_mni(Eigen::MatrixXd::Zero(2, 4), Eigen::Vector2d(1, -1)), ErrorKind::singular_gram);
  EXPECT_W2S_ERROR(fit_mni(X, Eigen::VectorXd::Ones(4)), ErrorKind::dimension_mismatch);
}

TEST(Avg, SymmetricPairAndSingleClass) {
  Eigen::MatrixXd X(2, 2);
  X << 1, 0, -1, 0;
  const LinearModel f = fit_avg(X, Eigen::Vector2d(1, -1));
  EXPECT_EQ(f.coeffs, Eigen::Vector2d(1, 0));
  EXPECT_EQ(f.method, FitMethod::avg);

  Eigen::MatrixXd Z(3, 2);
  Z << 1, 2, 3, 4, 5, 9;
  const LinearModel g = fit_avg(Z, Eigen::Vector3d::Ones());
  EXPECT_TRUE(g.coeffs.isApprox(Eigen::Vector2d(3, 5)));
}

TEST(Avg, SignPredictionsInvariantUnderRescaling) {
  random::Stream rng(random::StreamKey{5});
  const Eigen::MatrixXd X = gaussian_matrix(20, 6, rng);
  const LinearModel f = fit_avg(X, signs(20, rng));
  for (double c : {0.1, 10.0}) {
    const LinearModel g{c * f.coeffs, f.space, f.method};
    for (int i = 0; i < 200; ++i) {
      const Eigen::VectorXd x = gaussian_matrix(6, 1, rng);
      EXPECT_EQ(predict_binary(f, x), predict_binary(g, x));
    }
  }
}

TEST(Predict, BinaryTieAndHomogeneity) {
  const LinearModel e1{Eigen::Vector3d(1, 0, 0)};
  EXPECT_EQ(predict_binary(e1, Eigen::Vector3d(3.2, -7, 1)), 1);
  EXPECT_EQ(predict_binary(e1, Eigen::Vector3d(0, -7, 1)), 1);
  EXPECT_EQ(predict_binary(e1, Eigen::Vector3d(-0.1, 7, 1)), -1);
  EXPECT_W2S_ERROR(predict_binary(e1, Eigen::Vector2d(1, 1)), ErrorKind::dimension_mismatch);
}

TEST(Predict, MulticlassArgmaxWithLowestIndexTies) {
  std::vector<LinearModel> models{LinearModel{Eigen::Vector2d(0.2, 0)}, LinearModel{Eigen::Vector2d(0.9, 0)},
                                  LinearModel{Eigen::Vector2d(-1, 0)}};
  EXPECT_EQ(predict_multiclass(models, Eigen::Vector2d(1, 0)), 1u);
  std::vector<LinearModel> tie{LinearModel{Eigen::Vector2d(0.5, 0)}, LinearModel{Eigen::Vector2d(0.5, 0)}};
  EXPECT_EQ(predict_multiclass(tie, Eigen::Vector2d(1, 0)), 0u);
  EXPECT_W2S_ERROR(predict_multiclass(std::span<const LinearModel>{}, Eigen::Vector2d(1, 0)),
                   ErrorKind::empty_model_list);
}

TEST(Predict, PermutationConsistency) {
  random::Stream rng(random::StreamKey{6});
  std::vector<LinearModel> models;
  for (int i = 0; i < 5; ++i) models.push_back({gaussian_matrix(4, 1, rng).col(0)});
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<LinearModel> permuted;
  for (std::size_t p : perm) permuted.push_back(models[p]);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::VectorXd x = gaussian_matrix(4, 1, rng);
    EXPECT_EQ(perm[predict_multiclass(permuted, x)], predict_multiclass(models, x));
  }
}
