#include "knockoff/knockoff_core.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "discriminator_util.hpp"
#include "knockoff/harness.hpp"
#include "knockoff/predictors.hpp"
#include "knockoff/rng.hpp"

using namespace knockoff;
using discriminator::swap_discriminator_auc;

namespace {

Matrix random_spd(int d, RngStream& rng, double ridge = 0.3) {
  Matrix A(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) A(r, c) = rng.normal();
  return A * A.transpose() / double(d) + ridge * Matrix::Identity(d, d);
}

Matrix sample_cov(const Matrix& X) {
  Vector mean = X.colwise().mean();
  Matrix centered = X.rowwise() - mean.transpose();
  return centered.transpose() * centered / double(X.rows() - 1);
}

}  // namespace

TEST(ComputeDiag, DiagonalCovariance) {
  Matrix sigma = Matrix::Zero(2, 2);
  sigma(0, 0) = 4.0;
  sigma(1, 1) = 9.0;
  Matrix D = compute_diag(sigma);
  EXPECT_NEAR(D(0, 0), 4.0, 1e-4);
  EXPECT_NEAR(D(1, 1), 9.0, 1e-4);
  EXPECT_EQ(D(0, 1), 0.0);
}

TEST(ComputeDiag, EquicorrelatedPair) {
  // 2x2 correlation eigenvalues are 1 +- rho, so s = 2(1 - 0.8) = 0.4
  Matrix sigma(2, 2);
  sigma << 1.0, 0.8, 0.8, 1.0;
  Matrix D = compute_diag(sigma);
  EXPECT_NEAR(D(0, 0), 0.4, 1e-5);
  EXPECT_NEAR(D(1, 1), 0.4, 1e-5);
}

TEST(ComputeDiag, IdentityAnyDimension) {
  for (int d : {1, 3, 7}) {
    Matrix D = compute_diag(Matrix::Identity(d, d));
    for (int j = 0; j < d; ++j) EXPECT_NEAR(D(j, j), 1.0, 1e-5);
  }
}

TEST(ComputeDiag, Errors) {
  Matrix zero_diag(2, 2);
  zero_diag << 0.0, 0.0, 0.0, 1.0;
  EXPECT_THROW(compute_diag(zero_diag), InputError);
  Matrix singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;  // correlation exactly singular
  EXPECT_THROW(compute_diag(singular), InputError);
}

TEST(GaussianKnockoffParams, IndependentRedrawWhenDEqualsSigma) {
  Matrix sigma = Matrix::Zero(2, 2);
  sigma(0, 0) = 2.0;
  sigma(1, 1) = 0.5;
  Vector mu(2);
  mu << 1.0, -3.0;
  KnockoffGaussianParams p = gaussian_knockoff_params(mu, sigma, sigma);
  EXPECT_LT(p.cond_coeff.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p.cond_mean_base - mu).cwiseAbs().maxCoeff(), 1e-12);
  Matrix st = p.cond_cov_chol * p.cond_cov_chol.transpose();
  EXPECT_LT((st - sigma).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GaussianKnockoffParams, ZeroDMakesIdentityKnockoff) {
  Matrix sigma(2, 2);
  sigma << 1.0, 0.4, 0.4, 1.0;
  Vector mu = Vector::Zero(2);
  KnockoffGaussianParams p = gaussian_knockoff_params(mu, sigma, Matrix::Zero(2, 2));
  EXPECT_EQ(p.cond_mean_base, Vector::Zero(2));
  EXPECT_EQ(p.cond_cov_chol, Matrix::Zero(2, 2));
  RngStream rng(1);
  Vector x(2);
  x << 0.3, -1.7;
  Vector xt = sample_gaussian_knockoff(p, x, rng);
  EXPECT_EQ(xt, x);  // exact
}

TEST(GaussianKnockoffParams, HandComputedSigmaTilde) {
  // Sigma = [[1,.5],[.5,1]], D = I: Sigma~ = 2I - Sigma^-1 = [[2/3,2/3],[2/3,2/3]]
  Matrix sigma(2, 2);
  sigma << 1.0, 0.5, 0.5, 1.0;
  Matrix D = Matrix::Identity(2, 2);
  Vector mu = Vector::Zero(2);
  KnockoffGaussianParams p = gaussian_knockoff_params(mu, sigma, D);

  Matrix inv(2, 2);  // hand inverse: (1/0.75) [[1,-0.5],[-0.5,1]]
  inv << 1.0, -0.5, -0.5, 1.0;
  inv /= 0.75;
  Matrix expected = 2.0 * D - D * inv * D;
  Matrix st = p.cond_cov_chol * p.cond_cov_chol.transpose();
  EXPECT_LT((st - expected).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(expected(0, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(expected(0, 1), 2.0 / 3.0, 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(st, Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(GaussianKnockoffParams, RejectsNonPsdPair) {
  Matrix sigma = Matrix::Identity(2, 2);
  Matrix D = 3.0 * Matrix::Identity(2, 2);  // 2 Sigma - D = -I
  EXPECT_THROW(gaussian_knockoff_params(Vector::Zero(2), sigma, D), InputError);
}

TEST(GaussianKnockoffParams, JointCovariancePsdForComputedD) {
  RngStream rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    int d = 2 + static_cast<int>(rng.uniform_index(5));
    Matrix sigma = random_spd(d, rng);
    Matrix D = compute_diag(sigma);
    Matrix joint(2 * d, 2 * d);
    joint << sigma, sigma - D, sigma - D, sigma;
    Eigen::SelfAdjointEigenSolver<Matrix> es(joint, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(SampleGaussianKnockoff, MomentsForIndependentRedraw) {
  Matrix sigma = Matrix::Zero(2, 2);
  sigma(0, 0) = 1.5;
  sigma(1, 1) = 0.7;
  Vector mu(2);
  mu << 2.0, -1.0;
  KnockoffGaussianParams p = gaussian_knockoff_params(mu, sigma, sigma);
  Vector x(2);
  x << 10.0, 10.0;  // arbitrary; D = Sigma means x is ignored
  RngStream rng(97);
  const int n = 50000;
  Matrix draws(n, 2);
  for (int i = 0; i < n; ++i) draws.row(i) = sample_gaussian_knockoff(p, x, rng).transpose();
  Vector mean = draws.colwise().mean();
  for (int j = 0; j < 2; ++j) {
    double se = std::sqrt(sigma(j, j) / n);
    EXPECT_NEAR(mean[j], mu[j], 3.0 * se);
  }
  Matrix cov = sample_cov(draws);
  EXPECT_LT((cov - sigma).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SampleGaussianKnockoff, DeterministicGivenSeed) {
  Matrix sigma(2, 2);
  sigma << 1.0, 0.3, 0.3, 1.0;
  KnockoffGaussianParams p = gaussian_knockoff_params(Vector::Zero(2), sigma, compute_diag(sigma));
  Vector x(2);
  x << 0.5, -0.5;
  RngStream a(123), b(123);
  EXPECT_EQ(sample_gaussian_knockoff(p, x, a), sample_gaussian_knockoff(p, x, b));
}

TEST(SampleGaussianKnockoff, DimensionMismatch) {
  Matrix sigma = Matrix::Identity(2, 2);
  KnockoffGaussianParams p = gaussian_knockoff_params(Vector::Zero(2), sigma, compute_diag(sigma));
  RngStream rng(1);
  EXPECT_THROW(sample_gaussian_knockoff(p, Vector::Zero(3), rng), InputError);
}

TEST(MixtureKnockoffs, DeterministicGivenSeed) {
  RngStream mrng(5);
  GaussianMixture model = detail::random_mixture(2, 3, 2.0, mrng);
  MixtureKnockoffSampler sampler(model);
  RngStream xrng(6);
  Matrix X = model.sample(50, xrng);
  Matrix a = sample_mixture_knockoffs(sampler, X, RngStream(42));
  Matrix b = sample_mixture_knockoffs(sampler, X, RngStream(42));
  EXPECT_EQ(a, b);
}

TEST(MixtureKnockoffs, SingleComponentMatchesGaussianMoments) {
  Vector w = Vector::Ones(1);
  Matrix sigma(2, 2);
  sigma << 1.0, 0.5, 0.5, 2.0;
  Vector mu(2);
  mu << 1.0, -1.0;
  GaussianMixture model(w, {mu}, {sigma});
  MixtureKnockoffSampler sampler(model);
  RngStream xrng(7);
  Matrix X = model.sample(50000, xrng);
  Matrix Xt = sample_mixture_knockoffs(sampler, X, RngStream(8));
  Matrix joint(X.rows(), 4);
  joint << X, Xt;
  Matrix cov = sample_cov(joint);
  // exchangeability in second moments for the single-Gaussian case
  EXPECT_NEAR(cov(0, 3), cov(0, 1), 0.05);  // cov(X_1, X~_2) = cov(X_1, X_2)
  EXPECT_NEAR(cov(2, 2), cov(0, 0), 0.05);  // Var(X~_1) = Var(X_1)
  EXPECT_NEAR(cov(3, 3), cov(1, 1), 0.05);
}

TEST(MixtureKnockoffs, SecondMomentExchangeability) {
  RngStream mrng(21);
  GaussianMixture model = detail::random_mixture(3, 4, 2.0, mrng);
  MixtureKnockoffSampler sampler(model);
  RngStream xrng(22);
  const int n = 50000;
  Matrix X = model.sample(n, xrng);
  Matrix Xt = sample_mixture_knockoffs(sampler, X, RngStream(23));
  const int d = 4;
  Matrix joint(n, 2 * d);
  joint << X, Xt;
  Matrix cov = sample_cov(joint);
  for (int j = 0; j < d; ++j) {
    EXPECT_NEAR(cov(d + j, d + j), cov(j, j), 0.05);  // Var match
    for (int m = 0; m < d; ++m) {
      if (m == j) continue;
      EXPECT_NEAR(cov(j, d + m), cov(j, m), 0.05);  // cross-cov match
    }
  }
}

TEST(MixtureKnockoffs, SwapDiscriminatorAtChance) {
  RngStream mrng(31);
  GaussianMixture model = detail::random_mixture(3, 4, 2.0, mrng);
  MixtureKnockoffSampler sampler(model);
  RngStream xrng(32);
  const int n = 20000;
  Matrix X = model.sample(n, xrng);
  Matrix Xt = sample_mixture_knockoffs(sampler, X, RngStream(33));
  double a = swap_discriminator_auc(X, Xt, 34);
  EXPECT_GE(a, 0.45);
  EXPECT_LE(a, 0.55);
}

TEST(MixtureKnockoffs, BrokenKnockoffsAreDetectable) {
  // control for the discriminator test: independent redraws from the
  // feature model are NOT valid knockoffs of correlated features
  Vector w = Vector::Ones(1);
  Matrix sigma(4, 4);
  sigma.setIdentity();
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k)
      if (j != k) sigma(j, k) = 0.6;
  GaussianMixture model(w, {Vector::Zero(4)}, {sigma});
  RngStream xrng(42);
  const int n = 20000;
  Matrix X = model.sample(n, xrng);
  RngStream fake_rng(43);
  Matrix fake = model.sample(n, fake_rng);  // ignores X entirely
  double a = swap_discriminator_auc(X, fake, 44);
  EXPECT_GT(a, 0.55);
}
