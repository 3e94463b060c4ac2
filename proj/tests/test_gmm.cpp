#include "knockoff/gmm.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "knockoff/rng.hpp"

using namespace knockoff;

namespace {

double normal_pdf(double x, double mu, double var) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * M_PI * var);
}

GaussianMixture gauss1d(std::vector<double> weights, std::vector<double> mus,
                        std::vector<double> vars) {
  Vector w = Eigen::Map<Vector>(weights.data(), weights.size());
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t k = 0; k < mus.size(); ++k) {
    means.push_back(Vector::Constant(1, mus[k]));
    covs.push_back(Matrix::Constant(1, 1, vars[k]));
  }
  return GaussianMixture(w, means, covs);
}

}  // namespace

TEST(GaussianMixture, ValidatesWeights) {
  Vector w(2);
  w << 0.7, 0.2;  // sums to 0.9
  std::vector<Vector> means{Vector::Zero(1), Vector::Ones(1)};
  std::vector<Matrix> covs{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  EXPECT_THROW(GaussianMixture(w, means, covs), InputError);
}

TEST(GaussianMixture, ValidatesSymmetry) {
  Vector w = Vector::Ones(1);
  Matrix cov(2, 2);
  cov << 1.0, 0.5, 0.1, 1.0;
  EXPECT_THROW(GaussianMixture(w, {Vector::Zero(2)}, {cov}), InputError);
}

TEST(Posterior, SingleComponentIsOne) {
  auto m = gauss1d({1.0}, {0.0}, {1.0});
  Vector post = m.posterior(Vector::Constant(1, 0.3));
  ASSERT_EQ(post.size(), 1);
  EXPECT_DOUBLE_EQ(post[0], 1.0);
}

TEST(Posterior, EquidistantSymmetry) {
  // two equal-weight components, equal covariances, x equidistant
  Vector w(2);
  w << 0.5, 0.5;
  Matrix cov = Matrix::Identity(2, 2);
  Vector mu1(2), mu2(2);
  mu1 << -1.0, 0.0;
  mu2 << 1.0, 0.0;
  GaussianMixture m(w, {mu1, mu2}, {cov, cov});
  Vector x(2);
  x << 0.0, 0.7;
  Vector post = m.posterior(x);
  EXPECT_NEAR(post[0], 0.5, 1e-12);
  EXPECT_NEAR(post[1], 0.5, 1e-12);
}

TEST(Posterior, TwoComponentDensityRatio) {
  // N(0,1) and N(2,1), equal weights, x = 0
  auto m = gauss1d({0.5, 0.5}, {0.0, 2.0}, {1.0, 1.0});
  Vector post = m.posterior(Vector::Zero(1));
  double expected = normal_pdf(0, 0, 1) / (normal_pdf(0, 0, 1) + normal_pdf(0, 2, 1));
  EXPECT_NEAR(post[0], expected, 1e-12);
  EXPECT_NEAR(expected, 0.8808, 5e-5);
  EXPECT_NEAR(post.sum(), 1.0, 1e-12);
}

TEST(Posterior, MatchesComponentJointDecomposition) {
  RngStream rng(7);
  Vector w(3);
  w << 0.2, 0.5, 0.3;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (int k = 0; k < 3; ++k) {
    means.push_back(rng.normal_vector(2));
    Matrix A(2, 2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) A(r, c) = rng.normal();
    covs.push_back(A * A.transpose() / 2.0 + 0.3 * Matrix::Identity(2, 2));
  }
  GaussianMixture m(w, means, covs);
  for (int t = 0; t < 50; ++t) {
    Vector x = 3.0 * rng.normal_vector(2);
    Vector post = m.posterior(x);
    Vector lj = m.component_log_joint(x);
    double ld = m.log_density(x);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(post[k], std::exp(lj[k] - ld), 1e-10);
  }
}

TEST(LogDensity, StandardNormalAtZero) {
  auto m = gauss1d({1.0}, {0.0}, {1.0});
  EXPECT_NEAR(m.log_density(Vector::Zero(1)), -0.5 * std::log(2.0 * M_PI), 1e-12);
}

TEST(LogDensity, EqualMixtureMidpoint) {
  // equal mixture N(0,1), N(2,1) at x = 1: both terms equal phi(1)
  auto m = gauss1d({0.5, 0.5}, {0.0, 2.0}, {1.0, 1.0});
  double expected = std::log(normal_pdf(1, 0, 1));
  EXPECT_NEAR(m.log_density(Vector::Constant(1, 1.0)), expected, 1e-12);
  EXPECT_NEAR(expected, -1.41894, 2e-5);
}

TEST(LogDensity, DominatesEveryComponentTerm) {
  auto m = gauss1d({0.3, 0.7}, {-1.0, 2.5}, {0.5, 2.0});
  RngStream rng(3);
  for (int t = 0; t < 200; ++t) {
    Vector x = Vector::Constant(1, rng.uniform(-8.0, 8.0));
    double ld = m.log_density(x);
    Vector lj = m.component_log_joint(x);
    EXPECT_GE(ld + 1e-12, lj.maxCoeff());
  }
}

TEST(LogDensity, RejectsNonFinite) {
  auto m = gauss1d({1.0}, {0.0}, {1.0});
  EXPECT_THROW(m.log_density(Vector::Constant(1, std::nan(""))), InputError);
}

TEST(LogDensity, ComponentPermutationInvariance) {
  RngStream rng(11);
  auto m = gauss1d({0.2, 0.3, 0.5}, {-2.0, 0.0, 3.0}, {1.0, 0.5, 2.0});
  auto mp = gauss1d({0.5, 0.2, 0.3}, {3.0, -2.0, 0.0}, {2.0, 1.0, 0.5});
  for (int t = 0; t < 100; ++t) {
    Vector x = Vector::Constant(1, rng.uniform(-10.0, 10.0));
    EXPECT_NEAR(m.log_density(x), mp.log_density(x), 1e-12);
  }
}

TEST(Sample, MomentsMatchIdentityCovariance) {
  Vector w = Vector::Ones(1);
  GaussianMixture m(w, {Vector::Zero(2)}, {Matrix::Identity(2, 2)});
  RngStream rng(42);
  Matrix X = m.sample(50000, rng);
  Vector mean = X.colwise().mean();
  Matrix centered = X.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * centered / double(X.rows() - 1);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(cov(r, c), r == c ? 1.0 : 0.0, 0.05);
}

TEST(Sample, EmptyDraw) {
  auto m = gauss1d({1.0}, {0.0}, {1.0});
  RngStream rng(1);
  EXPECT_EQ(m.sample(0, rng).rows(), 0);
}

TEST(Sample, DegenerateWeightsUseOnlyFirstComponent) {
  auto m = gauss1d({1.0, 0.0}, {0.0, 100.0}, {1.0, 1.0});
  RngStream rng(5);
  Matrix X = m.sample(500, rng);
  EXPECT_LT(X.cwiseAbs().maxCoeff(), 50.0);
}

TEST(FitEm, SingleComponentEqualsSampleMoments) {
  RngStream data_rng(100);
  Matrix X(400, 2);
  for (int i = 0; i < 400; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = 1.5 + data_rng.normal();
  EmConfig cfg;
  cfg.n_restarts = 1;
  RngStream rng(7);
  EmFit fit = fit_em(X, 1, cfg, rng);
  ASSERT_EQ(fit.model.num_components(), 1);
  EXPECT_DOUBLE_EQ(fit.model.weights()[0], 1.0);
  Vector sample_mean = X.colwise().mean();
  double se = 1.0 / std::sqrt(400.0);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(fit.model.means()[0][j], sample_mean[j], 1e-8);
    EXPECT_NEAR(fit.model.means()[0][j], sample_mean[j], 3.0 * se);
  }
}

TEST(FitEm, TwoWellSeparatedClusters) {
  RngStream data_rng(200);
  Matrix X(500, 1);
  for (int i = 0; i < 500; ++i) X(i, 0) = (i % 2 == 0 ? -5.0 : 5.0) + data_rng.normal();
  EmConfig cfg;
  cfg.seed = 3;
  RngStream rng(3);
  EmFit fit = fit_em(X, 2, cfg, rng);
  EXPECT_EQ(fit.reseeds, 0);

  // oracle: cluster moments after thresholding at 0
  double lo = 0.0, hi = 0.0;
  int nlo = 0, nhi = 0;
  for (int i = 0; i < 500; ++i) {
    if (X(i, 0) < 0) {
      lo += X(i, 0);
      ++nlo;
    } else {
      hi += X(i, 0);
      ++nhi;
    }
  }
  lo /= nlo;
  hi /= nhi;

  double m0 = fit.model.means()[0][0], m1 = fit.model.means()[1][0];
  double fit_lo = std::min(m0, m1), fit_hi = std::max(m0, m1);
  EXPECT_NEAR(fit_lo, -5.0, 0.3);
  EXPECT_NEAR(fit_hi, 5.0, 0.3);
  EXPECT_NEAR(fit_lo, lo, 0.1);
  EXPECT_NEAR(fit_hi, hi, 0.1);

  // log-likelihood non-decreasing within slack
  for (std::size_t t = 1; t < fit.loglik_path.size(); ++t)
    EXPECT_GE(fit.loglik_path[t], fit.loglik_path[t - 1] - 1e-8);
}

TEST(FitEm, InputErrors) {
  EmConfig cfg;
  RngStream rng(1);
  Matrix empty(0, 2);
  EXPECT_THROW(fit_em(empty, 1, cfg, rng), InputError);
  Matrix X(3, 1);
  X << 1, 2, 3;
  EXPECT_THROW(fit_em(X, 5, cfg, rng), InputError);
  Matrix bad(2, 1);
  bad << 1.0, std::nan("");
  EXPECT_THROW(fit_em(bad, 1, cfg, rng), InputError);
}

TEST(FitEm, DeterministicGivenSeed) {
  RngStream data_rng(33);
  Matrix X(200, 2);
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = data_rng.normal() + (i % 2) * 4.0;
  EmConfig cfg;
  RngStream rng1(9), rng2(9);
  EmFit a = fit_em(X, 2, cfg, rng1);
  EmFit b = fit_em(X, 2, cfg, rng2);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  for (int k = 0; k < 2; ++k) {
    EXPECT_TRUE(a.model.means()[k] == b.model.means()[k]);
    EXPECT_TRUE(a.model.covariances()[k] == b.model.covariances()[k]);
  }
}

TEST(SelectKAic, ParameterCountByHand) {
  // p = (l-1) + l d + l d(d+1)/2
  EXPECT_DOUBLE_EQ(gmm_param_count(1, 2), 0 + 2 + 3);
  EXPECT_DOUBLE_EQ(gmm_param_count(2, 2), 1 + 4 + 6);
  EXPECT_DOUBLE_EQ(gmm_param_count(3, 4), 2 + 12 + 30);
}

TEST(SelectKAic, SingletonRange) {
  RngStream data_rng(55);
  Matrix X(100, 1);
  for (int i = 0; i < 100; ++i) X(i, 0) = data_rng.normal();
  EmConfig cfg;
  RngStream rng(2);
  AicSelection sel = select_k_aic(X, 1, 1, cfg, rng);
  EXPECT_EQ(sel.chosen_k, 1);
  ASSERT_EQ(sel.table.size(), 1u);
  EXPECT_TRUE(sel.table[0].ok);
}

TEST(SelectKAic, SingleGaussianDataPicksOne) {
  RngStream data_rng(77);
  Matrix X(2000, 2);
  for (int i = 0; i < 2000; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = data_rng.normal();
  EmConfig cfg;
  cfg.n_restarts = 2;
  RngStream rng(4);
  AicSelection sel = select_k_aic(X, 1, 3, cfg, rng);
  EXPECT_EQ(sel.chosen_k, 1);
}

TEST(SelectKAic, WellSeparatedThreeMixture) {
  RngStream data_rng(88);
  Matrix X(900, 2);
  double centers[3][2] = {{0.0, 0.0}, {20.0, 0.0}, {0.0, 20.0}};
  for (int i = 0; i < 900; ++i) {
    int c = i % 3;
    X(i, 0) = centers[c][0] + data_rng.normal();
    X(i, 1) = centers[c][1] + data_rng.normal();
  }

  // oracle: AIC of moment-matched models built from the known clusters
  auto moment_model = [&](int k) {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    Vector w = Vector::Constant(k, 1.0 / k);
    if (k == 1) {
      Vector mu = X.colwise().mean();
      Matrix centered = X.rowwise() - mu.transpose();
      means.push_back(mu);
      covs.push_back(centered.transpose() * centered / double(X.rows()) +
                     1e-6 * Matrix::Identity(2, 2));
    } else {  // k == 3: exact clusters
      for (int c = 0; c < 3; ++c) {
        Matrix xc(300, 2);
        int r = 0;
        for (int i = c; i < 900; i += 3) xc.row(r++) = X.row(i);
        Vector mu = xc.colwise().mean();
        Matrix centered = xc.rowwise() - mu.transpose();
        means.push_back(mu);
        covs.push_back(centered.transpose() * centered / double(xc.rows()) +
                       1e-6 * Matrix::Identity(2, 2));
      }
    }
    return GaussianMixture(w, means, covs);
  };
  double aic1 = 2 * gmm_param_count(1, 2) - 2 * moment_model(1).log_likelihood(X);
  double aic3 = 2 * gmm_param_count(3, 2) - 2 * moment_model(3).log_likelihood(X);
  EXPECT_LT(aic3, aic1);

  EmConfig cfg;
  cfg.n_restarts = 2;
  RngStream rng(6);
  AicSelection sel = select_k_aic(X, 1, 5, cfg, rng);
  EXPECT_EQ(sel.chosen_k, 3);
}

TEST(Serialization, RoundTrip) {
  RngStream rng(123);
  Vector w(2);
  w << 0.4, 0.6;
  std::vector<Vector> means{rng.normal_vector(3), rng.normal_vector(3)};
  Matrix A(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) A(r, c) = rng.normal();
  Matrix cov = A * A.transpose() / 3.0 + 0.2 * Matrix::Identity(3, 3);
  GaussianMixture m(w, means, {cov, Matrix::Identity(3, 3)}, 1e-8);

  GaussianMixture back = gmm_from_json(gmm_to_json(m));
  EXPECT_EQ(back.num_components(), 2);
  EXPECT_EQ(back.dim(), 3);
  EXPECT_TRUE(back.weights() == m.weights());
  for (int k = 0; k < 2; ++k) {
    EXPECT_TRUE(back.means()[k] == m.means()[k]);
    EXPECT_TRUE(back.covariances()[k] == m.covariances()[k]);
  }
  EXPECT_EQ(back.eps_reg(), m.eps_reg());
}

TEST(Serialization, RejectsUnknownFormat) {
  nlohmann::json j;
  j["format"] = "bogus";
  EXPECT_THROW(gmm_from_json(j), InputError);
}
