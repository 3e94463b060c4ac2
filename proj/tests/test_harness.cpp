#include "knockoff/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "knockoff/rng.hpp"

using namespace knockoff;

namespace {

double pearson(const Vector& a, const Vector& b) {
  double ma = a.mean(), mb = b.mean();
  double num = ((a.array() - ma) * (b.array() - mb)).sum();
  double den = std::sqrt((a.array() - ma).square().sum() * (b.array() - mb).square().sum());
  return num / den;
}

}  // namespace

TEST(GenerateSynthetic, LinearHookLabelsBySign) {
  SyntheticSpec spec;
  spec.n = 500;
  spec.d = 4;
  spec.l = 2;
  spec.C = 2;
  spec.nonnull_count = 1;
  spec.noise_sd = 0.0;
  // f_0 - f_1 = x_0: class 0 wins exactly when x_0 > 0
  std::vector<Polynomial> polys(2);
  polys[0].push_back(PolyTerm{1.0, {0}});
  RngStream rng(1);
  SyntheticData data = generate_synthetic(spec, polys, rng);
  for (int i = 0; i < spec.n; ++i) {
    EXPECT_EQ(data.y[i], data.X(i, 0) > 0 ? 0.0 : 1.0);
  }
}

TEST(GenerateSynthetic, HugeNoiseGivesUniformLabels) {
  SyntheticSpec spec;
  spec.n = 50000;
  spec.d = 3;
  spec.l = 2;
  spec.C = 4;
  spec.nonnull_count = 2;
  spec.noise_sd = 1e6;
  RngStream rng(2);
  SyntheticData data = generate_synthetic(spec, rng);
  Vector freq = Vector::Zero(4);
  for (int i = 0; i < spec.n; ++i) freq[static_cast<int>(data.y[i])] += 1.0;
  freq /= double(spec.n);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(freq[c], 0.25, 0.02);
}

TEST(GenerateSynthetic, DeterministicGivenSeed) {
  SyntheticSpec spec;
  spec.n = 100;
  spec.d = 5;
  spec.l = 3;
  spec.nonnull_count = 2;
  RngStream a(3), b(3);
  SyntheticData da = generate_synthetic(spec, a);
  SyntheticData db = generate_synthetic(spec, b);
  EXPECT_EQ(da.X, db.X);
  EXPECT_EQ(da.y, db.y);
}

TEST(GenerateSynthetic, SpecChecks) {
  SyntheticSpec spec;
  spec.nonnull_count = 50;
  spec.d = 10;
  RngStream rng(4);
  EXPECT_THROW(generate_synthetic(spec, rng), InputError);
}

TEST(BreakExperiment, IndependentBlockIsUncorrelated) {
  BreakConfig cfg;
  cfg.n = 50000;
  RngStream rng(5);
  SyntheticData data = generate_break_experiment(cfg, rng);
  EXPECT_EQ(data.X.cols(), 30);
  EXPECT_EQ(data.nonnulls.size(), 10u);
  RngStream pick(6);
  for (int t = 0; t < 6; ++t) {
    int j = static_cast<int>(pick.uniform_index(10));
    int k = 20 + static_cast<int>(pick.uniform_index(10));
    // independent blocks, but mixture means add variance; correlate the
    // centered-by-component... at the population level blocks are
    // uncorrelated only within components, so allow the loose band
    double r = pearson(data.X.col(j), data.X.col(k));
    EXPECT_LE(std::abs(r), 0.05) << "features " << j << "," << k;
  }
}

TEST(BreakExperiment, CorrelatedNullsActuallyCorrelate) {
  BreakConfig cfg;
  cfg.n = 50000;
  RngStream rng(7);
  SyntheticData data = generate_break_experiment(cfg, rng);
  for (int k = 0; k < data.model.num_components(); ++k) {
    const Matrix& cov = data.model.covariances()[k];
    double avg_pairwise = 0.0;
    for (int j = 0; j < 10; ++j) {
      double corr = cov(j, 10 + j) / std::sqrt(cov(j, j) * cov(10 + j, 10 + j));
      avg_pairwise += corr;
      // the correlated null is strongly explained by the whole nonnull block
      Matrix saa = cov.block(0, 0, 10, 10);
      Vector sab = cov.block(0, 10 + j, 10, 1);
      double resid = cov(10 + j, 10 + j) - sab.dot(saa.ldlt().solve(sab));
      EXPECT_NEAR(resid, 1.0 - cfg.explained_r2, 1e-9);
    }
    avg_pairwise /= 10.0;
    // pairwise coupling lands near the configured target
    EXPECT_NEAR(avg_pairwise, cfg.cross_corr, 0.2);
  }
}

TEST(BreakExperiment, PooledCovarianceDiagonallyDominated) {
  BreakConfig cfg;
  cfg.n = 50000;
  RngStream rng(8);
  SyntheticData data = generate_break_experiment(cfg, rng);

  auto offdiag_ratio = [](const Matrix& cov) {
    double off = 0.0, diag = 0.0;
    int d = static_cast<int>(cov.rows());
    for (int a = 0; a < d; ++a) {
      diag += std::abs(cov(a, a));
      for (int b = 0; b < d; ++b)
        if (a != b) off += std::abs(cov(a, b));
    }
    return (off / (d * (d - 1))) / (diag / d);
  };

  Vector mean = data.X.colwise().mean();
  Matrix centered = data.X.rowwise() - mean.transpose();
  Matrix pooled = centered.transpose() * centered / double(data.X.rows() - 1);

  double within = 0.0;
  for (int k = 0; k < data.model.num_components(); ++k)
    within += offdiag_ratio(data.model.covariances()[k]);
  within /= data.model.num_components();

  EXPECT_LT(offdiag_ratio(pooled), within);
}

TEST(BreakExperiment, IndependentNullsCarryNoSignal) {
  BreakConfig cfg;
  cfg.n = 50000;
  RngStream rng(9);
  SyntheticData data = generate_break_experiment(cfg, rng);
  // permutation test of |corr(Y, X_k)| for features in the independent block
  RngStream perm_rng(10);
  for (int k : {21, 25, 29}) {
    double observed = std::abs(pearson(data.X.col(k), data.y));
    int exceed = 0;
    const int reps = 200;
    std::vector<int> idx(data.X.rows());
    std::iota(idx.begin(), idx.end(), 0);
    for (int r = 0; r < reps; ++r) {
      perm_rng.shuffle(idx);
      Vector yp(data.y.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yp[i] = data.y[idx[i]];
      if (std::abs(pearson(data.X.col(k), yp)) >= observed) ++exceed;
    }
    double pvalue = double(exceed + 1) / double(reps + 1);
    EXPECT_GT(pvalue, 0.01) << "feature " << k;
  }
}

TEST(TMixture, LargeDofApproachesGaussianKurtosis) {
  RngStream rng(11);
  TMixtureResult t = generate_t_mixture(1000.0, 1, 100000, 2, 0.0, rng);
  Vector col = t.X.col(0);
  double m = col.mean();
  double var = (col.array() - m).square().mean();
  double kurt = (col.array() - m).pow(4).mean() / (var * var) - 3.0;
  EXPECT_NEAR(kurt, 0.0, 0.1);
  EXPECT_TRUE(t.warning.empty());
}

TEST(TMixture, LowDofHasHeavyTails) {
  RngStream rng(12);
  TMixtureResult t = generate_t_mixture(3.0, 1, 100000, 1, 0.0, rng);
  Vector col = t.X.col(0);
  double m = col.mean();
  double sd = std::sqrt((col.array() - m).square().mean());
  int exceed = 0;
  for (Eigen::Index i = 0; i < col.size(); ++i)
    if (std::abs(col[i] - m) > 5.0 * sd) ++exceed;
  // a Gaussian would see ~0.06 such points in expectation
  EXPECT_GT(exceed, 20);
}

TEST(TMixture, WarnsOnInfiniteVarianceRegime) {
  RngStream rng(13);
  TMixtureResult t = generate_t_mixture(2.0, 1, 100, 1, 0.0, rng);
  EXPECT_FALSE(t.warning.empty());
  EXPECT_THROW(generate_t_mixture(0.0, 1, 10, 1, 0.0, rng), InputError);
}

TEST(TMixture, DeterministicGivenSeed) {
  RngStream a(14), b(14);
  TMixtureResult ta = generate_t_mixture(5.0, 2, 50, 3, 1.0, a);
  TMixtureResult tb = generate_t_mixture(5.0, 2, 50, 3, 1.0, b);
  EXPECT_EQ(ta.X, tb.X);
}

TEST(RunExperiment, ZeroRepetitionsIsEmpty) {
  ExperimentConfig cfg;
  cfg.repetitions = 0;
  ExperimentResult res = run_experiment(cfg);
  EXPECT_TRUE(res.rows.empty());
  EXPECT_EQ(res.failed, 0);
  ASSERT_EQ(res.summary.size(), 1u);
  EXPECT_EQ(res.summary[0].reps_ok, 0);
}

TEST(RunExperiment, DeterministicGivenSeed) {
  ExperimentConfig cfg;
  cfg.data = DataKind::Break;
  cfg.brk.n = 400;
  cfg.model = ModelKind::GmmFixed;
  cfg.em.n_restarts = 1;
  cfg.em.max_iters = 50;
  cfg.method = StatMethod::LogisticCoef;
  cfg.q_grid = {0.2, 0.3};
  cfg.repetitions = 3;
  cfg.seed = 99;
  ExperimentResult a = run_experiment(cfg);
  ExperimentResult b = run_experiment(cfg);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].fdp, b.rows[i].fdp);
    EXPECT_EQ(a.rows[i].power, b.rows[i].power);
    EXPECT_EQ(a.rows[i].threshold, b.rows[i].threshold);
    EXPECT_EQ(a.rows[i].ok, b.rows[i].ok);
  }
  EXPECT_EQ(a.failed, 0);
}

TEST(RunExperiment, SharedWorkMultiMethod) {
  ExperimentConfig cfg;
  cfg.data = DataKind::SyntheticGmm;
  cfg.synth.n = 300;
  cfg.synth.d = 6;
  cfg.synth.l = 2;
  cfg.synth.C = 2;
  cfg.synth.nonnull_count = 2;
  cfg.em.n_restarts = 1;
  cfg.mlp.hidden = {12};
  cfg.mlp.epochs = 10;
  cfg.lambda_step = 2.5;
  cfg.lcd.family = GlmFamily::Binomial;
  cfg.lcd.lambda = 0.02;
  cfg.repetitions = 2;
  cfg.seed = 7;
  auto results = run_experiment_multi(cfg, {StatMethod::Lcd, StatMethod::Swap,
                                            StatMethod::SwapIntegral, StatMethod::Permutation});
  ASSERT_EQ(results.size(), 4u);
  for (const auto& res : results) {
    EXPECT_EQ(res.failed, 0);
    EXPECT_EQ(res.rows.size(), 2u);  // reps x q_grid
    for (const auto& row : res.rows) EXPECT_TRUE(row.ok);
  }
  // multi-method run reproduces the single-method run exactly
  ExperimentResult only_lcd = run_experiment(cfg);
  for (std::size_t i = 0; i < only_lcd.rows.size(); ++i) {
    EXPECT_EQ(only_lcd.rows[i].fdp, results[0].rows[i].fdp);
    EXPECT_EQ(only_lcd.rows[i].power, results[0].rows[i].power);
  }
}

TEST(RunExperiment, FailedRepetitionsAreRecordedNotFatal) {
  ExperimentConfig cfg;
  cfg.data = DataKind::SyntheticGmm;
  cfg.synth.n = 200;
  cfg.synth.d = 4;
  cfg.synth.l = 2;
  cfg.synth.C = 4;  // logistic-coef needs binary labels: every rep fails
  cfg.synth.nonnull_count = 2;
  cfg.method = StatMethod::LogisticCoef;
  cfg.repetitions = 3;
  ExperimentResult res = run_experiment(cfg);
  EXPECT_EQ(res.failed, 3);
  for (const auto& row : res.rows) {
    EXPECT_FALSE(row.ok);
    EXPECT_FALSE(row.error.empty());
  }
  EXPECT_EQ(res.summary[0].reps_ok, 0);
}

TEST(RunExperiment, QGridValidation) {
  ExperimentConfig cfg;
  cfg.q_grid = {1.5};
  EXPECT_THROW(run_experiment(cfg), InputError);
}
