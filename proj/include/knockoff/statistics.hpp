#ifndef KNOCKOFF_STATISTICS_HPP
#define KNOCKOFF_STATISTICS_HPP

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "knockoff/common.hpp"
#include "knockoff/paired.hpp"
#include "knockoff/predictors.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

/// Importance scores for the 2d columns of an augmented matrix: entries
/// 0..d-1 score the originals, d..2d-1 their knockoffs.
struct ScoreVector {
  Vector z;
  std::string method;
};

/// Per-feature statistics W_j = Z_j - Z~_j. Methods with internal randomness
/// record their seed so flip-sign checks can couple the streams.
struct StatVector {
  Vector w;
  std::string method;
  std::uint64_t seed = 0;
};

/// W as a function of the interpolation parameter lambda.
struct LambdaPath {
  Vector grid;    // strictly increasing, grid[0] == 0
  Matrix values;  // (grid size) x d
  std::string method;
};

inline Matrix augment(const Matrix& X, const Matrix& Xt) {
  require(X.rows() == Xt.rows() && X.cols() == Xt.cols(),
          "augment: knockoff matrix shape mismatch");
  Matrix aug(X.rows(), 2 * X.cols());
  aug << X, Xt;
  return aug;
}

/// Transposes original and knockoff columns for every j in S.
inline Matrix swap_columns(const Matrix& aug, const std::vector<int>& S) {
  require(aug.cols() % 2 == 0, "swap_columns: augmented matrix must have 2d columns");
  const Eigen::Index d = aug.cols() / 2;
  Matrix out = aug;
  for (int j : S) {
    require(j >= 0 && j < d, "swap_columns: index out of range");
    out.col(j) = aug.col(j + d);
    out.col(j + d) = aug.col(j);
  }
  return out;
}

inline StatVector scores_to_stats(const ScoreVector& scores) {
  require(scores.z.size() % 2 == 0, "scores_to_stats: score length must be even");
  const Eigen::Index d = scores.z.size() / 2;
  StatVector stats;
  stats.method = scores.method;
  stats.w.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) stats.w[j] = scores.z[j] - scores.z[j + d];
  return stats;
}

// ---------------------------------------------------------------------------
// fake-column builders

/// Produces the replacement ("fake") column used to measure accuracy drops.
class FakeBuilder {
 public:
  virtual ~FakeBuilder() = default;
  virtual Vector build(const Matrix& aug, int column) const = 0;
  virtual std::string name() const = 0;
};

/// Swap method: the fake of a column is its partner column (original <->
/// knockoff), so fakes stay on the data distribution.
class SwapFake : public FakeBuilder {
 public:
  Vector build(const Matrix& aug, int column) const override {
    const Eigen::Index d = aug.cols() / 2;
    Eigen::Index partner = column < d ? column + d : column - d;
    return aug.col(partner);
  }
  std::string name() const override { return "swap"; }
};

/// Permutation method: the fake is a seeded row shuffle of the column itself.
/// Each column uses an independent substream keyed by its identity; tests
/// that relabel columns pass the matching keys so the shuffles follow the
/// relabeling.
class PermutationFake : public FakeBuilder {
 public:
  explicit PermutationFake(std::uint64_t seed, std::vector<int> keys = {})
      : seed_(seed), keys_(std::move(keys)) {}

  Vector build(const Matrix& aug, int column) const override {
    int key = keys_.empty() ? column : keys_.at(column);
    RngStream rng(derive_seed(seed_, 0xfa4e, static_cast<std::uint64_t>(key)));
    std::vector<int> perm = rng.permutation(static_cast<std::size_t>(aug.rows()));
    Vector out(aug.rows());
    for (Eigen::Index i = 0; i < aug.rows(); ++i) out[i] = aug(perm[i], column);
    return out;
  }
  std::string name() const override { return "permutation"; }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<int> keys_;
};

// ---------------------------------------------------------------------------
// accuracy-drop scores and lambda paths

/// Importance scores from accuracy drops: for each augmented column, replace
/// it on the eval split by its fake and record baseline minus perturbed
/// accuracy. The predictor must already be trained on the train split of the
/// same (eval_split_seed, train_frac) row split.
inline ScoreVector accuracy_drop_scores(const Predictor& predictor, const Matrix& X,
                                        const Matrix& Xt, const Vector& y,
                                        const FakeBuilder& fake, std::uint64_t eval_split_seed,
                                        double train_frac = 0.75) {
  Matrix aug = augment(X, Xt);
  auto split = train_eval_split(static_cast<int>(aug.rows()), eval_split_seed, train_frac);
  Matrix aug_eval = take_rows(aug, split.eval);
  Vector y_eval = take_rows(y, split.eval);
  double baseline = predictor.accuracy(aug_eval, y_eval);

  ScoreVector scores;
  scores.method = fake.name();
  scores.z.resize(aug.cols());
  Matrix perturbed = aug_eval;
  for (Eigen::Index c = 0; c < aug.cols(); ++c) {
    Vector fake_col = fake.build(aug_eval, static_cast<int>(c));
    require(fake_col.size() == aug_eval.rows(), "accuracy_drop_scores: fake column length mismatch");
    perturbed.col(c) = fake_col;
    scores.z[c] = baseline - predictor.accuracy(perturbed, y_eval);
    perturbed.col(c) = aug_eval.col(c);
  }
  return scores;
}

inline Vector default_lambda_grid(double lambda_max = 10.0, double step = 0.25) {
  int points = static_cast<int>(std::lround(lambda_max / step)) + 1;
  Vector grid(points);
  for (int t = 0; t < points; ++t) grid[t] = step * t;
  grid[points - 1] = lambda_max;
  return grid;
}

/// W(lambda) for fake replacements interpolated toward their target:
/// column -> column + lambda (fake - column). The lambda = 0 row is zero by
/// construction and is not re-evaluated.
inline LambdaPath lambda_path(const Predictor& predictor, const Matrix& X, const Matrix& Xt,
                              const Vector& y, const FakeBuilder& fake, const Vector& grid,
                              std::uint64_t eval_split_seed, double train_frac = 0.75) {
  require(grid.size() >= 1 && grid[0] == 0.0, "lambda_path: grid must start at 0");
  for (Eigen::Index t = 1; t < grid.size(); ++t)
    require(grid[t] > grid[t - 1], "lambda_path: grid must be strictly increasing");

  Matrix aug = augment(X, Xt);
  const Eigen::Index d = X.cols();
  auto split = train_eval_split(static_cast<int>(aug.rows()), eval_split_seed, train_frac);
  Matrix aug_eval = take_rows(aug, split.eval);
  Vector y_eval = take_rows(y, split.eval);
  double baseline = predictor.accuracy(aug_eval, y_eval);

  // fake targets are fixed per column across the whole path
  Matrix targets(aug_eval.rows(), aug.cols());
  for (Eigen::Index c = 0; c < aug.cols(); ++c)
    targets.col(c) = fake.build(aug_eval, static_cast<int>(c));

  LambdaPath path;
  path.method = fake.name();
  path.grid = grid;
  path.values = Matrix::Zero(grid.size(), d);
  Matrix perturbed = aug_eval;
  for (Eigen::Index t = 1; t < grid.size(); ++t) {
    double lam = grid[t];
    Vector z(aug.cols());
    for (Eigen::Index c = 0; c < aug.cols(); ++c) {
      perturbed.col(c) = aug_eval.col(c) + lam * (targets.col(c) - aug_eval.col(c));
      z[c] = baseline - predictor.accuracy(perturbed, y_eval);
      perturbed.col(c) = aug_eval.col(c);
    }
    for (Eigen::Index j = 0; j < d; ++j) path.values(t, j) = z[j] - z[j + d];
  }
  return path;
}

/// Trapezoidal area under each feature's lambda path.
inline StatVector integrate_path(const LambdaPath& path) {
  require(path.grid.size() >= 2, "integrate_path: need at least two grid points");
  StatVector stats;
  stats.method = path.method + "-integral";
  stats.w = Vector::Zero(path.values.cols());
  for (Eigen::Index t = 0; t + 1 < path.grid.size(); ++t) {
    double h = path.grid[t + 1] - path.grid[t];
    for (Eigen::Index j = 0; j < path.values.cols(); ++j)
      stats.w[j] += 0.5 * h * (path.values(t, j) + path.values(t + 1, j));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// saliency scores

enum class SaliencyVariant { Gradient, IntegratedGradients };

/// Mean absolute attribution of the predicted class over the eval split.
/// For integrated gradients the baseline defaults to the train-split column
/// means of the augmented matrix.
inline ScoreVector saliency_scores(const MlpModel& model, const Matrix& X, const Matrix& Xt,
                                   SaliencyVariant variant, std::uint64_t eval_split_seed,
                                   double train_frac = 0.75, int ig_steps = 64,
                                   const Vector* baseline_override = nullptr) {
  if (!model.has_input_gradients())
    throw CapabilityError("saliency_scores: predictor does not expose input gradients");
  Matrix aug = augment(X, Xt);
  auto split = train_eval_split(static_cast<int>(aug.rows()), eval_split_seed, train_frac);
  Matrix aug_eval = take_rows(aug, split.eval);

  Vector baseline;
  if (variant == SaliencyVariant::IntegratedGradients) {
    if (baseline_override) {
      baseline = *baseline_override;
    } else {
      Matrix aug_train = take_rows(aug, split.train);
      baseline = aug_train.colwise().mean();
    }
  }

  ScoreVector scores;
  scores.method = variant == SaliencyVariant::Gradient ? "gradient" : "integrated-gradients";
  scores.z = Vector::Zero(aug.cols());
  Vector pred = model.predict(aug_eval);
  for (Eigen::Index i = 0; i < aug_eval.rows(); ++i) {
    int cls = static_cast<int>(pred[i]);
    Vector attr = variant == SaliencyVariant::Gradient
                      ? model.input_gradient(aug_eval.row(i).transpose(), cls)
                      : integrated_gradients(model, aug_eval.row(i).transpose(), baseline, cls,
                                             ig_steps);
    scores.z += attr.cwiseAbs();
  }
  scores.z /= double(aug_eval.rows());
  return scores;
}

// ---------------------------------------------------------------------------
// model-coefficient statistics

struct LcdControl {
  GlmFamily family = GlmFamily::Binomial;
  double lambda = -1.0;  // < 0: cross-validated
  int cv_folds = 5;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> update_order;
};

/// LASSO coefficient-difference: fit on the augmented matrix,
/// Z_j = |beta_j|, Z~_j = |beta_{d+j}|.
inline StatVector lcd_stats(const Matrix& X, const Matrix& Xt, const Vector& y,
                            const LcdControl& ctrl) {
  Matrix aug = augment(X, Xt);
  LassoControl lc;
  lc.lambda = ctrl.lambda;
  lc.cv_folds = ctrl.cv_folds;
  lc.l2 = ctrl.l2;
  lc.seed = ctrl.seed;
  lc.update_order = ctrl.update_order;
  LassoGlmFit fit = fit_lasso(aug, y, ctrl.family, lc);
  ScoreVector scores;
  scores.method = "lcd";
  scores.z = fit.coefficients.cwiseAbs();
  StatVector stats = scores_to_stats(scores);
  stats.seed = ctrl.seed;
  return stats;
}

/// Plain L2-logistic coefficient difference: Z_j = |beta_j| from a single
/// logistic fit on the augmented matrix.
inline StatVector logistic_coef_stats(const Matrix& X, const Matrix& Xt, const Vector& y,
                                      double l2, double tol = 1e-8) {
  Matrix aug = augment(X, Xt);
  LogisticControl ctrl;
  ctrl.l2 = l2;
  ctrl.tol = tol;
  LogisticModel model = fit_logistic(aug, y, ctrl);
  ScoreVector scores;
  scores.method = "logistic-coef";
  scores.z = model.coefficients.cwiseAbs();
  return scores_to_stats(scores);
}

}  // namespace knockoff

#endif  // KNOCKOFF_STATISTICS_HPP
