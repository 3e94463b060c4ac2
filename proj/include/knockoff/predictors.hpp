#ifndef KNOCKOFF_PREDICTORS_HPP
#define KNOCKOFF_PREDICTORS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "knockoff/common.hpp"
#include "knockoff/paired.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

// ---------------------------------------------------------------------------
// shared helpers

struct TrainEvalSplit {
  std::vector<int> train;
  std::vector<int> eval;
};

/// Seeded row split; rows only, so it commutes with any column relabeling.
inline TrainEvalSplit train_eval_split(int n, std::uint64_t seed, double train_frac = 0.75) {
  require(n >= 2, "train_eval_split: need at least two rows");
  require(train_frac > 0.0 && train_frac < 1.0, "train_eval_split: train_frac in (0,1)");
  RngStream rng(derive_seed(seed, 0x5e117));
  std::vector<int> idx = rng.permutation(n);
  int n_train = std::max(1, std::min(n - 1, static_cast<int>(std::lround(train_frac * n))));
  TrainEvalSplit split;
  split.train.assign(idx.begin(), idx.begin() + n_train);
  split.eval.assign(idx.begin() + n_train, idx.end());
  return split;
}

inline Matrix take_rows(const Matrix& X, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = X.row(rows[i]);
  return out;
}

inline Vector take_rows(const Vector& y, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[rows[i]];
  return out;
}

/// Rank-based AUC of scores against binary labels, ties averaged.
inline double auc(const Vector& scores, const std::vector<int>& labels) {
  require(scores.size() == static_cast<Eigen::Index>(labels.size()), "auc: size mismatch");
  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });
  std::vector<double> rank(labels.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double n_pos = 0, n_neg = 0, rank_sum_pos = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] == 1) {
      n_pos += 1;
      rank_sum_pos += rank[t];
    } else {
      n_neg += 1;
    }
  }
  require(n_pos > 0 && n_neg > 0, "auc: need both classes");
  return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

// ---------------------------------------------------------------------------
// predictor interface

/// A trained supervised model used by the statistics layer purely as a score
/// source. Implementations are immutable after fit and safe to share.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void fit(const Matrix& X, const Vector& y) = 0;
  virtual Vector predict(const Matrix& X) const = 0;
  /// 0/1 accuracy for classifiers, negative mean squared error for
  /// regression models; either way larger is better.
  virtual double accuracy(const Matrix& X, const Vector& y) const = 0;
  virtual bool has_input_gradients() const { return false; }
  virtual Vector input_gradient(const Vector&, int) const {
    throw CapabilityError("predictor does not expose input gradients");
  }
};

// ---------------------------------------------------------------------------
// lasso-penalized GLM by coordinate descent

enum class GlmFamily { Gaussian, Binomial };

struct LassoControl {
  double lambda = -1.0;  // fixed penalty (standardized scale); < 0 selects by CV
  int cv_folds = 5;
  double l2 = 0.0;  // optional ridge term, stabilizes duplicated columns
  int path_size = 50;
  double path_min_ratio = 1e-3;
  double tol = 1e-10;  // max coefficient change per sweep
  int max_sweeps = 2000;
  std::uint64_t seed = 0;           // fold assignment
  std::vector<int> update_order;    // empty = 0..p-1; explicit order keeps
                                    // refits comparable after column swaps
};

struct LassoGlmFit {
  Vector coefficients;  // original scale
  double intercept = 0.0;
  double lambda = 0.0;  // penalty actually used (standardized scale)
  GlmFamily family = GlmFamily::Gaussian;
  double kkt_residual = 0.0;
  std::vector<double> objective_path;  // per CD sweep (gaussian) or IRLS step (binomial)
  std::vector<double> cv_lambdas;
  std::vector<double> cv_deviance;
  std::vector<std::string> warnings;
};

namespace detail {

struct StandardizedDesign {
  Matrix Xs;                 // standardized columns; constant columns zeroed
  Vector mean, scale;        // original-scale column stats
  std::vector<bool> active;  // false for constant columns
};

inline StandardizedDesign standardize(const Matrix& X, std::vector<std::string>* warnings) {
  const Eigen::Index n = X.rows(), p = X.cols();
  StandardizedDesign d;
  d.Xs.resize(n, p);
  d.mean.resize(p);
  d.scale.resize(p);
  d.active.assign(p, true);
  for (Eigen::Index j = 0; j < p; ++j) {
    double m = X.col(j).mean();
    double var = (X.col(j).array() - m).square().mean();
    double s = std::sqrt(var);
    d.mean[j] = m;
    if (s <= 1e-12 * std::max(1.0, std::abs(m))) {
      d.active[j] = false;
      d.scale[j] = 1.0;
      d.Xs.col(j).setZero();
      if (warnings)
        warnings->push_back("column " + std::to_string(j) + " is constant; coefficient fixed at 0");
      continue;
    }
    d.scale[j] = s;
    d.Xs.col(j) = (X.col(j).array() - m) / s;
  }
  return d;
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

inline std::vector<int> default_order(int p, const std::vector<int>& requested) {
  if (!requested.empty()) {
    require(static_cast<int>(requested.size()) == p, "lasso: update_order length mismatch");
    return requested;
  }
  std::vector<int> o(p);
  std::iota(o.begin(), o.end(), 0);
  return o;
}

/// Cyclic coordinate descent for (1/2n)||yc - Xs b||^2 + lambda |b|_1 + l2/2 |b|_2^2.
/// yc must be centered; Xs standardized with inactive columns zeroed.
inline void cd_gaussian(const StandardizedDesign& d, const Vector& yc, double lambda, double l2,
                        const std::vector<int>& order, double tol, int max_sweeps, Vector& beta,
                        std::vector<double>* objective_path) {
  const Eigen::Index n = d.Xs.rows();
  Vector col_sq(d.Xs.cols());
  for (Eigen::Index j = 0; j < d.Xs.cols(); ++j) col_sq[j] = d.Xs.col(j).squaredNorm() / double(n);
  Vector r = yc - paired_matvec(d.Xs, beta);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (int j : order) {
      if (!d.active[j]) continue;
      double rho = d.Xs.col(j).dot(r) / double(n) + col_sq[j] * beta[j];
      double bnew = soft_threshold(rho, lambda) / (col_sq[j] + l2);
      double delta = bnew - beta[j];
      if (delta != 0.0) {
        r -= d.Xs.col(j) * delta;
        beta[j] = bnew;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (objective_path) {
      double obj = 0.5 * r.squaredNorm() / double(n) + lambda * paired_l1(beta) +
                   0.5 * l2 * paired_squared_norm(beta);
      objective_path->push_back(obj);
    }
    if (max_delta <= tol) break;
  }
}

inline double binomial_nll(const Vector& eta, const Vector& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    double e = eta[i];
    total += std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e))) - y[i] * e;
  }
  return total / double(eta.size());
}

/// IRLS with an inner weighted coordinate descent (glmnet-style); outer steps
/// are halved whenever the true penalized deviance would increase.
inline void cd_binomial(const StandardizedDesign& d, const Vector& y, double lambda, double l2,
                        const std::vector<int>& order, double tol, int max_sweeps, double& b0,
                        Vector& beta, std::vector<double>* objective_path) {
  const Eigen::Index n = d.Xs.rows();
  auto penalized = [&](double icpt, const Vector& b) {
    Vector eta = Vector::Constant(n, icpt) + paired_matvec(d.Xs, b);
    return binomial_nll(eta, y) + lambda * paired_l1(b) + 0.5 * l2 * paired_squared_norm(b);
  };
  double obj = penalized(b0, beta);
  if (objective_path) objective_path->push_back(obj);
  const int max_outer = 100;
  for (int outer = 0; outer < max_outer; ++outer) {
    Vector eta = Vector::Constant(n, b0) + paired_matvec(d.Xs, beta);
    Vector w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double p = 1.0 / (1.0 + std::exp(-eta[i]));
      double wi = std::max(p * (1.0 - p), 1e-5);
      w[i] = wi;
      z[i] = eta[i] + (y[i] - p) / wi;
    }
    double w_sum = w.sum();
    Vector wx2(d.Xs.cols());
    for (Eigen::Index j = 0; j < d.Xs.cols(); ++j)
      wx2[j] = (w.array() * d.Xs.col(j).array().square()).sum() / double(n);

    double b0_new = b0;
    Vector beta_new = beta;
    Vector r = z - Vector::Constant(n, b0_new) - paired_matvec(d.Xs, beta_new);
    for (int sweep = 0; sweep < std::min(max_sweeps, 200); ++sweep) {
      double max_delta = 0.0;
      for (int j : order) {
        if (!d.active[j]) continue;
        double rho = (w.array() * d.Xs.col(j).array() * r.array()).sum() / double(n) +
                     wx2[j] * beta_new[j];
        double bnew = soft_threshold(rho, lambda) / (wx2[j] + l2);
        double delta = bnew - beta_new[j];
        if (delta != 0.0) {
          r -= d.Xs.col(j) * delta;
          beta_new[j] = bnew;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      double icpt_delta = (w.array() * r.array()).sum() / w_sum;
      if (icpt_delta != 0.0) {
        b0_new += icpt_delta;
        r.array() -= icpt_delta;
        max_delta = std::max(max_delta, std::abs(icpt_delta));
      }
      if (max_delta <= tol) break;
    }

    double obj_new = penalized(b0_new, beta_new);
    int halvings = 0;
    while (obj_new > obj + 1e-12 && halvings < 30) {
      b0_new = 0.5 * (b0 + b0_new);
      beta_new = 0.5 * (beta + beta_new);
      obj_new = penalized(b0_new, beta_new);
      ++halvings;
    }
    double step = std::max(std::abs(b0_new - b0), (beta_new - beta).cwiseAbs().maxCoeff());
    b0 = b0_new;
    beta = beta_new;
    obj = obj_new;
    if (objective_path) objective_path->push_back(obj);
    if (step <= std::max(tol, 1e-9)) break;
  }
}

inline double kkt_residual_glm(const StandardizedDesign& d, const Vector& grad_nll, double lambda,
                               double l2, const Vector& beta) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (!d.active[j]) continue;
    double g = grad_nll[j] + l2 * beta[j];
    double v = beta[j] != 0.0 ? std::abs(g + lambda * (beta[j] > 0 ? 1.0 : -1.0))
                              : std::max(0.0, std::abs(g) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace detail

/// Coordinate-descent lasso GLM. Columns are standardized internally and the
/// coefficients mapped back to the original scale. With ctrl.lambda < 0 the
/// penalty is chosen by k-fold cross-validated deviance over a log-spaced
/// path from the all-zero point.
inline LassoGlmFit fit_lasso(const Matrix& X, const Vector& y, GlmFamily family,
                             const LassoControl& ctrl) {
  const Eigen::Index n = X.rows(), p = X.cols();
  require(n >= 2, "fit_lasso: need at least two rows");
  require(y.size() == n, "fit_lasso: label length mismatch");
  if (family == GlmFamily::Binomial)
    for (Eigen::Index i = 0; i < n; ++i)
      require(y[i] == 0.0 || y[i] == 1.0, "fit_lasso: binomial labels must be 0/1");

  LassoGlmFit fit;
  fit.family = family;
  auto order = detail::default_order(static_cast<int>(p), ctrl.update_order);

  auto solve_at = [&](const Matrix& Xf, const Vector& yf, double lambda,
                      std::vector<double>* obj_path, Vector& beta_std,
                      detail::StandardizedDesign& design, double& intercept_std,
                      std::vector<std::string>* warn) {
    design = detail::standardize(Xf, warn);
    if (family == GlmFamily::Gaussian) {
      double ym = yf.mean();
      Vector yc = yf.array() - ym;
      detail::cd_gaussian(design, yc, lambda, ctrl.l2, order, ctrl.tol, ctrl.max_sweeps, beta_std,
                          obj_path);
      intercept_std = ym;
    } else {
      detail::cd_binomial(design, yf, lambda, ctrl.l2, order, ctrl.tol, ctrl.max_sweeps,
                          intercept_std, beta_std, obj_path);
    }
  };

  auto lambda_max_of = [&](const Matrix& Xf, const Vector& yf) {
    auto design = detail::standardize(Xf, nullptr);
    double base = yf.mean();
    double lmax = 0.0;
    for (Eigen::Index j = 0; j < Xf.cols(); ++j) {
      if (!design.active[j]) continue;
      double g = std::abs(design.Xs.col(j).dot((yf.array() - base).matrix()) / double(Xf.rows()));
      lmax = std::max(lmax, g);
    }
    return std::max(lmax, 1e-12);
  };

  double lambda = ctrl.lambda;
  if (lambda < 0.0) {
    // cross-validated path
    require(ctrl.cv_folds >= 2, "fit_lasso: cv_folds must be >= 2");
    double lmax = lambda_max_of(X, y);
    std::vector<double> path(ctrl.path_size);
    for (int t = 0; t < ctrl.path_size; ++t) {
      double frac = ctrl.path_size == 1 ? 0.0 : double(t) / double(ctrl.path_size - 1);
      path[t] = lmax * std::pow(ctrl.path_min_ratio, frac);
    }
    RngStream rng(derive_seed(ctrl.seed, 0xcf01d));
    std::vector<int> rows = rng.permutation(static_cast<std::size_t>(n));
    std::vector<double> cv_dev(path.size(), 0.0);
    for (int fold = 0; fold < ctrl.cv_folds; ++fold) {
      std::vector<int> train_rows, test_rows;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        (static_cast<int>(i) % ctrl.cv_folds == fold ? test_rows : train_rows).push_back(rows[i]);
      }
      Matrix Xtr = take_rows(X, train_rows), Xte = take_rows(X, test_rows);
      Vector ytr = take_rows(y, train_rows), yte = take_rows(y, test_rows);
      Vector beta_std = Vector::Zero(p);
      double icpt_std = 0.0;
      detail::StandardizedDesign design;
      for (std::size_t t = 0; t < path.size(); ++t) {  // warm start down the path
        solve_at(Xtr, ytr, path[t], nullptr, beta_std, design, icpt_std, nullptr);
        // original-scale parameters for held-out deviance
        Vector beta_orig = Vector::Zero(p);
        double icpt_orig = icpt_std;
        for (Eigen::Index j = 0; j < p; ++j) {
          if (!design.active[j]) continue;
          beta_orig[j] = beta_std[j] / design.scale[j];
          icpt_orig -= beta_orig[j] * design.mean[j];
        }
        Vector eta = Vector::Constant(Xte.rows(), icpt_orig) + paired_matvec(Xte, beta_orig);
        double dev;
        if (family == GlmFamily::Gaussian) {
          dev = (yte - eta).squaredNorm() / double(Xte.rows());
        } else {
          dev = 2.0 * detail::binomial_nll(eta, yte);
        }
        cv_dev[t] += dev / double(ctrl.cv_folds);
      }
    }
    std::size_t best = 0;
    for (std::size_t t = 1; t < path.size(); ++t)
      if (cv_dev[t] < cv_dev[best]) best = t;
    lambda = path[best];
    fit.cv_lambdas = path;
    fit.cv_deviance = cv_dev;
  }

  Vector beta_std = Vector::Zero(p);
  double icpt_std = 0.0;
  detail::StandardizedDesign design;
  solve_at(X, y, lambda, &fit.objective_path, beta_std, design, icpt_std, &fit.warnings);

  fit.lambda = lambda;
  fit.coefficients = Vector::Zero(p);
  fit.intercept = icpt_std;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!design.active[j]) continue;
    fit.coefficients[j] = beta_std[j] / design.scale[j];
    fit.intercept -= fit.coefficients[j] * design.mean[j];
  }

  // KKT residual on the standardized problem
  Vector grad_nll(p);
  if (family == GlmFamily::Gaussian) {
    Vector yc = y.array() - y.mean();
    Vector r = yc - paired_matvec(design.Xs, beta_std);
    for (Eigen::Index j = 0; j < p; ++j) grad_nll[j] = -design.Xs.col(j).dot(r) / double(n);
  } else {
    Vector eta = Vector::Constant(n, icpt_std) + paired_matvec(design.Xs, beta_std);
    Vector pr(n);
    for (Eigen::Index i = 0; i < n; ++i) pr[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    for (Eigen::Index j = 0; j < p; ++j)
      grad_nll[j] = design.Xs.col(j).dot(pr - y) / double(n);
  }
  fit.kkt_residual = detail::kkt_residual_glm(design, grad_nll, lambda, ctrl.l2, beta_std);
  return fit;
}

// ---------------------------------------------------------------------------
// L2 logistic regression via L-BFGS (no matrix factorization, so the solve
// commutes exactly with original/knockoff column swaps)

struct LogisticModel {
  Vector coefficients;
  double intercept = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;

  double decision(const Vector& x) const { return intercept + paired_dot(coefficients, x); }
};

struct LogisticControl {
  double l2 = 0.0;  // ridge on coefficients (not the intercept), per-sample scale
  double tol = 1e-8;
  int max_iters = 1000;
  int history = 10;  // L-BFGS memory
};

namespace detail {

struct Theta {
  double b0 = 0.0;
  Vector b;
};

inline double theta_dot(const Theta& a, const Theta& c) {
  return a.b0 * c.b0 + paired_dot(a.b, c.b);
}

inline Theta theta_axpy(double alpha, const Theta& x, const Theta& y) {
  return Theta{y.b0 + alpha * x.b0, y.b + alpha * x.b};
}

}  // namespace detail

/// Binary logistic regression: minimizes mean log-loss + (l2/2)|beta|^2 to a
/// 1e-8 gradient norm. With l2 = 0 a perfectly separable dataset has no
/// finite optimum; that situation is reported as an input error suggesting a
/// positive l2.
inline LogisticModel fit_logistic(const Matrix& X, const Vector& y, const LogisticControl& ctrl) {
  const Eigen::Index n = X.rows(), p = X.cols();
  require(n >= 2, "fit_logistic: need at least two rows");
  require(y.size() == n, "fit_logistic: label length mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    require(y[i] == 0.0 || y[i] == 1.0, "fit_logistic: labels must be 0/1");

  using detail::Theta;
  auto objective = [&](const Theta& t, Theta& grad) {
    Vector eta = Vector::Constant(n, t.b0) + paired_matvec(X, t.b);
    double nll = detail::binomial_nll(eta, y);
    Vector pr(n);
    for (Eigen::Index i = 0; i < n; ++i) pr[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    Vector resid = pr - y;
    grad.b0 = resid.mean();
    grad.b.resize(p);
    for (Eigen::Index j = 0; j < p; ++j)
      grad.b[j] = X.col(j).dot(resid) / double(n) + ctrl.l2 * t.b[j];
    return nll + 0.5 * ctrl.l2 * paired_squared_norm(t.b);
  };

  Theta theta{0.0, Vector::Zero(p)};
  Theta grad;
  double f = objective(theta, grad);

  std::vector<Theta> s_hist, y_hist;
  std::vector<double> rho_hist;
  int iter = 0;
  double gnorm = std::sqrt(detail::theta_dot(grad, grad));
  for (; iter < ctrl.max_iters && gnorm > ctrl.tol; ++iter) {
    // two-loop recursion
    Theta q = grad;
    std::vector<double> alpha(s_hist.size());
    for (int h = static_cast<int>(s_hist.size()) - 1; h >= 0; --h) {
      alpha[h] = rho_hist[h] * detail::theta_dot(s_hist[h], q);
      q = detail::theta_axpy(-alpha[h], y_hist[h], q);
    }
    double gamma = 1.0;
    if (!s_hist.empty()) {
      const Theta& sl = s_hist.back();
      const Theta& yl = y_hist.back();
      gamma = detail::theta_dot(sl, yl) / std::max(detail::theta_dot(yl, yl), 1e-300);
    }
    Theta r{gamma * q.b0, gamma * q.b};
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      double beta_h = rho_hist[h] * detail::theta_dot(y_hist[h], r);
      r = detail::theta_axpy(alpha[h] - beta_h, s_hist[h], r);
    }
    Theta dir{-r.b0, -r.b};
    double slope = detail::theta_dot(grad, dir);
    if (!(slope < 0.0)) {  // fall back to steepest descent
      dir = Theta{-grad.b0, -grad.b};
      slope = -detail::theta_dot(grad, grad);
    }

    // backtracking Armijo line search
    double step = 1.0;
    Theta trial;
    Theta trial_grad;
    double f_trial = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = detail::theta_axpy(step, dir, theta);
      f_trial = objective(trial, trial_grad);
      if (f_trial <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Theta s{trial.b0 - theta.b0, trial.b - theta.b};
    Theta yv{trial_grad.b0 - grad.b0, trial_grad.b - grad.b};
    double sy = detail::theta_dot(s, yv);
    if (sy > 1e-12) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > ctrl.history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    theta = trial;
    grad = trial_grad;
    f = f_trial;
    gnorm = std::sqrt(detail::theta_dot(grad, grad));
  }

  // With l2 = 0 a separable dataset has no finite optimum: the loss can be
  // driven to 0 with diverging coefficients, so a vanishing loss is the
  // signature of separation rather than a valid fit.
  if (ctrl.l2 == 0.0 && f < 1e-6) {
    throw InputError(
        "fit_logistic: the classes are perfectly separated, so the unpenalized "
        "optimum does not exist; refit with a positive l2");
  }
  if (gnorm > ctrl.tol) {
    if (ctrl.l2 == 0.0) {
      throw InputError(
          "fit_logistic: did not converge; the classes appear perfectly separated, "
          "refit with a positive l2 penalty");
    }
    throw NumericError("fit_logistic: did not reach gradient tolerance after " +
                       std::to_string(iter) + " iterations (|g| = " + std::to_string(gnorm) + ")");
  }

  LogisticModel model;
  model.coefficients = theta.b;
  model.intercept = theta.b0;
  model.iterations = iter;
  model.grad_norm = gnorm;
  return model;
}

// ---------------------------------------------------------------------------
// small fully connected network with softmax output

struct MlpConfig {
  std::vector<int> hidden = {64, 64, 64};
  int epochs = 100;
  double learning_rate = 1e-3;  // Adam
  int batch_size = 64;
  std::uint64_t seed = 0;
  /// Initialize first-layer weights identically for column j and column
  /// j + p/2. On augmented [X, knockoff] inputs this makes the whole training
  /// trajectory equivariant under original/knockoff swaps.
  bool pair_input_columns = false;
  int num_classes = 0;  // 0 = infer from labels
};

class MlpModel : public Predictor {
 public:
  explicit MlpModel(MlpConfig cfg = {}) : cfg_(std::move(cfg)) {}

  const MlpConfig& config() const { return cfg_; }
  int num_classes() const { return classes_; }
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }
  const std::vector<Matrix>& weights() const { return W_; }
  const std::vector<Vector>& biases() const { return b_; }

  void fit(const Matrix& X, const Vector& y) override {
    const Eigen::Index n = X.rows();
    require(n >= 1, "fit_mlp: empty data");
    require(y.size() == n, "fit_mlp: label length mismatch");
    int classes = cfg_.num_classes;
    for (Eigen::Index i = 0; i < n; ++i) {
      double lbl = y[i];
      require(lbl == std::floor(lbl) && lbl >= 0, "fit_mlp: labels must be class indices");
      classes = std::max(classes, static_cast<int>(lbl) + 1);
    }
    require(classes >= 2, "fit_mlp: need at least two classes");
    classes_ = classes;
    init_weights(static_cast<int>(X.cols()));

    std::vector<Matrix> mW(W_.size()), vW(W_.size());
    std::vector<Vector> mb(b_.size()), vb(b_.size());
    for (std::size_t l = 0; l < W_.size(); ++l) {
      mW[l] = Matrix::Zero(W_[l].rows(), W_[l].cols());
      vW[l] = Matrix::Zero(W_[l].rows(), W_[l].cols());
      mb[l] = Vector::Zero(b_[l].size());
      vb[l] = Vector::Zero(b_[l].size());
    }
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    epoch_losses_.clear();

    RngStream shuffle_rng(derive_seed(cfg_.seed, 0x50f1e));
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      RngStream er = shuffle_rng.substream(static_cast<std::uint64_t>(epoch));
      std::vector<int> order = er.permutation(static_cast<std::size_t>(n));
      double epoch_loss = 0.0;
      Eigen::Index done = 0;
      while (done < n) {
        Eigen::Index bs = std::min<Eigen::Index>(cfg_.batch_size, n - done);
        std::vector<int> rows(order.begin() + done, order.begin() + done + bs);
        done += bs;
        Matrix Xb = take_rows(X, rows);
        Vector yb = take_rows(y, rows);

        auto acts = forward(Xb);
        const Matrix& logits = acts.back();
        Matrix probs = softmax(logits);
        double loss = 0.0;
        Matrix delta = probs;
        for (Eigen::Index i = 0; i < bs; ++i) {
          int cls = static_cast<int>(yb[i]);
          loss -= std::log(std::max(probs(i, cls), 1e-300));
          delta(i, cls) -= 1.0;
        }
        loss /= double(bs);
        delta /= double(bs);
        if (!std::isfinite(loss))
          throw NumericError("fit_mlp: non-finite loss at epoch " + std::to_string(epoch));
        epoch_loss += loss * double(bs);

        // backprop
        std::vector<Matrix> gW(W_.size());
        std::vector<Vector> gb(W_.size());
        Matrix cur = delta;  // d loss / d pre-activation of layer l
        for (int l = static_cast<int>(W_.size()) - 1; l >= 0; --l) {
          const Matrix& input = l == 0 ? Xb : acts[l - 1];
          gW[l] = cur.transpose() * input;
          gb[l] = cur.colwise().sum();
          if (l > 0) {
            Matrix back = cur * W_[l];
            // ReLU mask of the previous layer's activations
            back = back.array() * (acts[l - 1].array() > 0.0).cast<double>();
            cur = back;
          }
        }

        ++t;
        double corr1 = 1.0 - std::pow(beta1, double(t));
        double corr2 = 1.0 - std::pow(beta2, double(t));
        for (std::size_t l = 0; l < W_.size(); ++l) {
          mW[l] = beta1 * mW[l] + (1.0 - beta1) * gW[l];
          vW[l] = beta2 * vW[l] + (1.0 - beta2) * gW[l].cwiseProduct(gW[l]);
          W_[l].array() -= cfg_.learning_rate * (mW[l].array() / corr1) /
                           ((vW[l].array() / corr2).sqrt() + eps);
          mb[l] = beta1 * mb[l] + (1.0 - beta1) * gb[l];
          vb[l] = beta2 * vb[l] + (1.0 - beta2) * gb[l].cwiseProduct(gb[l]);
          b_[l].array() -= cfg_.learning_rate * (mb[l].array() / corr1) /
                           ((vb[l].array() / corr2).sqrt() + eps);
        }
      }
      epoch_losses_.push_back(epoch_loss / double(n));
    }
  }

  Vector predict(const Matrix& X) const override {
    Matrix logits = forward_logits(X);
    Vector labels(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      Eigen::Index best;
      logits.row(i).maxCoeff(&best);
      labels[i] = double(best);
    }
    return labels;
  }

  double accuracy(const Matrix& X, const Vector& y) const override {
    Vector pred = predict(X);
    double correct = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (pred[i] == y[i]) correct += 1.0;
    return correct / double(X.rows());
  }

  bool has_input_gradients() const override { return true; }

  double logit(const Vector& x, int cls) const {
    Matrix logits = forward_logits(x.transpose());
    return logits(0, cls);
  }

  /// Gradient of the class logit with respect to the input.
  Vector input_gradient(const Vector& x, int cls) const override {
    require(cls >= 0 && cls < classes_, "input_gradient: class out of range");
    auto acts = forward(x.transpose());
    const int L = static_cast<int>(W_.size());
    Vector cur = Vector::Zero(classes_);
    cur[cls] = 1.0;  // d logit_cls / d logits
    for (int l = L - 1; l >= 1; --l) {
      Vector back = W_[l].transpose() * cur;
      back = back.array() * (acts[l - 1].row(0).transpose().array() > 0.0).cast<double>();
      cur = back;
    }
    return W_[0].transpose() * cur;
  }

  Matrix forward_logits(const Matrix& X) const {
    return forward(X).back();
  }

  /// Test hook: directly install weights (layer sizes must be consistent).
  void set_parameters(std::vector<Matrix> W, std::vector<Vector> b, int classes) {
    W_ = std::move(W);
    b_ = std::move(b);
    classes_ = classes;
  }

 private:
  void init_weights(int input_dim) {
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    for (int h : cfg_.hidden) sizes.push_back(h);
    sizes.push_back(classes_);
    W_.clear();
    b_.clear();
    RngStream wr(derive_seed(cfg_.seed, 0x1417));
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      int fan_in = sizes[l], fan_out = sizes[l + 1];
      double sd = std::sqrt(2.0 / double(fan_in));
      Matrix W(fan_out, fan_in);
      if (l == 0 && cfg_.pair_input_columns && fan_in % 2 == 0) {
        int half = fan_in / 2;
        for (int o = 0; o < fan_out; ++o)
          for (int j = 0; j < half; ++j) {
            double v = sd * wr.normal();
            W(o, j) = v;
            W(o, j + half) = v;
          }
      } else {
        for (int o = 0; o < fan_out; ++o)
          for (int j = 0; j < fan_in; ++j) W(o, j) = sd * wr.normal();
      }
      W_.push_back(W);
      b_.push_back(Vector::Zero(fan_out));
    }
  }

  /// Activations per layer (post-ReLU for hidden, raw logits for the last).
  std::vector<Matrix> forward(const Matrix& X) const {
    std::vector<Matrix> acts;
    const int L = static_cast<int>(W_.size());
    Matrix cur;
    for (int l = 0; l < L; ++l) {
      // The first layer reduces over (possibly augmented) input columns
      // pairwise; later layers reduce over our own hidden units.
      Matrix z = l == 0 ? paired_linear(X, W_[0]) : Matrix(acts.back() * W_[l].transpose());
      z.rowwise() += b_[l].transpose();
      if (l + 1 < L) z = z.cwiseMax(0.0);
      acts.push_back(std::move(z));
    }
    return acts;
  }

  static Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      double m = logits.row(i).maxCoeff();
      double s = 0.0;
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        out(i, c) = std::exp(logits(i, c) - m);
        s += out(i, c);
      }
      out.row(i) /= s;
    }
    return out;
  }

  MlpConfig cfg_;
  int classes_ = 0;
  std::vector<Matrix> W_;
  std::vector<Vector> b_;
  std::vector<double> epoch_losses_;
};

/// Convenience wrapper matching the operation signature.
inline MlpModel fit_mlp(const Matrix& X, const Vector& y, MlpConfig cfg) {
  MlpModel model(std::move(cfg));
  model.fit(X, y);
  return model;
}

/// Integrated gradients with a midpoint rule along the straight path from
/// the baseline; attribution_c = (x_c - baseline_c) * mean gradient.
inline Vector integrated_gradients(const MlpModel& model, const Vector& x, const Vector& baseline,
                                   int cls, int steps = 256) {
  require(steps >= 1, "integrated_gradients: steps must be positive");
  require(baseline.size() == x.size(), "integrated_gradients: baseline dimension mismatch");
  Vector avg = Vector::Zero(x.size());
  for (int t = 0; t < steps; ++t) {
    double alpha = (double(t) + 0.5) / double(steps);
    Vector xt = baseline + alpha * (x - baseline);
    avg += model.input_gradient(xt, cls);
  }
  avg /= double(steps);
  return (x - baseline).cwiseProduct(avg);
}

}  // namespace knockoff

#endif  // KNOCKOFF_PREDICTORS_HPP
