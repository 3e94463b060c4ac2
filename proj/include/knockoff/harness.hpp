#ifndef KNOCKOFF_HARNESS_HPP
#define KNOCKOFF_HARNESS_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "knockoff/common.hpp"
#include "knockoff/filter.hpp"
#include "knockoff/gmm.hpp"
#include "knockoff/knockoff_core.hpp"
#include "knockoff/predictors.hpp"
#include "knockoff/rng.hpp"
#include "knockoff/statistics.hpp"

namespace knockoff {

// ---------------------------------------------------------------------------
// synthetic data generation

struct SyntheticSpec {
  int n = 2000;
  int d = 30;
  int l = 10;  // mixture components of the feature model
  int C = 2;   // label classes
  int nonnull_count = 10;
  int poly_degree = 3;
  double noise_sd = 0.1;   // sd of the per-class label noise
  double mean_box = 3.0;   // component means uniform in [-mean_box, mean_box]^d
  std::uint64_t seed = 0;  // informational; generation uses the passed stream

  void check() const {
    require(n >= 1 && d >= 1 && l >= 1, "SyntheticSpec: n, d, l must be positive");
    require(C >= 2, "SyntheticSpec: need at least two classes");
    require(nonnull_count >= 1 && nonnull_count <= d,
            "SyntheticSpec: nonnull_count must lie in [1, d]");
    require(poly_degree >= 1, "SyntheticSpec: polynomial degree must be positive");
    require(noise_sd >= 0.0, "SyntheticSpec: negative noise sd");
  }
};

/// Sum of coef * prod_{v in vars} x_v terms.
struct PolyTerm {
  double coef = 0.0;
  std::vector<int> vars;
};
using Polynomial = std::vector<PolyTerm>;

inline double eval_polynomial(const Polynomial& poly, const Vector& x) {
  double total = 0.0;
  for (const auto& term : poly) {
    double v = term.coef;
    for (int idx : term.vars) v *= x[idx];
    total += v;
  }
  return total;
}

namespace detail {

/// All monomials over `vars` with total degree 0..degree (multisets with
/// repetition, enumerated by non-decreasing variable index).
inline void enumerate_monomials(const std::vector<int>& vars, int degree,
                                std::vector<std::vector<int>>& out, std::vector<int>& current,
                                std::size_t start) {
  out.push_back(current);
  if (static_cast<int>(current.size()) == degree) return;
  for (std::size_t i = start; i < vars.size(); ++i) {
    current.push_back(vars[i]);
    enumerate_monomials(vars, degree, out, current, i);
    current.pop_back();
  }
}

inline Matrix random_spd(int d, RngStream& rng) {
  Matrix A(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) A(r, c) = rng.normal();
  return A * A.transpose() / double(d) + 0.1 * Matrix::Identity(d, d);
}

inline GaussianMixture random_mixture(int l, int d, double mean_box, RngStream& rng) {
  Vector weights(l);
  for (int k = 0; k < l; ++k) weights[k] = 0.5 + rng.uniform();
  weights /= weights.sum();
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (int k = 0; k < l; ++k) {
    Vector mu(d);
    for (int j = 0; j < d; ++j) mu[j] = rng.uniform(-mean_box, mean_box);
    means.push_back(mu);
    covs.push_back(random_spd(d, rng));
  }
  return GaussianMixture(weights, means, covs);
}

}  // namespace detail

inline std::vector<Polynomial> random_polynomials(int classes, const std::vector<int>& nonnulls,
                                                  int degree, RngStream& rng) {
  std::vector<std::vector<int>> monomials;
  std::vector<int> current;
  detail::enumerate_monomials(nonnulls, degree, monomials, current, 0);
  std::vector<Polynomial> polys(classes);
  for (int c = 0; c < classes; ++c) {
    for (const auto& vars : monomials) {
      polys[c].push_back(PolyTerm{rng.normal(), vars});
    }
  }
  return polys;
}

/// Labels each row by argmax_c (f_c(x) + noise).
inline Vector polynomial_labels(const Matrix& X, const std::vector<Polynomial>& polys,
                                double noise_sd, RngStream& rng) {
  Vector y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < polys.size(); ++c) {
      double score = eval_polynomial(polys[c], X.row(i).transpose()) + noise_sd * rng.normal();
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(c);
      }
    }
    y[i] = double(best);
  }
  return y;
}

struct SyntheticData {
  Matrix X;
  Vector y;
  std::vector<int> nonnulls;
  GaussianMixture model;  // the ground-truth feature distribution
};

/// Synthetic task: X from a random Gaussian mixture, labels from noisy
/// argmax of random degree-3 polynomials over the first nonnull_count
/// coordinates. Explicit polynomials may be supplied as a test hook.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec,
                                        const std::vector<Polynomial>& polys, RngStream& rng) {
  spec.check();
  require(static_cast<int>(polys.size()) == spec.C,
          "generate_synthetic: one polynomial per class required");
  GaussianMixture model = detail::random_mixture(spec.l, spec.d, spec.mean_box, rng);
  RngStream sample_rng = rng.substream(0xda7a);
  Matrix X = model.sample(spec.n, sample_rng);
  RngStream label_rng = rng.substream(0x1abe1);
  Vector y = polynomial_labels(X, polys, spec.noise_sd, label_rng);
  std::vector<int> nonnulls(spec.nonnull_count);
  std::iota(nonnulls.begin(), nonnulls.end(), 0);
  return SyntheticData{std::move(X), std::move(y), std::move(nonnulls), std::move(model)};
}

inline SyntheticData generate_synthetic(const SyntheticSpec& spec, RngStream& rng) {
  spec.check();
  std::vector<int> nonnulls(spec.nonnull_count);
  std::iota(nonnulls.begin(), nonnulls.end(), 0);
  RngStream poly_rng = rng.substream(0x9017);
  auto polys = random_polynomials(spec.C, nonnulls, spec.poly_degree, poly_rng);
  return generate_synthetic(spec, polys, rng);
}

// ---------------------------------------------------------------------------
// the FDR-break experiment

struct BreakConfig {
  int n = 2000;
  int l = 3;
  double cross_corr = 0.7;     // target within-component corr of null 10+j with nonnull j
  double explained_r2 = 0.85;  // within-component multiple-R^2 of each correlated
                               // null on the whole nonnull block
  double beta_min = 0.5;
  double beta_max = 1.5;
  // layout fixed at d = 30: features 0-9 non-null, 10-19 correlated nulls,
  // 20-29 independent nulls
  static constexpr int d = 30;
  static constexpr int block = 10;
};

/// Mixture of three correlated Gaussians in dimension 30, logistic labels
/// supported on the first ten features. Within every component, null
/// feature 10+j is a noisy linear image of the nonnull block (pairwise
/// correlation ~cross_corr with its partner, multiple-R^2 explained_r2
/// overall) and features 20-29 are independent of everything. Each
/// component draws its own dense blocks, so averaging over the mixture
/// pulls the pooled covariance toward the diagonal relative to any single
/// component, which is what starves a one-Gaussian approximation of the
/// structure its knockoffs would need.
inline SyntheticData generate_break_experiment(const BreakConfig& cfg, RngStream& rng) {
  require(cfg.cross_corr > 0.0 && cfg.cross_corr < 1.0,
          "generate_break_experiment: cross_corr must lie in (0, 1)");
  require(cfg.l >= 1, "generate_break_experiment: need at least one component");
  require(cfg.explained_r2 >= cfg.cross_corr * cfg.cross_corr && cfg.explained_r2 < 1.0,
          "generate_break_experiment: explained_r2 must lie in [cross_corr^2, 1)");
  const int d = BreakConfig::d;
  const int b = BreakConfig::block;
  const double r2 = cfg.explained_r2;
  // off-partner mixing sized so corr(B_j, A_j) ~ cross_corr after scaling
  const double target_u = std::min(cfg.cross_corr / std::sqrt(r2), 0.99);
  const double mix = std::sqrt(1.0 / (target_u * target_u) - 1.0);

  auto random_correlation = [&](int dim) {
    Matrix C(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) C(i, j) = rng.normal();
    Matrix S = C * C.transpose() / double(dim) + 0.3 * Matrix::Identity(dim, dim);
    Vector sd = S.diagonal().cwiseSqrt();
    return Matrix(sd.cwiseInverse().asDiagonal() * S * sd.cwiseInverse().asDiagonal());
  };

  Vector weights(cfg.l);
  for (int k = 0; k < cfg.l; ++k) weights[k] = 0.8 + 0.4 * rng.uniform();
  weights /= weights.sum();

  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (int k = 0; k < cfg.l; ++k) {
    means.push_back(Vector::Zero(d));
    Matrix SA = random_correlation(b);
    // B = sqrt(r2) T A + sqrt(1 - r2) eps with rows of T normalized to
    // unit variance under SA
    Matrix T = Matrix::Identity(b, b);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < b; ++j)
        if (i != j) T(i, j) = mix * rng.normal() / std::sqrt(double(b));
    Matrix TS = T * SA * T.transpose();
    T = TS.diagonal().cwiseSqrt().cwiseInverse().asDiagonal() * T;
    Matrix SC = random_correlation(b);

    Matrix cov = Matrix::Zero(d, d);
    cov.block(0, 0, b, b) = SA;
    cov.block(0, b, b, b) = std::sqrt(r2) * SA * T.transpose();
    cov.block(b, 0, b, b) = cov.block(0, b, b, b).transpose();
    cov.block(b, b, b, b) =
        r2 * T * SA * T.transpose() + (1.0 - r2) * Matrix::Identity(b, b);
    cov.block(2 * b, 2 * b, b, b) = SC;
    // exact symmetry for the validation gate
    cov = 0.5 * (cov + Matrix(cov.transpose()));
    covs.push_back(cov);
  }
  GaussianMixture model(weights, means, covs);

  RngStream sample_rng = rng.substream(0xda7a);
  Matrix X = model.sample(cfg.n, sample_rng);

  Vector beta = Vector::Zero(d);
  for (int j = 0; j < b; ++j) {
    double mag = rng.uniform(cfg.beta_min, cfg.beta_max);
    beta[j] = rng.uniform() < 0.5 ? mag : -mag;
  }
  RngStream label_rng = rng.substream(0x1abe1);
  Vector y(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    double logit = beta.dot(X.row(i).transpose());
    double p = 1.0 / (1.0 + std::exp(-logit));
    y[i] = label_rng.uniform() < p ? 1.0 : 0.0;
  }
  std::vector<int> nonnulls(b);
  std::iota(nonnulls.begin(), nonnulls.end(), 0);
  return SyntheticData{std::move(X), std::move(y), std::move(nonnulls), std::move(model)};
}

// ---------------------------------------------------------------------------
// t-mixture features (model misspecification study)

struct TMixtureResult {
  Matrix X;
  GaussianMixture gaussian_base;  // the mixture whose components were t-scaled
  std::string warning;
};

/// Mixture of multivariate t components: each row is mu_k + L_k z *
/// sqrt(dof / chi2(dof)).
inline TMixtureResult generate_t_mixture(double dof, int l, int n, int d, double mean_box,
                                         RngStream& rng) {
  require(dof > 0.0, "generate_t_mixture: dof must be positive");
  GaussianMixture base = detail::random_mixture(l, d, mean_box, rng);
  RngStream sample_rng = rng.substream(0xda7a);
  Matrix X(n, d);
  for (int i = 0; i < n; ++i) {
    int k = sample_rng.categorical(base.weights());
    Vector z = sample_rng.normal_vector(d);
    double scale = std::sqrt(dof / sample_rng.chi_squared(dof));
    Vector spread = base.cholesky(k).matrixL() * z;
    X.row(i) = (base.means()[k] + scale * spread).transpose();
  }
  TMixtureResult out{std::move(X), std::move(base), ""};
  if (dof <= 2.0)
    out.warning = "t mixture with dof <= 2 has infinite component variance";
  return out;
}

// ---------------------------------------------------------------------------
// experiment runner

enum class DataKind { SyntheticGmm, Break, TMixture };
enum class ModelKind {
  SingleGaussian,      // sample mean + full empirical covariance
  SingleGaussianDiag,  // sample mean + diagonal of the empirical covariance;
                       // the independent-coordinates approximation
  GmmFixed,
  GmmAic
};
enum class StatMethod {
  Lcd,
  LogisticCoef,
  Swap,
  Permutation,
  SwapIntegral,
  PermutationIntegral,
  Gradient,
  IntegratedGradients
};

inline std::string to_string(StatMethod m) {
  switch (m) {
    case StatMethod::Lcd: return "lcd";
    case StatMethod::LogisticCoef: return "logistic-coef";
    case StatMethod::Swap: return "swap";
    case StatMethod::Permutation: return "permutation";
    case StatMethod::SwapIntegral: return "swap-integral";
    case StatMethod::PermutationIntegral: return "permutation-integral";
    case StatMethod::Gradient: return "gradient";
    case StatMethod::IntegratedGradients: return "integrated-gradients";
  }
  return "?";
}

inline bool needs_mlp(StatMethod m) {
  switch (m) {
    case StatMethod::Swap:
    case StatMethod::Permutation:
    case StatMethod::SwapIntegral:
    case StatMethod::PermutationIntegral:
    case StatMethod::Gradient:
    case StatMethod::IntegratedGradients:
      return true;
    default:
      return false;
  }
}

struct ExperimentConfig {
  DataKind data = DataKind::SyntheticGmm;
  SyntheticSpec synth;
  BreakConfig brk;
  double t_dof = 10.0;

  ModelKind model = ModelKind::GmmFixed;
  int model_k = 0;  // 0 = match the data spec's l
  int aic_kmin = 1;
  int aic_kmax = 4;
  EmConfig em;

  StatMethod method = StatMethod::Lcd;
  MlpConfig mlp{{48, 48, 48}, 50, 1e-3, 64, 0, true, 0};
  double logistic_l2 = 1e-4;
  double logistic_tol = 1e-6;  // near-separated designs cannot reach 1e-8
  LcdControl lcd;
  double train_frac = 0.75;
  double lambda_max = 10.0;
  double lambda_step = 0.5;

  std::vector<double> q_grid = {0.2};
  int offset = 1;
  int repetitions = 40;
  std::uint64_t seed = 0;
};

struct RepetitionRow {
  int rep = 0;
  double q = 0.0;
  double fdp = 0.0;
  double power = 0.0;
  int n_selected = 0;
  double threshold = 0.0;
  bool ok = true;
  std::string error;
};

struct QSummary {
  double q = 0.0;
  double empirical_fdr = 0.0;  // mean fdp over successful repetitions
  double fdr_se = 0.0;
  double mean_power = 0.0;
  double power_se = 0.0;
  int reps_ok = 0;
};

struct ExperimentResult {
  StatMethod method = StatMethod::Lcd;
  std::vector<RepetitionRow> rows;
  std::vector<QSummary> summary;
  int failed = 0;
};

namespace detail {

inline GaussianMixture single_gaussian_fit(const Matrix& X, double ridge_rel) {
  Vector mean = X.colwise().mean();
  Matrix cov = sample_covariance(X);
  double eps = ridge_rel * cov.diagonal().mean();
  if (!(eps > 0.0)) eps = ridge_rel;
  cov += eps * Matrix::Identity(X.cols(), X.cols());
  return GaussianMixture(Vector::Ones(1), {mean}, {cov}, eps);
}

inline GaussianMixture fit_feature_model(const ExperimentConfig& cfg, const Matrix& X,
                                         RngStream& rng, int data_l, int* chosen_k) {
  switch (cfg.model) {
    case ModelKind::SingleGaussian: {
      if (chosen_k) *chosen_k = 1;
      return single_gaussian_fit(X, cfg.em.ridge_rel);
    }
    case ModelKind::SingleGaussianDiag: {
      if (chosen_k) *chosen_k = 1;
      GaussianMixture full = single_gaussian_fit(X, cfg.em.ridge_rel);
      Matrix diag = full.covariances()[0].diagonal().asDiagonal();
      return GaussianMixture(Vector::Ones(1), {full.means()[0]}, {diag}, full.eps_reg());
    }
    case ModelKind::GmmFixed: {
      int k = cfg.model_k > 0 ? cfg.model_k : data_l;
      if (chosen_k) *chosen_k = k;
      return fit_em(X, k, cfg.em, rng).model;
    }
    case ModelKind::GmmAic: {
      AicSelection sel = select_k_aic(X, cfg.aic_kmin, cfg.aic_kmax, cfg.em, rng);
      if (chosen_k) *chosen_k = sel.chosen_k;
      return sel.model;
    }
  }
  throw ConfigError("run_experiment: unknown model kind");
}

struct RepData {
  SyntheticData data;
  int chosen_k = 0;
};

inline RepData make_repetition_data(const ExperimentConfig& cfg, RngStream& rng) {
  switch (cfg.data) {
    case DataKind::SyntheticGmm: {
      RngStream gen = rng.substream(0x9e4);
      return RepData{generate_synthetic(cfg.synth, gen), 0};
    }
    case DataKind::Break: {
      RngStream gen = rng.substream(0x9e4);
      return RepData{generate_break_experiment(cfg.brk, gen), 0};
    }
    case DataKind::TMixture: {
      RngStream gen = rng.substream(0x9e4);
      TMixtureResult t = generate_t_mixture(cfg.t_dof, cfg.synth.l, cfg.synth.n, cfg.synth.d,
                                            cfg.synth.mean_box, gen);
      std::vector<int> nonnulls(cfg.synth.nonnull_count);
      std::iota(nonnulls.begin(), nonnulls.end(), 0);
      RngStream poly_rng = gen.substream(0x9017);
      auto polys = random_polynomials(cfg.synth.C, nonnulls, cfg.synth.poly_degree, poly_rng);
      RngStream label_rng = gen.substream(0x1abe1);
      Vector y = polynomial_labels(t.X, polys, cfg.synth.noise_sd, label_rng);
      return RepData{SyntheticData{std::move(t.X), std::move(y), std::move(nonnulls),
                                   std::move(t.gaussian_base)},
                     0};
    }
  }
  throw ConfigError("run_experiment: unknown data kind");
}

}  // namespace detail

/// One repetition's statistics for each requested method, sharing the data,
/// the fitted feature model, the knockoff sample and (when several methods
/// need it) a single trained network.
inline std::vector<StatVector> repetition_stats(const ExperimentConfig& cfg,
                                                const std::vector<StatMethod>& methods,
                                                RngStream& rep_rng, std::vector<int>* nonnulls_out,
                                                int* chosen_k_out = nullptr) {
  detail::RepData rep = detail::make_repetition_data(cfg, rep_rng);
  if (nonnulls_out) *nonnulls_out = rep.data.nonnulls;
  const Matrix& X = rep.data.X;
  const Vector& y = rep.data.y;

  RngStream fit_rng = rep_rng.substream(0xf17);
  int data_l = cfg.data == DataKind::Break ? cfg.brk.l : cfg.synth.l;
  GaussianMixture model = detail::fit_feature_model(cfg, X, fit_rng, data_l, chosen_k_out);

  MixtureKnockoffSampler sampler(std::move(model));
  RngStream knock_rng = rep_rng.substream(0x62a);
  Matrix Xt = sample_mixture_knockoffs(sampler, X, knock_rng);

  const std::uint64_t split_seed = derive_seed(rep_rng.seed(), 0x59117);
  const std::uint64_t perm_seed = derive_seed(rep_rng.seed(), 0x9e2);

  bool want_mlp = false;
  for (StatMethod m : methods) want_mlp = want_mlp || needs_mlp(m);
  std::unique_ptr<MlpModel> mlp;
  if (want_mlp) {
    MlpConfig mc = cfg.mlp;
    mc.seed = derive_seed(rep_rng.seed(), 0x317);
    mc.pair_input_columns = true;
    Matrix aug = augment(X, Xt);
    auto split = train_eval_split(static_cast<int>(aug.rows()), split_seed, cfg.train_frac);
    mlp = std::make_unique<MlpModel>(mc);
    mlp->fit(take_rows(aug, split.train), take_rows(y, split.train));
  }

  Vector grid = default_lambda_grid(cfg.lambda_max, cfg.lambda_step);

  std::vector<StatVector> stats;
  for (StatMethod m : methods) {
    switch (m) {
      case StatMethod::Lcd: {
        LcdControl lc = cfg.lcd;
        lc.seed = derive_seed(rep_rng.seed(), 0x1cd);
        stats.push_back(lcd_stats(X, Xt, y, lc));
        break;
      }
      case StatMethod::LogisticCoef:
        stats.push_back(logistic_coef_stats(X, Xt, y, cfg.logistic_l2, cfg.logistic_tol));
        break;
      case StatMethod::Swap: {
        SwapFake fake;
        stats.push_back(
            scores_to_stats(accuracy_drop_scores(*mlp, X, Xt, y, fake, split_seed, cfg.train_frac)));
        break;
      }
      case StatMethod::Permutation: {
        PermutationFake fake(perm_seed);
        StatVector sv = scores_to_stats(
            accuracy_drop_scores(*mlp, X, Xt, y, fake, split_seed, cfg.train_frac));
        sv.seed = perm_seed;
        stats.push_back(std::move(sv));
        break;
      }
      case StatMethod::SwapIntegral: {
        SwapFake fake;
        stats.push_back(
            integrate_path(lambda_path(*mlp, X, Xt, y, fake, grid, split_seed, cfg.train_frac)));
        break;
      }
      case StatMethod::PermutationIntegral: {
        PermutationFake fake(perm_seed);
        StatVector sv =
            integrate_path(lambda_path(*mlp, X, Xt, y, fake, grid, split_seed, cfg.train_frac));
        sv.seed = perm_seed;
        stats.push_back(std::move(sv));
        break;
      }
      case StatMethod::Gradient:
        stats.push_back(scores_to_stats(saliency_scores(*mlp, X, Xt, SaliencyVariant::Gradient,
                                                        split_seed, cfg.train_frac)));
        break;
      case StatMethod::IntegratedGradients:
        stats.push_back(scores_to_stats(saliency_scores(
            *mlp, X, Xt, SaliencyVariant::IntegratedGradients, split_seed, cfg.train_frac)));
        break;
    }
  }
  return stats;
}

/// Runs the full pipeline repetitions times for every method in `methods`
/// (methods share the per-repetition data, model, knockoffs and predictor).
/// Repetition r draws everything from the stream (seed, r); failures are
/// recorded and excluded from the aggregates.
inline std::vector<ExperimentResult> run_experiment_multi(const ExperimentConfig& cfg,
                                                          const std::vector<StatMethod>& methods) {
  require(!methods.empty(), "run_experiment: no methods requested");
  for (double q : cfg.q_grid) require(q > 0.0 && q < 1.0, "run_experiment: q must lie in (0,1)");
  require(cfg.repetitions >= 0, "run_experiment: negative repetition count");

  std::vector<ExperimentResult> results(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) results[m].method = methods[m];

  RngStream master(cfg.seed);
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    RngStream rep_rng = master.substream(static_cast<std::uint64_t>(rep));
    std::vector<int> nonnulls;
    std::vector<StatVector> stats;
    std::string error;
    bool ok = true;
    try {
      stats = repetition_stats(cfg, methods, rep_rng, &nonnulls);
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    }
    int d = ok ? static_cast<int>(stats[0].w.size()) : 0;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      for (double q : cfg.q_grid) {
        RepetitionRow row;
        row.rep = rep;
        row.q = q;
        row.ok = ok;
        row.error = error;
        if (ok) {
          Selection sel = select(stats[m].w, q, cfg.offset);
          auto [fdp, power] = evaluate(sel, nonnulls, d);
          row.fdp = fdp;
          row.power = power;
          row.n_selected = static_cast<int>(sel.selected.size());
          row.threshold = sel.threshold;
        }
        results[m].rows.push_back(row);
      }
    }
    if (!ok)
      for (auto& res : results) ++res.failed;
  }

  for (auto& res : results) {
    for (double q : cfg.q_grid) {
      QSummary s;
      s.q = q;
      std::vector<double> fdps, powers;
      for (const auto& row : res.rows) {
        if (row.q == q && row.ok) {
          fdps.push_back(row.fdp);
          powers.push_back(row.power);
        }
      }
      s.reps_ok = static_cast<int>(fdps.size());
      if (s.reps_ok > 0) {
        double mf = 0.0, mp = 0.0;
        for (double v : fdps) mf += v;
        for (double v : powers) mp += v;
        mf /= s.reps_ok;
        mp /= s.reps_ok;
        double vf = 0.0, vp = 0.0;
        for (double v : fdps) vf += (v - mf) * (v - mf);
        for (double v : powers) vp += (v - mp) * (v - mp);
        if (s.reps_ok > 1) {
          vf /= (s.reps_ok - 1);
          vp /= (s.reps_ok - 1);
        }
        s.empirical_fdr = mf;
        s.mean_power = mp;
        s.fdr_se = std::sqrt(vf / s.reps_ok);
        s.power_se = std::sqrt(vp / s.reps_ok);
      }
      res.summary.push_back(s);
    }
  }
  return results;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment_multi(cfg, {cfg.method})[0];
}

// ---------------------------------------------------------------------------
// named presets reproducing the paper's experiment battery

/// FDR-break comparison: mixture-model knockoffs vs the single-Gaussian
/// (independent-coordinates) approximation on the 30-dimensional correlated
/// mixture, logistic-coefficient statistics.
struct BreakFdrResult {
  ExperimentResult mixture;
  ExperimentResult single_gaussian;
};

inline ExperimentConfig break_fdr_config(int repetitions, double q, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.data = DataKind::Break;
  cfg.brk = BreakConfig{};
  cfg.model = ModelKind::GmmFixed;
  cfg.model_k = 3;
  cfg.em.n_restarts = 2;
  cfg.em.max_iters = 150;
  cfg.method = StatMethod::LogisticCoef;
  cfg.q_grid = {q};
  cfg.repetitions = repetitions;
  cfg.seed = seed;
  return cfg;
}

inline BreakFdrResult preset_break_fdr(int repetitions, double q, std::uint64_t seed) {
  ExperimentConfig cfg = break_fdr_config(repetitions, q, seed);
  BreakFdrResult out;
  out.mixture = run_experiment(cfg);
  cfg.model = ModelKind::SingleGaussianDiag;
  out.single_gaussian = run_experiment(cfg);
  return out;
}

/// Power/FDR sweep over mixture sizes and statistic methods on the
/// polynomial synthetic task.
inline ExperimentConfig power_sweep_config(int l, int repetitions, std::vector<double> q_grid,
                                           std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.data = DataKind::SyntheticGmm;
  cfg.synth.n = 3000;
  cfg.synth.d = 10;
  cfg.synth.l = l;
  cfg.synth.C = 2;
  cfg.synth.nonnull_count = 3;
  cfg.synth.mean_box = 4.0;
  cfg.model = ModelKind::GmmFixed;
  cfg.em.n_restarts = 2;
  cfg.em.max_iters = 120;
  cfg.mlp.hidden = {48, 48, 48};
  cfg.mlp.epochs = 70;
  cfg.lcd.family = GlmFamily::Binomial;
  cfg.lambda_step = 0.5;
  cfg.q_grid = std::move(q_grid);
  cfg.repetitions = repetitions;
  cfg.seed = seed;
  return cfg;
}

struct PowerSweepCell {
  int l = 0;
  ExperimentResult result;
};

inline std::vector<PowerSweepCell> preset_power_sweep(const std::vector<int>& l_grid,
                                                      const std::vector<StatMethod>& methods,
                                                      int repetitions,
                                                      const std::vector<double>& q_grid,
                                                      std::uint64_t seed) {
  std::vector<PowerSweepCell> cells;
  for (int l : l_grid) {
    ExperimentConfig cfg = power_sweep_config(l, repetitions, q_grid,
                                              derive_seed(seed, static_cast<std::uint64_t>(l)));
    for (auto& res : run_experiment_multi(cfg, methods)) {
      cells.push_back(PowerSweepCell{l, std::move(res)});
    }
  }
  return cells;
}

/// Model-misspecification robustness: t-mixture features fitted by an
/// AIC-selected Gaussian mixture.
inline ExperimentConfig t_robustness_config(double dof, int repetitions, double q,
                                            std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.data = DataKind::TMixture;
  cfg.t_dof = dof;
  cfg.synth.n = 1000;
  cfg.synth.d = 10;
  cfg.synth.l = 3;
  cfg.synth.C = 2;
  cfg.synth.nonnull_count = 3;
  cfg.synth.mean_box = 3.0;
  cfg.model = ModelKind::GmmAic;
  cfg.aic_kmin = 1;
  cfg.aic_kmax = 4;
  cfg.em.n_restarts = 1;
  cfg.em.max_iters = 100;
  cfg.method = StatMethod::Lcd;
  cfg.lcd.family = GlmFamily::Binomial;
  cfg.q_grid = {q};
  cfg.repetitions = repetitions;
  cfg.seed = seed;
  return cfg;
}

struct TRobustnessCell {
  double dof = 0.0;
  ExperimentResult result;
};

inline std::vector<TRobustnessCell> preset_t_robustness(const std::vector<double>& dof_grid,
                                                        int repetitions, double q,
                                                        std::uint64_t seed) {
  std::vector<TRobustnessCell> cells;
  for (double dof : dof_grid) {
    ExperimentConfig cfg =
        t_robustness_config(dof, repetitions, q, derive_seed(seed, std::uint64_t(dof * 16)));
    cells.push_back(TRobustnessCell{dof, run_experiment(cfg)});
  }
  return cells;
}

}  // namespace knockoff

#endif  // KNOCKOFF_HARNESS_HPP
