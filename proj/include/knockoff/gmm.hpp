#ifndef KNOCKOFF_GMM_HPP
#define KNOCKOFF_GMM_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "knockoff/common.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

constexpr double kLogTwoPi = 1.8378770664093454836;

/// Gaussian mixture over R^d: weights, means and full covariances, with
/// cached Cholesky factors for density evaluation and sampling. Immutable
/// after construction and safe to share across threads.
class GaussianMixture {
 public:
  GaussianMixture(Vector weights, std::vector<Vector> means, std::vector<Matrix> covariances,
                  double eps_reg = 0.0)
      : weights_(std::move(weights)),
        means_(std::move(means)),
        covariances_(std::move(covariances)),
        eps_reg_(eps_reg) {
    validate();
    build_cache();
  }

  int num_components() const { return static_cast<int>(weights_.size()); }
  int dim() const { return static_cast<int>(means_[0].size()); }
  const Vector& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covariances() const { return covariances_; }
  double eps_reg() const { return eps_reg_; }
  const Eigen::LLT<Matrix>& cholesky(int k) const { return chol_[k]; }

  /// log lambda_k + log N(x; mu_k, Sigma_k), all components.
  Vector component_log_joint(const Vector& x) const {
    const int l = num_components();
    Vector lj(l);
    for (int k = 0; k < l; ++k) {
      Vector diff = x - means_[k];
      double quad = diff.dot(chol_[k].solve(diff));
      lj[k] = log_weights_[k] - 0.5 * (dim() * kLogTwoPi + log_dets_[k] + quad);
    }
    return lj;
  }

  /// Mixture log-density, log-sum-exp over components.
  double log_density(const Vector& x) const {
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (!std::isfinite(x[j])) throw InputError("log_density: non-finite input");
    Vector lj = component_log_joint(x);
    double m = lj.maxCoeff();
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (int k = 0; k < num_components(); ++k) s += std::exp(lj[k] - m);
    return m + std::log(s);
  }

  /// Posterior over the component assignment, P(K = k | X = x). Computed in
  /// log space. If every component log-joint underflows to a non-finite
  /// value the point is hard-assigned to its nearest mean.
  Vector posterior(const Vector& x) const {
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (!std::isfinite(x[j])) throw InputError("posterior: non-finite input");
    const int l = num_components();
    Vector lj = component_log_joint(x);
    double m = lj.maxCoeff();
    if (!std::isfinite(m)) {
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (int k = 0; k < l; ++k) {
        double dist = (x - means_[k]).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      }
      Vector post = Vector::Zero(l);
      post[best] = 1.0;
      return post;
    }
    Vector post(l);
    double s = 0.0;
    for (int k = 0; k < l; ++k) {
      post[k] = std::exp(lj[k] - m);
      s += post[k];
    }
    post /= s;
    return post;
  }

  double log_likelihood(const Matrix& data) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) total += log_density(data.row(i).transpose());
    return total;
  }

  /// n rows, each a categorical component draw followed by mu_k + L_k z.
  Matrix sample(Eigen::Index n, RngStream& rng) const {
    Matrix out(n, dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      int k = rng.categorical(weights_);
      Vector z = rng.normal_vector(dim());
      out.row(i) = (means_[k] + chol_[k].matrixL() * z).transpose();
    }
    return out;
  }

 private:
  void validate() const {
    const int l = static_cast<int>(weights_.size());
    require(l >= 1, "GaussianMixture: at least one component required");
    require(static_cast<int>(means_.size()) == l && static_cast<int>(covariances_.size()) == l,
            "GaussianMixture: weights/means/covariances size mismatch");
    require(std::abs(weights_.sum() - 1.0) <= 1e-10, "GaussianMixture: weights must sum to 1");
    require(weights_.minCoeff() >= 0.0, "GaussianMixture: negative weight");
    const Eigen::Index d = means_[0].size();
    require(d >= 1, "GaussianMixture: dimension must be >= 1");
    for (int k = 0; k < l; ++k) {
      require(means_[k].size() == d, "GaussianMixture: mean dimension mismatch");
      const Matrix& cov = covariances_[k];
      require(cov.rows() == d && cov.cols() == d, "GaussianMixture: covariance shape mismatch");
      double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
      require(asym <= 1e-10, "GaussianMixture: covariance not symmetric");
      Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
      double slack = 1e-8 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
      if (es.eigenvalues().minCoeff() < eps_reg_ - slack) {
        throw InputError("GaussianMixture: covariance eigenvalue below regularization floor");
      }
    }
  }

  void build_cache() {
    const int l = num_components();
    log_weights_.resize(l);
    log_dets_.resize(l);
    chol_.resize(l);
    for (int k = 0; k < l; ++k) {
      log_weights_[k] = weights_[k] > 0.0 ? std::log(weights_[k])
                                          : -std::numeric_limits<double>::infinity();
      chol_[k].compute(covariances_[k]);
      if (chol_[k].info() != Eigen::Success) {
        throw NumericError("GaussianMixture: covariance " + std::to_string(k) +
                           " is not positive definite");
      }
      Matrix L = chol_[k].matrixL();
      double logdet = 0.0;
      for (Eigen::Index j = 0; j < L.rows(); ++j) logdet += 2.0 * std::log(L(j, j));
      log_dets_[k] = logdet;
    }
  }

  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  double eps_reg_;
  std::vector<double> log_weights_;
  std::vector<double> log_dets_;
  std::vector<Eigen::LLT<Matrix>> chol_;
};

struct EmConfig {
  int max_iters = 300;
  double tol = 1e-6;        // relative log-likelihood change
  double ridge_rel = 1e-6;  // eps_reg = ridge_rel * mean sample variance
  int n_restarts = 3;
  std::uint64_t seed = 0;

  void check() const {
    require(max_iters >= 1, "EmConfig: max_iters must be positive");
    require(tol > 0.0, "EmConfig: tol must be positive");
    require(ridge_rel > 0.0, "EmConfig: ridge_rel must be positive");
    require(n_restarts >= 1, "EmConfig: n_restarts must be positive");
  }
};

struct EmFit {
  GaussianMixture model;
  double log_likelihood = 0.0;
  std::vector<double> loglik_path;  // best restart, one entry per iteration
  int iterations = 0;
  int reseeds = 0;  // components re-seeded after collapsing
};

namespace detail {

inline Matrix sample_covariance(const Matrix& data) {
  Vector mean = data.colwise().mean();
  Matrix centered = data.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / std::max<double>(1.0, double(data.rows() - 1));
}

/// k-means++-style seeding: first mean uniform, the rest proportional to the
/// squared distance to the closest chosen mean.
inline std::vector<Vector> seed_means(const Matrix& data, int k, RngStream& rng) {
  const Eigen::Index n = data.rows();
  std::vector<Vector> means;
  means.push_back(data.row(static_cast<Eigen::Index>(rng.uniform_index(n))).transpose());
  Vector dist2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(means.size()) < k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double d2 = (data.row(i).transpose() - means.back()).squaredNorm();
      dist2[i] = std::min(dist2[i], d2);
    }
    if (dist2.sum() > 0.0) {
      means.push_back(data.row(rng.categorical(dist2)).transpose());
    } else {
      means.push_back(data.row(static_cast<Eigen::Index>(rng.uniform_index(n))).transpose());
    }
  }
  return means;
}

struct EmState {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
};

inline Vector log_joint_at(const EmState& st, const std::vector<Eigen::LLT<Matrix>>& chol,
                           const std::vector<double>& log_dets, const Vector& x) {
  const int l = static_cast<int>(st.weights.size());
  const int d = static_cast<int>(x.size());
  Vector lj(l);
  for (int k = 0; k < l; ++k) {
    double lw = st.weights[k] > 0.0 ? std::log(st.weights[k])
                                    : -std::numeric_limits<double>::infinity();
    Vector diff = x - st.means[k];
    double quad = diff.dot(chol[k].solve(diff));
    lj[k] = lw - 0.5 * (d * kLogTwoPi + log_dets[k] + quad);
  }
  return lj;
}

}  // namespace detail

/// EM fit of a k-component Gaussian mixture; returns the best of
/// cfg.n_restarts runs by final log-likelihood. Components whose
/// responsibility mass collapses are re-seeded from a random data point.
inline EmFit fit_em(const Matrix& data, int k, const EmConfig& cfg, RngStream& rng) {
  cfg.check();
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  require(n > 0 && d > 0, "fit_em: empty data");
  require(k >= 1, "fit_em: k must be positive");
  require(k <= n, "fit_em: k exceeds the number of samples");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (!std::isfinite(data(i, j))) throw InputError("fit_em: non-finite data entry");

  Matrix pooled = detail::sample_covariance(data);
  double mean_var = pooled.diagonal().mean();
  double eps_reg = cfg.ridge_rel * mean_var;
  if (!(eps_reg > 0.0)) eps_reg = cfg.ridge_rel;
  const Matrix ridge = eps_reg * Matrix::Identity(d, d);
  const Matrix pooled_reg = pooled + ridge;

  struct RestartOutcome {
    detail::EmState state;
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<double> path;
    int iters = 0;
    int reseeds = 0;
  };

  RestartOutcome best;
  bool have_best = false;

  for (int restart = 0; restart < cfg.n_restarts; ++restart) {
    RngStream stream = rng.substream(static_cast<std::uint64_t>(restart));
    RestartOutcome out;
    out.state.weights = Vector::Constant(k, 1.0 / k);
    out.state.means = detail::seed_means(data, k, stream);
    out.state.covs.assign(k, pooled_reg);

    std::vector<Eigen::LLT<Matrix>> chol(k);
    std::vector<double> log_dets(k);
    auto refresh = [&](int comp) {
      chol[comp].compute(out.state.covs[comp]);
      if (chol[comp].info() != Eigen::Success)
        throw NumericError("fit_em: covariance lost positive definiteness");
      Matrix L = chol[comp].matrixL();
      double logdet = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) logdet += 2.0 * std::log(L(j, j));
      log_dets[comp] = logdet;
    };
    for (int c = 0; c < k; ++c) refresh(c);

    Matrix resp(n, k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      // E-step
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        Vector lj = detail::log_joint_at(out.state, chol, log_dets, data.row(i).transpose());
        double m = lj.maxCoeff();
        double s = 0.0;
        for (int c = 0; c < k; ++c) {
          resp(i, c) = std::exp(lj[c] - m);
          s += resp(i, c);
        }
        resp.row(i) /= s;
        ll += m + std::log(s);
      }
      out.path.push_back(ll);
      out.iters = iter + 1;
      out.loglik = ll;

      if (iter > 0 && std::abs(ll - prev_ll) <= cfg.tol * (std::abs(prev_ll) + 1.0)) break;
      prev_ll = ll;

      // M-step
      for (int c = 0; c < k; ++c) {
        double nk = resp.col(c).sum();
        if (nk <= 1e-8 * double(n)) {
          // collapsed component: re-seed from a random data point
          out.state.means[c] = data.row(static_cast<Eigen::Index>(stream.uniform_index(n))).transpose();
          out.state.covs[c] = pooled_reg;
          out.state.weights[c] = 1.0 / double(n);
          ++out.reseeds;
          refresh(c);
          continue;
        }
        out.state.weights[c] = nk / double(n);
        Vector mu = (resp.col(c).transpose() * data).transpose() / nk;
        Matrix scatter = Matrix::Zero(d, d);
        for (Eigen::Index i = 0; i < n; ++i) {
          Vector diff = data.row(i).transpose() - mu;
          scatter.noalias() += resp(i, c) * diff * diff.transpose();
        }
        out.state.means[c] = mu;
        out.state.covs[c] = scatter / nk + ridge;
        refresh(c);
      }
      out.state.weights /= out.state.weights.sum();
    }

    if (!have_best || out.loglik > best.loglik) {
      best = std::move(out);
      have_best = true;
    }
  }

  GaussianMixture model(best.state.weights, best.state.means, best.state.covs, eps_reg);
  return EmFit{std::move(model), best.loglik, std::move(best.path), best.iters, best.reseeds};
}

struct AicEntry {
  int k = 0;
  double log_likelihood = 0.0;
  double aic = 0.0;
  bool ok = false;
  std::string error;
};

struct AicSelection {
  GaussianMixture model;
  int chosen_k = 0;
  std::vector<AicEntry> table;
};

/// Number of free parameters of an l-component mixture with full covariances.
inline double gmm_param_count(int l, int d) {
  return double(l - 1) + double(l) * d + double(l) * d * (d + 1) / 2.0;
}

/// Fits every k in [k_min, k_max] and keeps the AIC minimizer
/// (AIC = 2p - 2 loglik); ties go to the smaller k.
inline AicSelection select_k_aic(const Matrix& data, int k_min, int k_max, const EmConfig& cfg,
                                 RngStream& rng) {
  require(k_min >= 1 && k_max >= k_min, "select_k_aic: empty k range");
  require(k_max <= data.rows(), "select_k_aic: k exceeds the number of samples");
  const int d = static_cast<int>(data.cols());

  std::vector<AicEntry> table;
  std::unique_ptr<GaussianMixture> best_model;
  int best_k = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  std::string last_error;

  for (int k = k_min; k <= k_max; ++k) {
    AicEntry entry;
    entry.k = k;
    try {
      RngStream stream = rng.substream(0x41c, static_cast<std::uint64_t>(k));
      EmFit fit = fit_em(data, k, cfg, stream);
      entry.ok = true;
      entry.log_likelihood = fit.log_likelihood;
      entry.aic = 2.0 * gmm_param_count(k, d) - 2.0 * fit.log_likelihood;
      if (entry.aic < best_aic) {
        best_aic = entry.aic;
        best_k = k;
        best_model = std::make_unique<GaussianMixture>(fit.model);
      }
    } catch (const std::exception& e) {
      entry.error = e.what();
      last_error = e.what();
    }
    table.push_back(entry);
  }
  if (!best_model) throw NumericError("select_k_aic: every fit failed; last error: " + last_error);
  return AicSelection{std::move(*best_model), best_k, std::move(table)};
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json gmm_to_json(const GaussianMixture& m) {
  nlohmann::json j;
  j["format"] = "gmm-1";
  j["d"] = m.dim();
  j["l"] = m.num_components();
  j["eps_reg"] = m.eps_reg();
  j["weights"] = std::vector<double>(m.weights().data(), m.weights().data() + m.num_components());
  nlohmann::json means = nlohmann::json::array();
  nlohmann::json covs = nlohmann::json::array();
  for (int k = 0; k < m.num_components(); ++k) {
    means.push_back(std::vector<double>(m.means()[k].data(), m.means()[k].data() + m.dim()));
    std::vector<double> flat;  // row-major
    flat.reserve(m.dim() * m.dim());
    for (int r = 0; r < m.dim(); ++r)
      for (int c = 0; c < m.dim(); ++c) flat.push_back(m.covariances()[k](r, c));
    covs.push_back(flat);
  }
  j["means"] = means;
  j["covariances"] = covs;
  return j;
}

inline GaussianMixture gmm_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != "gmm-1")
    throw InputError("model file: unknown or missing format tag (expected gmm-1)");
  const int d = j.at("d").get<int>();
  const int l = j.at("l").get<int>();
  double eps_reg = j.value("eps_reg", 0.0);
  auto wj = j.at("weights").get<std::vector<double>>();
  require(static_cast<int>(wj.size()) == l, "model file: weights length mismatch");
  Vector weights = Eigen::Map<Vector>(wj.data(), l);
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (int k = 0; k < l; ++k) {
    auto mj = j.at("means").at(k).get<std::vector<double>>();
    require(static_cast<int>(mj.size()) == d, "model file: mean length mismatch");
    means.push_back(Eigen::Map<Vector>(mj.data(), d));
    auto cj = j.at("covariances").at(k).get<std::vector<double>>();
    require(static_cast<int>(cj.size()) == d * d, "model file: covariance length mismatch");
    Matrix cov(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) cov(r, c) = cj[r * d + c];
    covs.push_back(cov);
  }
  return GaussianMixture(weights, means, covs, eps_reg);
}

inline void save_gmm(const std::string& path, const GaussianMixture& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << gmm_to_json(m).dump(2) << '\n';
}

inline GaussianMixture load_gmm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("model file parse error: " + std::string(e.what()));
  }
  return gmm_from_json(j);
}

}  // namespace knockoff

#endif  // KNOCKOFF_GMM_HPP
