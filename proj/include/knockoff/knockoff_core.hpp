#ifndef KNOCKOFF_CORE_HPP
#define KNOCKOFF_CORE_HPP

#include <cmath>
#include <vector>

#include "knockoff/common.hpp"
#include "knockoff/gmm.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

/// Diagonal decoupling matrix for a Gaussian knockoff: equicorrelated
/// construction on the correlation scale. With R the correlation matrix and
/// s = min(2 lambda_min(R), 1) (1 - delta), D_jj = s Sigma_jj, so that
/// 2 Sigma - D = diag(sigma) (2R - sI) diag(sigma) stays PSD.
inline Matrix compute_diag(const Matrix& sigma) {
  const Eigen::Index d = sigma.rows();
  require(sigma.cols() == d, "compute_diag: covariance must be square");
  require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + sigma.cwiseAbs().maxCoeff()),
          "compute_diag: covariance must be symmetric");
  Vector sd(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(sigma(j, j) > 0.0)) throw InputError("compute_diag: zero diagonal entry in covariance");
    sd[j] = std::sqrt(sigma(j, j));
  }
  Matrix corr = sd.cwiseInverse().asDiagonal() * sigma * sd.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(corr, Eigen::EigenvaluesOnly);
  double lambda_min = es.eigenvalues().minCoeff();
  if (!(lambda_min > 0.0))
    throw InputError("compute_diag: correlation matrix not positive definite (lambda_min = " +
                     std::to_string(lambda_min) + ")");
  constexpr double kShrink = 1e-6;
  double s = std::min(2.0 * lambda_min, 1.0) * (1.0 - kShrink);
  Matrix D = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) D(j, j) = s * sigma(j, j);
  return D;
}

/// Conditional-sampling parameters of the Gaussian knockoff
/// X~ | X ~ N(D Sigma^-1 mu + (I - D Sigma^-1) X, 2D - D Sigma^-1 D).
struct KnockoffGaussianParams {
  Matrix D;               // diagonal
  Matrix cond_coeff;      // I - D Sigma^-1
  Vector cond_mean_base;  // D Sigma^-1 mu
  Matrix cond_cov_chol;   // L with L L^T = Sigma~ (lower-triangular when PD)
};

namespace detail {

/// Factor L with L L^T = S for a symmetric PSD S. Plain Cholesky when S is
/// positive definite; otherwise an eigenvalue square root with tiny negative
/// eigenvalues (>= -1e-8 scale) floored at zero. Larger violations are hard
/// errors.
inline Matrix psd_sqrt(const Matrix& S, const std::string& context) {
  Matrix sym = 0.5 * (S + S.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  double scale = std::max(1.0, sym.diagonal().cwiseAbs().maxCoeff());
  Vector ev = es.eigenvalues();
  for (Eigen::Index j = 0; j < ev.size(); ++j) {
    if (ev[j] < -1e-8 * scale)
      throw NumericError(context + ": matrix has eigenvalue " + std::to_string(ev[j]) +
                         " beyond the PSD clipping tolerance");
    ev[j] = std::max(ev[j], 0.0);
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// Builds the conditional-sampling parameters for one Gaussian component.
inline KnockoffGaussianParams gaussian_knockoff_params(const Vector& mu, const Matrix& sigma,
                                                       const Matrix& D) {
  const Eigen::Index d = sigma.rows();
  require(mu.size() == d && D.rows() == d && D.cols() == d,
          "gaussian_knockoff_params: dimension mismatch");
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      if (r != c) require(D(r, c) == 0.0, "gaussian_knockoff_params: D must be diagonal");
  require(D.diagonal().minCoeff() >= 0.0, "gaussian_knockoff_params: D must be nonnegative");

  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(2.0 * sigma - D, Eigen::EigenvaluesOnly);
    double scale = std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-8 * scale)
      throw InputError("gaussian_knockoff_params: 2 Sigma - D is not PSD");
  }

  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
    double cond = es.eigenvalues().maxCoeff() / std::max(es.eigenvalues().minCoeff(), 0.0);
    throw NumericError(
        "gaussian_knockoff_params: Sigma is singular beyond regularization "
        "(condition estimate " +
        std::to_string(cond) + ")");
  }
  // A = D Sigma^-1 = (Sigma^-1 D)^T since both Sigma and D are symmetric.
  Matrix A = llt.solve(D).transpose();

  KnockoffGaussianParams params;
  params.D = D;
  params.cond_coeff = Matrix::Identity(d, d) - A;
  params.cond_mean_base = A * mu;
  Matrix sigma_tilde = 2.0 * D - A * D;
  params.cond_cov_chol = detail::psd_sqrt(sigma_tilde, "gaussian_knockoff_params: Sigma~");
  return params;
}

/// Draws one knockoff x~ = base + coeff x + L z with z standard normal.
inline Vector sample_gaussian_knockoff(const KnockoffGaussianParams& params, const Vector& x,
                                       RngStream& rng) {
  require(x.size() == params.cond_coeff.cols(), "sample_gaussian_knockoff: dimension mismatch");
  Vector z = rng.normal_vector(x.size());
  return params.cond_mean_base + params.cond_coeff * x + params.cond_cov_chol * z;
}

/// Mixture knockoff sampler (the Gaussian mixture knockoff procedure):
/// per row, the component assignment is drawn from the posterior and the
/// knockoff from that component's Gaussian conditional.
class MixtureKnockoffSampler {
 public:
  explicit MixtureKnockoffSampler(GaussianMixture model) : model_(std::move(model)) {
    for (int k = 0; k < model_.num_components(); ++k) {
      Matrix D = compute_diag(model_.covariances()[k]);
      params_.push_back(gaussian_knockoff_params(model_.means()[k], model_.covariances()[k], D));
    }
  }

  const GaussianMixture& model() const { return model_; }
  const std::vector<KnockoffGaussianParams>& params() const { return params_; }

  /// Knockoff for a single row; the caller owns the stream.
  Vector sample_row(const Vector& x, RngStream& rng) const {
    Vector post = model_.posterior(x);
    int k = rng.categorical(post);
    return sample_gaussian_knockoff(params_[k], x, rng);
  }

 private:
  GaussianMixture model_;
  std::vector<KnockoffGaussianParams> params_;
};

/// Row-wise knockoffs for X; row i uses the stream derived from
/// (rng seed, i), so results do not depend on evaluation order.
inline Matrix sample_mixture_knockoffs(const MixtureKnockoffSampler& sampler, const Matrix& X,
                                       const RngStream& rng) {
  require(X.cols() == sampler.model().dim(), "sample_mixture_knockoffs: dimension mismatch");
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (!std::isfinite(X(i, j))) throw InputError("sample_mixture_knockoffs: non-finite entry");
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    RngStream row = rng.substream(static_cast<std::uint64_t>(i));
    out.row(i) = sampler.sample_row(X.row(i).transpose(), row).transpose();
  }
  return out;
}

}  // namespace knockoff

#endif  // KNOCKOFF_CORE_HPP
