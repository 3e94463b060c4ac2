#ifndef KNOCKOFF_PAIRED_HPP
#define KNOCKOFF_PAIRED_HPP

#include <cmath>

#include "knockoff/common.hpp"

namespace knockoff {

// Reductions over the 2d columns of an augmented [X, knockoff(X)] matrix,
// accumulated pair-by-pair: the contribution of columns j and j+d is formed
// as a single two-term sum before entering the running total. Exchanging a
// column with its partner then permutes two commutative additions and leaves
// every result bitwise unchanged, which is what makes the deterministic
// flip-sign checks exact rather than approximate.

/// Pairwise dot product. For odd sizes the unpaired trailing entry is added
/// last (pairing is only meaningful for augmented vectors of even length).
inline double paired_dot(const Vector& a, const Vector& b) {
  const Eigen::Index n = a.size();
  const Eigen::Index h = n / 2;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < h; ++j) {
    acc += a[j] * b[j] + a[j + h] * b[j + h];
  }
  if (n % 2 != 0) acc += a[n - 1] * b[n - 1];
  return acc;
}

/// Pairwise squared norm.
inline double paired_squared_norm(const Vector& a) { return paired_dot(a, a); }

/// Pairwise L1 norm.
inline double paired_l1(const Vector& a) {
  const Eigen::Index n = a.size();
  const Eigen::Index h = n / 2;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < h; ++j) {
    acc += std::abs(a[j]) + std::abs(a[j + h]);
  }
  if (n % 2 != 0) acc += std::abs(a[n - 1]);
  return acc;
}

/// X * beta with each row reduced pairwise.
inline Vector paired_matvec(const Matrix& X, const Vector& beta) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::Index h = p / 2;
  Vector out = Vector::Zero(n);
  for (Eigen::Index j = 0; j < h; ++j) {
    const Eigen::Index jp = j + h;
    const double bj = beta[j];
    const double bjp = beta[jp];
    for (Eigen::Index i = 0; i < n; ++i) {
      out[i] += X(i, j) * bj + X(i, jp) * bjp;
    }
  }
  if (p % 2 != 0) out += X.col(p - 1) * beta[p - 1];
  return out;
}

/// B (rows = units, cols = inputs) applied to each row of U: returns
/// U_rows x units matrix of pairwise-reduced activations.
inline Matrix paired_linear(const Matrix& U, const Matrix& B) {
  const Eigen::Index n = U.rows();
  const Eigen::Index p = U.cols();
  const Eigen::Index m = B.rows();
  const Eigen::Index h = p / 2;
  Matrix out = Matrix::Zero(n, m);
  for (Eigen::Index o = 0; o < m; ++o) {
    for (Eigen::Index j = 0; j < h; ++j) {
      const Eigen::Index jp = j + h;
      const double wj = B(o, j);
      const double wjp = B(o, jp);
      for (Eigen::Index i = 0; i < n; ++i) {
        out(i, o) += U(i, j) * wj + U(i, jp) * wjp;
      }
    }
    if (p % 2 != 0) out.col(o) += U.col(p - 1) * B(o, p - 1);
  }
  return out;
}

}  // namespace knockoff

#endif  // KNOCKOFF_PAIRED_HPP
