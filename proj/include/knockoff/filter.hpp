#ifndef KNOCKOFF_FILTER_HPP
#define KNOCKOFF_FILTER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "knockoff/common.hpp"

namespace knockoff {

/// Result of the adaptive knockoff threshold at target FDR q.
struct Selection {
  double target_q = 0.0;
  int offset = 1;  // 0 = knockoff, 1 = knockoff+ (exact FDR control)
  double threshold = std::numeric_limits<double>::infinity();
  std::vector<int> selected;  // 0-based feature indices, ascending
};

/// Adaptive threshold: the smallest candidate t in {|W_j| : W_j != 0} with
/// (offset + #{j : W_j <= -t}) / max(1, #{j : W_j >= t}) <= q, or +infinity
/// when no candidate qualifies. Zero statistics count on neither side.
inline double threshold(const Vector& w, double q, int offset) {
  require(q > 0.0 && q < 1.0, "threshold: q must lie in (0, 1)");
  require(offset == 0 || offset == 1, "threshold: offset must be 0 or 1");
  std::set<double> candidates;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (!std::isfinite(w[j])) throw InputError("threshold: non-finite statistic");
    if (w[j] != 0.0) candidates.insert(std::abs(w[j]));
  }
  for (double t : candidates) {  // ascending
    int neg = 0, pos = 0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w[j] <= -t) ++neg;
      if (w[j] >= t) ++pos;
    }
    double ratio = (offset + neg) / std::max(1.0, double(pos));
    if (ratio <= q) return t;
  }
  return std::numeric_limits<double>::infinity();
}

inline Selection select(const Vector& w, double q, int offset) {
  Selection sel;
  sel.target_q = q;
  sel.offset = offset;
  sel.threshold = threshold(w, q, offset);
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (w[j] >= sel.threshold) sel.selected.push_back(static_cast<int>(j));
  return sel;
}

/// False discovery proportion and power of a selection against the known
/// non-null index set.
inline std::pair<double, double> evaluate(const Selection& sel, const std::vector<int>& nonnulls,
                                          int d) {
  std::set<int> truth(nonnulls.begin(), nonnulls.end());
  for (int j : truth) require(j >= 0 && j < d, "evaluate: non-null index out of range");
  for (int j : sel.selected) require(j >= 0 && j < d, "evaluate: selected index out of range");
  int true_pos = 0, false_pos = 0;
  for (int j : sel.selected) {
    if (truth.count(j)) ++true_pos;
    else ++false_pos;
  }
  double fdp = double(false_pos) / std::max<double>(1.0, double(sel.selected.size()));
  double power = double(true_pos) / std::max<double>(1.0, double(truth.size()));
  return {fdp, power};
}

}  // namespace knockoff

#endif  // KNOCKOFF_FILTER_HPP
