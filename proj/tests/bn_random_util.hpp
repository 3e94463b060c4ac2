#ifndef KNOCKOFF_TESTS_BN_RANDOM_UTIL_HPP
#define KNOCKOFF_TESTS_BN_RANDOM_UTIL_HPP

// Random discrete Bayesian networks for the exchangeability oracle. Nodes
// are listed hidden-first so observed nodes (which may not have children)
// can simply take parents among the hidden block.

#include <vector>

#include "knockoff/bayes_net.hpp"
#include "knockoff/rng.hpp"

namespace bn_random {

using knockoff::BayesNet;
using knockoff::ConjugateKind;
using knockoff::Matrix;
using knockoff::NodeKind;
using knockoff::NodeSpec;
using knockoff::RngStream;

struct NetOptions {
  int max_nodes = 4;
  int max_states = 3;
  int max_observed = 3;
  int observed_max_states = 3;  // acceptance MC checks use 2 to keep the
                                // observed joint small
  bool allow_identity_conjugates = true;
};

inline Matrix dirichlet_cpt(int rows, int cols, RngStream& rng) {
  Matrix cpt(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double total = 0.0;
    for (int c = 0; c < cols; ++c) {
      cpt(r, c) = rng.gamma(1.0);
      total += cpt(r, c);
    }
    cpt.row(r) /= total;
    // exact row-stochasticity for the 1e-12 validation
    cpt(r, cols - 1) = 1.0 - cpt.row(r).head(cols - 1).sum();
  }
  return cpt;
}

inline BayesNet random_discrete_net(RngStream& rng, const NetOptions& opt = {}) {
  const int m = 2 + static_cast<int>(rng.uniform_index(opt.max_nodes - 1));
  const int n_obs =
      1 + static_cast<int>(rng.uniform_index(std::min(opt.max_observed, m - 1)));
  const int n_hidden = m - n_obs;

  std::vector<NodeSpec> nodes;
  for (int i = 0; i < m; ++i) {
    NodeSpec node;
    node.id = (i < n_hidden ? "H" : "X") + std::to_string(i);
    node.kind = NodeKind::Discrete;
    node.observed = i >= n_hidden;
    node.arity = node.observed
                     ? 2 + static_cast<int>(rng.uniform_index(opt.observed_max_states - 1))
                     : 2 + static_cast<int>(rng.uniform_index(opt.max_states - 1));
    // parents among hidden nodes only, capped at 2
    std::vector<int> candidates;
    for (int p = 0; p < std::min(i, n_hidden); ++p) candidates.push_back(p);
    for (int p : candidates) {
      if (static_cast<int>(node.parents.size()) >= 2) break;
      double attach = node.observed ? 0.7 : 0.5;
      if (rng.uniform() < attach) node.parents.push_back(p);
    }
    int configs = 1;
    for (int p : node.parents) configs *= nodes[p].arity;
    node.cpt = dirichlet_cpt(configs, node.arity, rng);
    bool identity = opt.allow_identity_conjugates && rng.uniform() < 0.15;
    node.conjugate = identity ? ConjugateKind::Identity : ConjugateKind::IndependentResample;
    nodes.push_back(std::move(node));
  }
  return knockoff::validate_and_index(std::move(nodes));
}

/// All 2^|O| subsets of observed positions (indices into the observed list).
inline std::vector<std::vector<int>> all_observed_subsets(const BayesNet& net) {
  const int k = static_cast<int>(net.observed_nodes().size());
  std::vector<std::vector<int>> subsets;
  for (int mask = 0; mask < (1 << k); ++mask) {
    std::vector<int> s;
    for (int b = 0; b < k; ++b)
      if (mask & (1 << b)) s.push_back(b);
    subsets.push_back(std::move(s));
  }
  return subsets;
}

}  // namespace bn_random

#endif  // KNOCKOFF_TESTS_BN_RANDOM_UTIL_HPP
