#ifndef KNOCKOFF_BAYES_NET_HPP
#define KNOCKOFF_BAYES_NET_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "knockoff/common.hpp"
#include "knockoff/knockoff_core.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

enum class NodeKind { Discrete, Gaussian };

enum class ConjugateKind {
  Identity,             // x~ = x; always valid, zero power
  IndependentResample,  // fresh draw of the local conditional given the blanket
  GaussianConditional   // Gaussian knockoff conditional (gaussian leaves only)
};

inline std::string to_string(ConjugateKind k) {
  switch (k) {
    case ConjugateKind::Identity: return "identity";
    case ConjugateKind::IndependentResample: return "independent-resample";
    case ConjugateKind::GaussianConditional: return "gaussian-conditional";
  }
  return "?";
}

/// One node of the network. Discrete nodes hold a CPT whose rows follow the
/// mixed-radix order of their parents (first listed parent most significant).
/// Gaussian nodes are observed leaves with one (mean, covariance) pair per
/// parent configuration.
struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::Discrete;
  int arity = 0;  // discrete state count
  int dim = 0;    // gaussian dimension
  std::vector<int> parents;
  bool observed = false;
  ConjugateKind conjugate = ConjugateKind::IndependentResample;
  Matrix cpt;                   // parent configs x arity
  std::vector<Vector> g_means;  // per parent config
  std::vector<Matrix> g_covs;
};

/// Value of one node in a joint assignment.
struct NodeValue {
  int state = -1;
  Vector vec;
};

using Assignment = std::vector<NodeValue>;

constexpr std::size_t kMaxJointStates = std::size_t(1) << 20;

/// Validated Bayesian network over discrete nodes plus optional Gaussian
/// observed leaves. The listed node order must be topological; observed
/// nodes may not have descendants. Immutable after construction.
class BayesNet {
 public:
  explicit BayesNet(std::vector<NodeSpec> nodes) : nodes_(std::move(nodes)) {
    validate_structure();
    build_caches();
  }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<int>& observed_nodes() const { return observed_; }
  const std::vector<int>& hidden_nodes() const { return hidden_; }
  const std::vector<int>& markov_blanket(int i) const { return blankets_[i]; }
  const std::vector<int>& children(int i) const { return children_[i]; }

  bool all_discrete() const { return all_discrete_; }

  /// Total observed columns when packed into a row (discrete node = 1
  /// column holding the state, gaussian node = dim columns).
  int observed_dim() const { return obs_dim_; }

  std::vector<std::string> observed_header() const {
    std::vector<std::string> h;
    for (int i : observed_) {
      const NodeSpec& node = nodes_[i];
      if (node.kind == NodeKind::Discrete) {
        h.push_back(node.id);
      } else {
        for (int c = 1; c <= node.dim; ++c) h.push_back(node.id + "_" + std::to_string(c));
      }
    }
    return h;
  }

  std::string posterior_method() const {
    return (hidden_.size() == 1 && !all_discrete_) ? "closed-form-mixture" : "exact-enumeration";
  }

  std::size_t hidden_config_count() const { return hidden_configs_; }

  // -- assignments and packing ----------------------------------------------

  int parent_config(int i, const Assignment& values) const {
    int cfg = 0;
    for (int p : nodes_[i].parents) cfg = cfg * nodes_[p].arity + values[p].state;
    return cfg;
  }

  Assignment unpack_observed(const Vector& row) const {
    require(row.size() == obs_dim_, "BayesNet: observed row has wrong dimension");
    Assignment values(nodes_.size());
    Eigen::Index col = 0;
    for (int i : observed_) {
      const NodeSpec& node = nodes_[i];
      if (node.kind == NodeKind::Discrete) {
        double raw = row[col++];
        int s = static_cast<int>(std::lround(raw));
        require(s >= 0 && s < node.arity && std::abs(raw - s) < 1e-9,
                "BayesNet: observed value for node " + node.id + " is not a valid state");
        values[i].state = s;
      } else {
        values[i].vec = row.segment(col, node.dim);
        col += node.dim;
      }
    }
    return values;
  }

  Vector pack_observed(const Assignment& values) const {
    Vector row(obs_dim_);
    Eigen::Index col = 0;
    for (int i : observed_) {
      const NodeSpec& node = nodes_[i];
      if (node.kind == NodeKind::Discrete) {
        row[col++] = double(values[i].state);
      } else {
        row.segment(col, node.dim) = values[i].vec;
        col += node.dim;
      }
    }
    return row;
  }

  // -- local distributions ---------------------------------------------------

  /// log P(value of node i | its parents' values).
  double log_local(int i, const Assignment& values) const {
    const NodeSpec& node = nodes_[i];
    int cfg = parent_config(i, values);
    if (node.kind == NodeKind::Discrete) {
      double p = node.cpt(cfg, values[i].state);
      return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
    const Vector diff = values[i].vec - node.g_means[cfg];
    double quad = diff.dot(gauss_chol_[i][cfg].solve(diff));
    return -0.5 * (node.dim * kLogTwoPi + gauss_logdet_[i][cfg] + quad);
  }

  /// Normalized full conditional of a discrete node given its Markov
  /// blanket, with the surrounding values taken from `values` (the value at
  /// slot i itself is ignored).
  Vector full_conditional(int i, const Assignment& values) const {
    const NodeSpec& node = nodes_[i];
    require(node.kind == NodeKind::Discrete, "full_conditional: node must be discrete");
    Vector logp(node.arity);
    for (int s = 0; s < node.arity; ++s) {
      double lp = 0.0;
      {
        int cfg = parent_config(i, values);
        double p = node.cpt(cfg, s);
        lp += p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
      }
      for (int c : children_[i]) {
        const NodeSpec& child = nodes_[c];
        int cfg = 0;
        for (int p : child.parents) {
          int v = (p == i) ? s : values[p].state;
          cfg = cfg * nodes_[p].arity + v;
        }
        if (child.kind == NodeKind::Discrete) {
          double p = child.cpt(cfg, values[c].state);
          lp += p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
        } else {
          const Vector diff = values[c].vec - child.g_means[cfg];
          double quad = diff.dot(gauss_chol_[c][cfg].solve(diff));
          lp += -0.5 * (child.dim * kLogTwoPi + gauss_logdet_[c][cfg] + quad);
        }
      }
      logp[s] = lp;
    }
    double m = logp.maxCoeff();
    if (!std::isfinite(m))
      throw NumericError("full_conditional: all states have zero probability at node " +
                         node.id);
    Vector probs(node.arity);
    double total = 0.0;
    for (int s = 0; s < node.arity; ++s) {
      probs[s] = std::exp(logp[s] - m);
      total += probs[s];
    }
    probs /= total;
    return probs;
  }

  /// Knockoff conditional parameters of a gaussian leaf for one parent config.
  const KnockoffGaussianParams& gaussian_conjugate_params(int i, int cfg) const {
    return gauss_knockoff_[i][cfg];
  }

  const Eigen::LLT<Matrix>& gaussian_cholesky(int i, int cfg) const { return gauss_chol_[i][cfg]; }

  // -- posterior over hidden nodes -------------------------------------------

  /// Exact posterior over the joint hidden configuration given the observed
  /// values in `values`; hidden slots of `values` are ignored. Returns
  /// normalized probabilities indexed by hidden config.
  Vector hidden_posterior(const Assignment& values) const {
    ensure_hidden_enumerable();
    const std::size_t n_cfg = hidden_configs_;
    Vector logp(static_cast<Eigen::Index>(n_cfg));
    Assignment work = values;
    for (std::size_t cfg = 0; cfg < n_cfg; ++cfg) {
      set_hidden_config(work, cfg);
      double lp = 0.0;
      for (int i = 0; i < num_nodes(); ++i) lp += log_local(i, work);
      logp[static_cast<Eigen::Index>(cfg)] = lp;
    }
    double m = logp.maxCoeff();
    if (!std::isfinite(m)) throw NumericError("hidden_posterior: observed data has zero likelihood");
    Vector probs(logp.size());
    double total = 0.0;
    for (Eigen::Index c = 0; c < logp.size(); ++c) {
      probs[c] = std::exp(logp[c] - m);
      total += probs[c];
    }
    probs /= total;
    return probs;
  }

  void set_hidden_config(Assignment& values, std::size_t cfg) const {
    for (auto it = hidden_.rbegin(); it != hidden_.rend(); ++it) {
      int arity = nodes_[*it].arity;
      values[*it].state = static_cast<int>(cfg % arity);
      cfg /= arity;
    }
  }

  std::size_t hidden_config_of(const Assignment& values) const {
    std::size_t cfg = 0;
    for (int i : hidden_) cfg = cfg * nodes_[i].arity + values[i].state;
    return cfg;
  }

 private:
  void validate_structure() {
    const int m = num_nodes();
    require(m >= 1, "BayesNet: empty node list");
    obs_dim_ = 0;
    all_discrete_ = true;
    std::set<std::string> ids;
    for (int i = 0; i < m; ++i) {
      const NodeSpec& node = nodes_[i];
      require(!node.id.empty(), "BayesNet: node " + std::to_string(i) + " has no id");
      require(ids.insert(node.id).second, "BayesNet: duplicate node id " + node.id);
      for (int p : node.parents) {
        require(p >= 0 && p < m, "BayesNet: parent index out of range at node " + node.id);
        require(p < i,
                "BayesNet: nodes are not in topological order (node " + node.id +
                    " lists parent " + nodes_[p].id + " at or after its own position); "
                    "cycles are impossible to order topologically");
      }
      if (node.kind == NodeKind::Discrete) {
        require(node.arity >= 2, "BayesNet: discrete node " + node.id + " needs arity >= 2");
      } else {
        all_discrete_ = false;
        require(node.dim >= 1, "BayesNet: gaussian node " + node.id + " needs dim >= 1");
        require(node.observed,
                "BayesNet: gaussian node " + node.id + " must be observed (hidden continuous "
                "nodes are not supported)");
        if (node.conjugate == ConjugateKind::IndependentResample && node.dim > 1) {
          // only exchangeable coordinate-wise when the coordinates are
          // conditionally independent
          for (const Matrix& cov : node.g_covs) {
            Matrix off = cov;
            off.diagonal().setZero();
            require(off.cwiseAbs().maxCoeff() <= 1e-12,
                    "BayesNet: independent-resample on gaussian node " + node.id +
                        " requires diagonal covariances; use gaussian-conditional");
          }
        }
      }
    }
    children_.assign(m, {});
    for (int i = 0; i < m; ++i)
      for (int p : nodes_[i].parents) children_[p].push_back(i);

    for (int i = 0; i < m; ++i) {
      const NodeSpec& node = nodes_[i];
      if (node.observed) {
        require(children_[i].empty(), "BayesNet: observed node " + node.id +
                                          " has a descendant; observed variables must be leaves");
        observed_.push_back(i);
        obs_dim_ += node.kind == NodeKind::Discrete ? 1 : node.dim;
      } else {
        require(node.kind == NodeKind::Discrete,
                "BayesNet: hidden node " + node.id + " must be discrete");
        hidden_.push_back(i);
      }
      // every parent of a gaussian (or any) node is discrete, because
      // gaussian nodes are observed leaves
      int configs = 1;
      for (int p : node.parents) configs *= nodes_[p].arity;
      if (node.kind == NodeKind::Discrete) {
        require(node.cpt.rows() == configs && node.cpt.cols() == node.arity,
                "BayesNet: CPT shape mismatch at node " + node.id);
        for (Eigen::Index r = 0; r < node.cpt.rows(); ++r) {
          require(node.cpt.row(r).minCoeff() >= 0.0,
                  "BayesNet: negative CPT entry at node " + node.id);
          require(std::abs(node.cpt.row(r).sum() - 1.0) <= 1e-12,
                  "BayesNet: CPT row " + std::to_string(r) + " of node " + node.id +
                      " does not sum to 1");
        }
      } else {
        require(static_cast<int>(nodes_[i].g_means.size()) == configs &&
                    static_cast<int>(nodes_[i].g_covs.size()) == configs,
                "BayesNet: gaussian parameter count mismatch at node " + node.id);
      }
    }

    // Markov blankets: parents, children, co-parents
    blankets_.assign(m, {});
    for (int i = 0; i < m; ++i) {
      std::set<int> mb(nodes_[i].parents.begin(), nodes_[i].parents.end());
      for (int c : children_[i]) {
        mb.insert(c);
        for (int cp : nodes_[c].parents)
          if (cp != i) mb.insert(cp);
      }
      blankets_[i].assign(mb.begin(), mb.end());
    }

    hidden_configs_ = 1;
    hidden_enumerable_ = true;
    for (int i : hidden_) {
      if (hidden_configs_ > kMaxJointStates / static_cast<std::size_t>(nodes_[i].arity)) {
        hidden_enumerable_ = false;
        break;
      }
      hidden_configs_ *= static_cast<std::size_t>(nodes_[i].arity);
    }
  }

  void build_caches() {
    const int m = num_nodes();
    gauss_chol_.resize(m);
    gauss_logdet_.resize(m);
    gauss_knockoff_.resize(m);
    for (int i = 0; i < m; ++i) {
      const NodeSpec& node = nodes_[i];
      if (node.kind != NodeKind::Gaussian) continue;
      const std::size_t configs = node.g_means.size();
      for (std::size_t cfg = 0; cfg < configs; ++cfg) {
        const Matrix& cov = node.g_covs[cfg];
        require(cov.rows() == node.dim && cov.cols() == node.dim &&
                    node.g_means[cfg].size() == node.dim,
                "BayesNet: gaussian parameter shape mismatch at node " + node.id);
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success)
          throw NumericError("BayesNet: covariance of node " + node.id +
                             " is not positive definite");
        Matrix L = llt.matrixL();
        double logdet = 0.0;
        for (Eigen::Index j = 0; j < L.rows(); ++j) logdet += 2.0 * std::log(L(j, j));
        gauss_chol_[i].push_back(llt);
        gauss_logdet_[i].push_back(logdet);
        if (node.conjugate == ConjugateKind::GaussianConditional) {
          Matrix D = compute_diag(cov);
          gauss_knockoff_[i].push_back(gaussian_knockoff_params(node.g_means[cfg], cov, D));
        }
      }
    }
  }

  void ensure_hidden_enumerable() const {
    if (!hidden_enumerable_)
      throw UnsupportedModelError(
          "BayesNet: joint hidden state space exceeds the exact-enumeration cap of 2^20 states");
  }

  std::vector<NodeSpec> nodes_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> blankets_;
  std::vector<int> observed_, hidden_;
  int obs_dim_ = 0;
  bool all_discrete_ = true;
  std::size_t hidden_configs_ = 1;
  bool hidden_enumerable_ = true;

  std::vector<std::vector<Eigen::LLT<Matrix>>> gauss_chol_;
  std::vector<std::vector<double>> gauss_logdet_;
  std::vector<std::vector<KnockoffGaussianParams>> gauss_knockoff_;
};

/// Checks structure, computes Markov blankets, and freezes the network.
inline BayesNet validate_and_index(std::vector<NodeSpec> nodes) {
  return BayesNet(std::move(nodes));
}

// ---------------------------------------------------------------------------
// sampling

/// Ancestral sampling of the observed block; row i uses substream (seed, i).
inline Matrix sample_forward(const BayesNet& net, Eigen::Index n, const RngStream& rng) {
  Matrix out(n, net.observed_dim());
  for (Eigen::Index r = 0; r < n; ++r) {
    RngStream row_rng = rng.substream(static_cast<std::uint64_t>(r));
    Assignment values(net.num_nodes());
    for (int i = 0; i < net.num_nodes(); ++i) {
      const NodeSpec& node = net.nodes()[i];
      int cfg = net.parent_config(i, values);
      if (node.kind == NodeKind::Discrete) {
        values[i].state = row_rng.categorical(node.cpt.row(cfg).transpose());
      } else {
        Vector z = row_rng.normal_vector(node.dim);
        values[i].vec = node.g_means[cfg] + net.gaussian_cholesky(i, cfg).matrixL() * z;
      }
    }
    out.row(r) = net.pack_observed(values).transpose();
  }
  return out;
}

/// Exact draw from P(hidden | observed). The observed slots of the returned
/// assignment keep their given values.
inline Assignment sample_posterior_hidden(const BayesNet& net, const Vector& x_obs,
                                          RngStream& rng) {
  Assignment values = net.unpack_observed(x_obs);
  Vector post = net.hidden_posterior(values);
  std::size_t cfg = static_cast<std::size_t>(rng.categorical(post));
  net.set_hidden_config(values, cfg);
  return values;
}

namespace detail {

/// Draws the local knockoff of node i. `mixed` holds knockoff values at
/// slots < i and original values at slots >= i; originals[i] is the value
/// whose knockoff is being drawn.
inline NodeValue draw_conjugate(const BayesNet& net, int i, const Assignment& mixed,
                                const NodeValue& original, RngStream& rng) {
  const NodeSpec& node = net.nodes()[i];
  switch (node.conjugate) {
    case ConjugateKind::Identity:
      return original;
    case ConjugateKind::IndependentResample: {
      if (node.kind == NodeKind::Discrete) {
        Vector probs = net.full_conditional(i, mixed);
        NodeValue v;
        v.state = rng.categorical(probs);
        return v;
      }
      int cfg = net.parent_config(i, mixed);
      Vector z = rng.normal_vector(node.dim);
      NodeValue v;
      v.vec = node.g_means[cfg] + net.gaussian_cholesky(i, cfg).matrixL() * z;
      return v;
    }
    case ConjugateKind::GaussianConditional: {
      require(node.kind == NodeKind::Gaussian,
              "BayesNet: gaussian-conditional conjugate on a discrete node " + node.id);
      int cfg = net.parent_config(i, mixed);
      NodeValue v;
      v.vec = sample_gaussian_knockoff(net.gaussian_conjugate_params(i, cfg), original.vec, rng);
      return v;
    }
  }
  throw ConfigError("BayesNet: node " + node.id + " has no conjugate configured");
}

/// One pass of the BN knockoff sampling procedure for a full assignment
/// (hidden already drawn from the posterior). Returns the knockoff
/// assignment of every node.
inline Assignment knockoff_pass(const BayesNet& net, const Assignment& original, RngStream& rng) {
  const int m = net.num_nodes();
  // mixed[j] = knockoff value for j < i, original value for j >= i
  Assignment mixed = original;
  Assignment knockoff(m);
  for (int i = 0; i < m; ++i) {
    knockoff[i] = draw_conjugate(net, i, mixed, original[i], rng);
    mixed[i] = knockoff[i];
  }
  return knockoff;
}

}  // namespace detail

/// Algorithm: per row, draw the hidden nodes from their exact posterior,
/// then walk the topological order drawing each node's local knockoff
/// conditioned on already-drawn knockoffs of earlier Markov-blanket members
/// and originals of later ones. Only observed-node knockoffs are returned.
/// Row i uses the substream (rng seed, i).
inline Matrix sample_bn_knockoffs(const BayesNet& net, const Matrix& X_obs, const RngStream& rng) {
  require(X_obs.cols() == net.observed_dim(), "sample_bn_knockoffs: column count mismatch");
  Matrix out(X_obs.rows(), X_obs.cols());
  for (Eigen::Index r = 0; r < X_obs.rows(); ++r) {
    RngStream row_rng = rng.substream(static_cast<std::uint64_t>(r));
    Assignment values = sample_posterior_hidden(net, X_obs.row(r).transpose(), row_rng);
    Assignment knockoff = detail::knockoff_pass(net, values, row_rng);
    out.row(r) = net.pack_observed(knockoff).transpose();
  }
  return out;
}

/// The simple latent-variable specialization: one hidden node H and one
/// observed node X. Sample H ~ P(H|X), then H~ from H's conjugate, then
/// X~ from X's conjugate conditioned on (X, H~). Identical to the general
/// procedure restricted to m = 2.
inline Vector sample_latent_knockoff_simple(const BayesNet& net, const Vector& x_obs,
                                            RngStream& rng) {
  require(net.num_nodes() == 2, "sample_latent_knockoff_simple: net must have exactly two nodes");
  require(net.hidden_nodes() == std::vector<int>{0} && net.observed_nodes() == std::vector<int>{1},
          "sample_latent_knockoff_simple: expected node 0 hidden and node 1 observed");
  Assignment values = sample_posterior_hidden(net, x_obs, rng);            // H ~ P(H|X)
  Assignment mixed = values;
  NodeValue h_knock = detail::draw_conjugate(net, 0, mixed, values[0], rng);  // H~ ~ Q(.|H,X)
  mixed[0] = h_knock;
  NodeValue x_knock = detail::draw_conjugate(net, 1, mixed, values[1], rng);  // X~ ~ Q(.|X,H~)
  Assignment knockoff(2);
  knockoff[0] = h_knock;
  knockoff[1] = x_knock;
  return net.pack_observed(knockoff);
}

// ---------------------------------------------------------------------------
// exact enumeration (discrete nets)

/// Exact joint table over full assignments. `index(values)` linearizes an
/// assignment of all nodes in mixed-radix order.
struct JointEnumeration {
  std::vector<int> arity;          // all nodes, listed order
  std::size_t total_states = 1;
  Matrix full;                     // P(x, x~), total_states x total_states

  std::size_t index(const Assignment& values) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < arity.size(); ++i)
      idx = idx * static_cast<std::size_t>(arity[i]) + static_cast<std::size_t>(values[i].state);
    return idx;
  }
};

/// Exact joint over the observed block only.
struct JointTable {
  std::vector<int> obs_arity;
  std::size_t obs_states = 1;
  Matrix table;  // P(x_O, x~_O)

  std::size_t index(const std::vector<int>& obs_values) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < obs_arity.size(); ++i)
      idx = idx * static_cast<std::size_t>(obs_arity[i]) +
            static_cast<std::size_t>(obs_values[i]);
    return idx;
  }
};

namespace detail {

/// Probability the conjugate of node i produces `proposed` given the mixed
/// conditioning assignment (knockoffs before i, originals from i on).
inline double conjugate_probability(const BayesNet& net, int i, const Assignment& mixed,
                                    int original_state, int proposed_state) {
  const NodeSpec& node = net.nodes()[i];
  switch (node.conjugate) {
    case ConjugateKind::Identity:
      return proposed_state == original_state ? 1.0 : 0.0;
    case ConjugateKind::IndependentResample: {
      Vector probs = net.full_conditional(i, mixed);
      return probs[proposed_state];
    }
    case ConjugateKind::GaussianConditional:
      throw UnsupportedModelError("enumerate_joint: gaussian nodes cannot be enumerated");
  }
  throw ConfigError("BayesNet: node " + node.id + " has no conjugate configured");
}

template <typename Fn>
void for_each_assignment(const std::vector<int>& arity, Fn&& fn) {
  const std::size_t m = arity.size();
  Assignment values(m);
  for (auto& v : values) v.state = 0;
  while (true) {
    fn(values);
    std::size_t pos = m;
    while (pos > 0) {
      --pos;
      if (++values[pos].state < arity[pos]) break;
      values[pos].state = 0;
      if (pos == 0) return;
    }
  }
}

}  // namespace detail

/// Exact joint distribution of (X, X~) over every node, obtained by summing
/// the sampling-step kernels over all assignments:
/// P(x, x~) = P(x) prod_i Q_i(x~_i | x~_{<i} on MB, x_{>i} on MB, x_i).
inline JointEnumeration enumerate_joint_full(const BayesNet& net) {
  if (!net.all_discrete())
    throw UnsupportedModelError("enumerate_joint: network must be fully discrete");
  JointEnumeration en;
  for (const auto& node : net.nodes()) en.arity.push_back(node.arity);
  for (int a : en.arity) {
    if (en.total_states > kMaxJointStates / static_cast<std::size_t>(a))
      throw UnsupportedModelError(
          "enumerate_joint: joint state space exceeds the cap of 2^20 states");
    en.total_states *= static_cast<std::size_t>(a);
  }
  if (en.total_states > kMaxJointStates / en.total_states)
    throw UnsupportedModelError(
        "enumerate_joint: squared joint state space exceeds the cap of 2^20 states");

  const int m = net.num_nodes();
  en.full = Matrix::Zero(static_cast<Eigen::Index>(en.total_states),
                         static_cast<Eigen::Index>(en.total_states));
  detail::for_each_assignment(en.arity, [&](const Assignment& x) {
    double px = 1.0;
    for (int i = 0; i < m; ++i) {
      int cfg = net.parent_config(i, x);
      px *= net.nodes()[i].cpt(cfg, x[i].state);
    }
    if (px == 0.0) return;
    const std::size_t xi = en.index(x);
    detail::for_each_assignment(en.arity, [&](const Assignment& xt) {
      Assignment mixed = x;
      double q = 1.0;
      for (int i = 0; i < m && q > 0.0; ++i) {
        q *= detail::conjugate_probability(net, i, mixed, x[i].state, xt[i].state);
        mixed[i].state = xt[i].state;
      }
      if (q > 0.0)
        en.full(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(en.index(xt))) += px * q;
    });
  });
  return en;
}

/// Marginal of enumerate_joint_full over the hidden nodes of both copies:
/// the exact table P(x_O, x~_O) that Theorem-style exchangeability checks
/// operate on.
inline JointTable enumerate_joint(const BayesNet& net) {
  JointEnumeration full = enumerate_joint_full(net);
  JointTable jt;
  std::size_t obs_states = 1;
  for (int i : net.observed_nodes()) {
    jt.obs_arity.push_back(net.nodes()[i].arity);
    obs_states *= static_cast<std::size_t>(net.nodes()[i].arity);
  }
  jt.obs_states = obs_states;
  jt.table = Matrix::Zero(static_cast<Eigen::Index>(obs_states),
                          static_cast<Eigen::Index>(obs_states));

  std::vector<int> all_arity = full.arity;
  std::vector<int> obs_list = net.observed_nodes();
  auto obs_index_of = [&](const Assignment& values) {
    std::size_t idx = 0;
    for (int i : obs_list)
      idx = idx * static_cast<std::size_t>(net.nodes()[i].arity) +
            static_cast<std::size_t>(values[i].state);
    return idx;
  };

  detail::for_each_assignment(all_arity, [&](const Assignment& x) {
    const std::size_t xi = full.index(x);
    const std::size_t xo = obs_index_of(x);
    detail::for_each_assignment(all_arity, [&](const Assignment& xt) {
      double p = full.full(static_cast<Eigen::Index>(xi),
                           static_cast<Eigen::Index>(full.index(xt)));
      if (p != 0.0)
        jt.table(static_cast<Eigen::Index>(xo), static_cast<Eigen::Index>(obs_index_of(xt))) += p;
    });
  });
  return jt;
}

/// Forward marginal P(x_O) by direct enumeration, for cross-checking the
/// joint table's row sums.
inline Vector forward_marginal(const BayesNet& net) {
  if (!net.all_discrete())
    throw UnsupportedModelError("forward_marginal: network must be fully discrete");
  std::vector<int> arity;
  for (const auto& node : net.nodes()) arity.push_back(node.arity);
  std::size_t obs_states = 1;
  for (int i : net.observed_nodes()) obs_states *= static_cast<std::size_t>(net.nodes()[i].arity);
  Vector marg = Vector::Zero(static_cast<Eigen::Index>(obs_states));
  detail::for_each_assignment(arity, [&](const Assignment& x) {
    double px = 1.0;
    for (int i = 0; i < net.num_nodes(); ++i)
      px *= net.nodes()[i].cpt(net.parent_config(i, x), x[i].state);
    if (px == 0.0) return;
    std::size_t idx = 0;
    for (int i : net.observed_nodes())
      idx = idx * static_cast<std::size_t>(net.nodes()[i].arity) +
            static_cast<std::size_t>(x[i].state);
    marg[static_cast<Eigen::Index>(idx)] += px;
  });
  return marg;
}

/// Applies swap(S) to a JointTable: observed nodes in S exchange their
/// original and knockoff coordinates. Exchangeability means the result
/// equals the input table.
inline Matrix swap_table(const JointTable& jt, const std::vector<int>& S) {
  std::set<int> swap_set(S.begin(), S.end());
  const std::size_t n = jt.obs_states;
  const std::size_t k = jt.obs_arity.size();
  Matrix out(jt.table.rows(), jt.table.cols());
  std::vector<int> xv(k), xtv(k);
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t rest = a;
    for (std::size_t i = k; i > 0; --i) {
      xv[i - 1] = static_cast<int>(rest % jt.obs_arity[i - 1]);
      rest /= jt.obs_arity[i - 1];
    }
    for (std::size_t b = 0; b < n; ++b) {
      std::size_t rest2 = b;
      for (std::size_t i = k; i > 0; --i) {
        xtv[i - 1] = static_cast<int>(rest2 % jt.obs_arity[i - 1]);
        rest2 /= jt.obs_arity[i - 1];
      }
      std::vector<int> xs = xv, xts = xtv;
      for (std::size_t i = 0; i < k; ++i) {
        if (swap_set.count(static_cast<int>(i))) std::swap(xs[i], xts[i]);
      }
      out(static_cast<Eigen::Index>(jt.index(xs)), static_cast<Eigen::Index>(jt.index(xts))) =
          jt.table(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// serialization

inline ConjugateKind conjugate_from_string(const std::string& s) {
  if (s == "identity") return ConjugateKind::Identity;
  if (s == "independent-resample") return ConjugateKind::IndependentResample;
  if (s == "gaussian-conditional") return ConjugateKind::GaussianConditional;
  throw InputError("unknown conjugate kind: " + s +
                   " (expected identity, independent-resample or gaussian-conditional)");
}

/// Parses the network definition document (see README for the schema and a
/// worked naive-Bayes example).
inline BayesNet bn_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != "bn-1")
    throw InputError("network file: unknown or missing format tag (expected bn-1)");
  std::vector<NodeSpec> nodes;
  std::vector<std::string> ids;
  auto id_index = [&](const std::string& id) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return static_cast<int>(i);
    throw InputError("network file: parent id '" + id + "' not defined before use");
  };
  for (const auto& nj : j.at("nodes")) {
    NodeSpec node;
    node.id = nj.at("id").get<std::string>();
    std::string kind = nj.value("kind", "discrete");
    node.observed = nj.value("observed", false);
    node.conjugate = conjugate_from_string(nj.value("conjugate", "independent-resample"));
    for (const auto& pid : nj.value("parents", std::vector<std::string>{}))
      node.parents.push_back(id_index(pid));
    if (kind == "discrete") {
      node.kind = NodeKind::Discrete;
      node.arity = nj.at("states").get<int>();
      auto rows = nj.at("cpt").get<std::vector<std::vector<double>>>();
      node.cpt.resize(static_cast<Eigen::Index>(rows.size()), node.arity);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        require(static_cast<int>(rows[r].size()) == node.arity,
                "network file: CPT row width mismatch at node " + node.id);
        for (int c = 0; c < node.arity; ++c) node.cpt(static_cast<Eigen::Index>(r), c) = rows[r][c];
      }
    } else if (kind == "gaussian") {
      node.kind = NodeKind::Gaussian;
      node.dim = nj.at("dim").get<int>();
      for (const auto& mj : nj.at("means")) {
        auto mv = mj.get<std::vector<double>>();
        require(static_cast<int>(mv.size()) == node.dim,
                "network file: mean length mismatch at node " + node.id);
        node.g_means.push_back(Eigen::Map<Vector>(mv.data(), node.dim));
      }
      for (const auto& cj : nj.at("covariances")) {
        auto cv = cj.get<std::vector<double>>();
        require(static_cast<int>(cv.size()) == node.dim * node.dim,
                "network file: covariance length mismatch at node " + node.id);
        Matrix cov(node.dim, node.dim);
        for (int r = 0; r < node.dim; ++r)
          for (int c = 0; c < node.dim; ++c) cov(r, c) = cv[r * node.dim + c];
        node.g_covs.push_back(cov);
      }
    } else {
      throw InputError("network file: unknown node kind '" + kind + "' at node " + node.id);
    }
    ids.push_back(node.id);
    nodes.push_back(std::move(node));
  }
  return validate_and_index(std::move(nodes));
}

inline BayesNet load_bn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open network file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("network file parse error: " + std::string(e.what()));
  }
  return bn_from_json(j);
}

}  // namespace knockoff

#endif  // KNOCKOFF_BAYES_NET_HPP
