#ifndef KNOCKOFF_RNG_HPP
#define KNOCKOFF_RNG_HPP

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "knockoff/common.hpp"

namespace knockoff {

/// SplitMix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed for substream (a, b) of a master seed. Rows, restarts,
/// repetitions and permutation columns each get their own stream so results
/// do not depend on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ 0x5bf03635d751fba1ULL);
  h = mix64(h ^ mix64(a));
  return mix64(h ^ mix64(b ^ 0xd6e8feb86659fd93ULL));
}

/// Seeded random stream wrapping mt19937_64. Remembers the seed it was built
/// from so independent substreams can be derived at any point.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  RngStream substream(std::uint64_t a, std::uint64_t b = 0) const {
    return RngStream(derive_seed(seed_, a, b));
  }

  double uniform() { return unif_(engine_); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(engine_); }

  double normal() { return normal_(engine_); }

  /// Integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(engine_);
  }

  double gamma(double shape, double scale = 1.0) {
    std::gamma_distribution<double> d(shape, scale);
    return d(engine_);
  }

  double chi_squared(double dof) { return gamma(dof / 2.0, 2.0); }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Index k with probability proportional to probs[k]; probs need not be
  /// normalized but must be nonnegative with a positive sum.
  int categorical(const Vector& probs) {
    double total = probs.sum();
    if (!(total > 0.0)) throw NumericError("categorical draw from all-zero probabilities");
    double u = uniform() * total;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size() - 1);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<int> permutation(std::size_t n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    shuffle(p);
    return p;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace knockoff

#endif  // KNOCKOFF_RNG_HPP
