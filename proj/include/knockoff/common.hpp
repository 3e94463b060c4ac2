#ifndef KNOCKOFF_COMMON_HPP
#define KNOCKOFF_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace knockoff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

/// Caller passed invalid data or parameters (CLI maps these to exit code 2).
struct InputError : std::invalid_argument {
  explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// A numerical routine failed beyond its tolerance (exit code 1).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A model/config combination the library deliberately does not support.
struct UnsupportedModelError : std::runtime_error {
  explicit UnsupportedModelError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The requested operation needs a capability the object does not provide.
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing or inconsistent component wiring (e.g. a node without a conjugate).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

}  // namespace knockoff

#endif  // KNOCKOFF_COMMON_HPP
