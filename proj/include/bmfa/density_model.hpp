#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bmfa {

/// A differentiable log-density over unconstrained R^dim, as consumed by the
/// sampler and the optimizer.
class LogDensityModel {
 public:
  virtual ~LogDensityModel() = default;

  virtual std::size_t dim() const = 0;

  /// Log-density at z and its gradient. Must be reentrant. Returns a
  /// non-finite value instead of throwing when z is numerically unusable.
  /// With `jacobian` false the change-of-variables term is left out, giving
  /// the constrained-space density expressed in z (used for posterior modes).
  virtual double log_density(const Eigen::VectorXd& z, Eigen::VectorXd& grad, bool jacobian = true) const = 0;

  /// Map z to the reported (constrained) parameter vector.
  virtual Eigen::VectorXd constrain(const Eigen::VectorXd& z) const { return z; }

  /// Starting point before jitter.
  virtual Eigen::VectorXd initial_point() const { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim())); }

  virtual std::vector<std::string> parameter_names() const;
};

inline std::vector<std::string> LogDensityModel::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < dim(); ++i) out.push_back("x" + std::to_string(i));
  return out;
}

}  // namespace bmfa
