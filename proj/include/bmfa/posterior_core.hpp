#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/density_model.hpp"
#include "bmfa/observations.hpp"
#include "bmfa/priors.hpp"

namespace bmfa {

struct LogDensityBlocks {
  double prior = 0.0;
  double stock_lik = 0.0;         // normal data rows (stock and aggregate stock)
  double flow_lik = 0.0;          // truncated-normal flow rows, normalizer included
  double ratio_lik = 0.0;         // transfer-coefficient rows, either form
  double mass_balance_lik = 0.0;
  double noise_prior = 0.0;       // inverse-gamma terms on free noise SDs
  double jacobian = 0.0;

  double total() const {
    return prior + stock_lik + flow_lik + ratio_lik + mass_balance_lik + noise_prior + jacobian;
  }
};

struct LogDensityReport {
  double log_posterior = 0.0;
  Eigen::VectorXd gradient;
  LogDensityBlocks blocks;
};

/// Joint log-posterior of the full model over the unconstrained vector
///   z = [theta_stocks; logit(theta_flows / L); log(tau_free)].
/// Stocks map by identity, flows by the scaled logistic onto (0, L), free
/// noise SDs by exp. Constants that do not depend on z are dropped.
class LogPosterior : public LogDensityModel {
 public:
  /// `noise` is indexed like the rows that were compiled into `model`
  /// (row_provenance maps compiled rows back to it).
  LogPosterior(CompiledModel model, PriorSpec prior, NoisePriorSpec noise);

  std::size_t dim() const override { return p_ + free_tau_rows_.size(); }
  std::size_t theta_dim() const { return p_; }
  std::size_t tau_dim() const { return free_tau_rows_.size(); }

  double log_density(const Eigen::VectorXd& z, Eigen::VectorXd& grad, bool jacobian = true) const override;

  /// Full report with block breakdown. Throws NumericalError naming the
  /// first non-finite block.
  LogDensityReport evaluate(const Eigen::VectorXd& z, bool jacobian = true) const;

  /// [theta; tau_free].
  Eigen::VectorXd constrain(const Eigen::VectorXd& z) const override;
  /// Inverse of constrain; `params` is [theta] or [theta; tau_free].
  Eigen::VectorXd unconstrain(const Eigen::VectorXd& params) const;

  /// Prior mode (flows clamped into the open interval), noise at plug-in values.
  Eigen::VectorXd initial_point() const override;
  std::vector<std::string> parameter_names() const override;

  /// Constrained-space pieces. Gradients are accumulated into the outputs when non-null.
  double log_prior(const Eigen::VectorXd& theta, Eigen::VectorXd* grad_theta = nullptr) const;
  double log_likelihood(const Eigen::VectorXd& theta, const Eigen::VectorXd& tau, Eigen::VectorXd* grad_theta = nullptr,
                        Eigen::VectorXd* grad_tau = nullptr) const;

  /// Per-compiled-row noise SDs implied by z (fixed rows keep their plug-in value).
  Eigen::VectorXd row_tau(const Eigen::VectorXd& z) const;

  const CompiledModel& model() const { return model_; }
  const PriorSpec& prior() const { return prior_; }
  /// Compiled-row index of each free noise coordinate.
  const std::vector<std::size_t>& free_tau_rows() const { return free_tau_rows_; }
  void set_variable_names(std::vector<std::string> names) { names_ = std::move(names); }

 private:
  double compute(const Eigen::VectorXd& z, Eigen::VectorXd* grad, bool jacobian, LogDensityBlocks* blocks) const;

  CompiledModel model_;
  PriorSpec prior_;
  std::size_t p_;
  std::vector<std::size_t> free_tau_rows_;
  std::vector<InverseGammaPrior> tau_hyper_;
  std::vector<std::string> names_;
};

/// Scaled logistic transform between (0, upper) and R.
double flow_to_unconstrained(double theta, double upper);
double flow_from_unconstrained(double z, double upper);

}  // namespace bmfa
