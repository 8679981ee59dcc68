#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/observations.hpp"
#include "bmfa/priors.hpp"

namespace bmfa {

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Conjugate update of N(mu, Sigma) by Y = X theta + eps, eps ~ N(0, diag(noise_var)).
/// Solves through a Cholesky factor of the n x n matrix X Sigma X' + T.
GaussianPosterior gaussian_posterior(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                                     const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                     const Eigen::VectorXd& noise_var);

/// Conjugate posterior of a compiled model under the Gaussian simplification of
/// `prior` (truncation ignored). Nonlinear ratio rows are rejected.
GaussianPosterior gaussian_posterior(const CompiledModel& model, const PriorSpec& prior);

/// argmin ||Y - X theta||^2 + penalty ||theta||^2, via the p x p normal equations.
Eigen::VectorXd ridge_estimate(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, double penalty);

/// P(theta_j < 0) under the Gaussian posterior, for every flow variable j (stocks get 0).
std::vector<double> negative_mass(const GaussianPosterior& posterior, std::size_t stock_count);

struct MseBoundReport {
  double bound_value = 0.0;
  double bias_term = 0.0;
  double variance_term = 0.0;
  Eigen::VectorXd eigenvalues;      // of Sigma, descending
  Eigen::VectorXd singular_values;  // of X Sigma^{1/2}, ascending; min(n, p) of them
  std::optional<double> empirical_mse;
};

/// Upper bound on E||theta* - mu_n||^2 for homoscedastic noise tau.
/// Throws ValidationError when the entries of `tau` differ.
MseBoundReport mse_bound(const Eigen::VectorXd& theta_star, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                         const Eigen::MatrixXd& X, const Eigen::VectorXd& tau);

/// Monte-Carlo mean of ||theta* - mu_n||^2 over `draws` noise realisations.
double empirical_mse(const Eigen::VectorXd& theta_star, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                     const Eigen::MatrixXd& X, const Eigen::VectorXd& tau, int draws, std::uint64_t seed);

/// Diagonal prior covariance diag(sigma^2) of a PriorSpec.
Eigen::MatrixXd prior_covariance(const PriorSpec& prior);
Eigen::VectorXd prior_mean(const PriorSpec& prior);

}  // namespace bmfa
