#include "bmfa/gaussian_inference.hpp"

#include <algorithm>
#include <cmath>

#include "bmfa/error.hpp"
#include "bmfa/normal_math.hpp"

namespace bmfa {

GaussianPosterior gaussian_posterior(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                                     const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                     const Eigen::VectorXd& noise_var) {
  const Eigen::Index p = mu.size();
  const Eigen::Index n = X.rows();
  if (Sigma.rows() != p || Sigma.cols() != p || X.cols() != p || Y.size() != n || noise_var.size() != n)
    throw ValidationError("gaussian_posterior: inconsistent dimensions");
  if ((noise_var.array() <= 0.0).any()) throw ValidationError("gaussian_posterior: noise variances must be positive");
  if (n == 0) return {mu, Sigma};

  const Eigen::MatrixXd SXt = Sigma * X.transpose();  // p x n
  Eigen::MatrixXd S = X * SXt;
  S.diagonal() += noise_var;
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("gaussian_posterior: X Sigma X' + T is not positive definite");

  GaussianPosterior post;
  post.mean = mu + SXt * llt.solve(Y - X * mu);
  post.cov = Sigma - SXt * llt.solve(SXt.transpose());
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

Eigen::MatrixXd prior_covariance(const PriorSpec& prior) {
  Eigen::VectorXd var(static_cast<Eigen::Index>(prior.size()));
  for (std::size_t i = 0; i < prior.size(); ++i)
    var(static_cast<Eigen::Index>(i)) = prior.variables[i].sigma * prior.variables[i].sigma;
  return var.asDiagonal();
}

Eigen::VectorXd prior_mean(const PriorSpec& prior) {
  Eigen::VectorXd mu(static_cast<Eigen::Index>(prior.size()));
  for (std::size_t i = 0; i < prior.size(); ++i) mu(static_cast<Eigen::Index>(i)) = prior.variables[i].mu;
  return mu;
}

GaussianPosterior gaussian_posterior(const CompiledModel& model, const PriorSpec& prior) {
  if (!model.ratio_specs.empty())
    throw ValidationError("the Gaussian model needs linear rows only; use the linear ratio form");
  if (prior.size() != model.p) throw ValidationError("prior size does not match the model");
  const Eigen::Index nl = static_cast<Eigen::Index>(model.n_linear());
  return gaussian_posterior(prior_mean(prior), prior_covariance(prior), model.X, model.Y.head(nl),
                            model.tau.head(nl).array().square().matrix());
}

Eigen::VectorXd ridge_estimate(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, double penalty) {
  if (!(penalty > 0.0)) throw ValidationError("ridge penalty must be positive");
  if (Y.size() != X.rows()) throw ValidationError("ridge_estimate: inconsistent dimensions");
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += penalty;
  return A.ldlt().solve(X.transpose() * Y);
}

std::vector<double> negative_mass(const GaussianPosterior& posterior, std::size_t stock_count) {
  std::vector<double> out(static_cast<std::size_t>(posterior.mean.size()), 0.0);
  for (std::size_t j = stock_count; j < out.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    const double sd = std::sqrt(std::max(posterior.cov(i, i), 0.0));
    if (sd == 0.0)
      out[j] = posterior.mean(i) < 0.0 ? 1.0 : 0.0;
    else
      out[j] = math::std_normal_cdf(-posterior.mean(i) / sd);
  }
  return out;
}

MseBoundReport mse_bound(const Eigen::VectorXd& theta_star, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                         const Eigen::MatrixXd& X, const Eigen::VectorXd& tau) {
  const Eigen::Index p = mu.size();
  const Eigen::Index n = X.rows();
  if (theta_star.size() != p || Sigma.rows() != p || Sigma.cols() != p || X.cols() != p || tau.size() != n)
    throw ValidationError("mse_bound: inconsistent dimensions");
  if (n > 0 && (tau.array() != tau(0)).any())
    throw ValidationError("mse_bound requires homoscedastic noise (all tau equal)");
  const double t2 = n > 0 ? tau(0) * tau(0) : 0.0;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Sigma);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError("mse_bound: Sigma must be positive definite");

  MseBoundReport rep;
  rep.eigenvalues = eig.eigenvalues().reverse();
  const double lambda1 = rep.eigenvalues(0);

  const Eigen::VectorXd beta = theta_star - mu;
  // Tr(Sigma^{-1/2} beta beta' Sigma^{-1/2}) = beta' Sigma^{-1} beta
  const double prior_distance = beta.dot(eig.eigenvectors() *
                                         (eig.eigenvalues().cwiseInverse().asDiagonal() *
                                          (eig.eigenvectors().transpose() * beta)));

  double bias_sum = static_cast<double>(p);
  double var_sum = 0.0;
  if (n > 0) {
    const Eigen::MatrixXd root = eig.operatorSqrt();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X * root);
    rep.singular_values = svd.singularValues().reverse();
    const Eigen::Index m = rep.singular_values.size();
    bias_sum = static_cast<double>(p - m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d2 = rep.singular_values(j) * rep.singular_values(j);
      const double denom = (d2 + t2) * (d2 + t2);
      bias_sum += t2 * t2 / denom;
      var_sum += lambda1 * d2 / denom;
    }
  } else {
    rep.singular_values.resize(0);
  }
  rep.bias_term = prior_distance * lambda1 * bias_sum;
  rep.variance_term = t2 * var_sum;
  rep.bound_value = rep.bias_term + rep.variance_term;
  return rep;
}

double empirical_mse(const Eigen::VectorXd& theta_star, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                     const Eigen::MatrixXd& X, const Eigen::VectorXd& tau, int draws, std::uint64_t seed) {
  if (draws < 1) throw ValidationError("empirical_mse needs at least one draw");
  const Eigen::Index n = X.rows();
  math::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (n == 0) return (theta_star - mu).squaredNorm();
  // mu_n is affine in Y: mu + K (Y - X mu)
  const Eigen::MatrixXd SXt = Sigma * X.transpose();
  Eigen::MatrixXd S = X * SXt;
  S.diagonal() += tau.array().square().matrix();
  const Eigen::MatrixXd K = SXt * S.llt().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd signal = X * theta_star - X * mu;
  double total = 0.0;
  Eigen::VectorXd eps(n);
  for (int d = 0; d < draws; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = tau(i) * normal(rng);
    total += (theta_star - mu - K * (signal + eps)).squaredNorm();
  }
  return total / draws;
}

}  // namespace bmfa
