#include <cmath>
#include <limits>
#include <vector>

#include "bmfa/error.hpp"
#include "bmfa/sampler.hpp"

namespace bmfa {

namespace {

double sample_variance(const Eigen::VectorXd& x) {
  const double n = static_cast<double>(x.size());
  return (x.array() - x.mean()).square().sum() / (n - 1.0);
}

}  // namespace

double split_rhat(const Eigen::MatrixXd& chains) {
  const Eigen::Index m = chains.rows();
  const Eigen::Index n = chains.cols();
  if (m < 2) throw ValidationError("split R-hat needs at least two chains");
  if (n < 4) throw ValidationError("split R-hat needs at least four draws per chain");
  const Eigen::Index half = n / 2;
  Eigen::MatrixXd split(2 * m, half);
  for (Eigen::Index c = 0; c < m; ++c) {
    split.row(2 * c) = chains.row(c).head(half);
    split.row(2 * c + 1) = chains.row(c).tail(half);
  }
  const double len = static_cast<double>(half);
  Eigen::VectorXd means = split.rowwise().mean();
  double w = 0.0;
  for (Eigen::Index c = 0; c < split.rows(); ++c) w += sample_variance(split.row(c).transpose());
  w /= static_cast<double>(split.rows());
  const double b = len * sample_variance(means);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

Eigen::VectorXd gelman_rubin(const PosteriorSamples& samples) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(samples.dim));
  for (std::size_t v = 0; v < samples.dim; ++v) r(static_cast<Eigen::Index>(v)) = split_rhat(samples.by_chain(v));
  return r;
}

double effective_sample_size(const Eigen::MatrixXd& chains) {
  const Eigen::Index m = chains.rows();
  const Eigen::Index n = chains.cols();
  const double total = static_cast<double>(m * n);
  if (n < 4) return total;

  std::vector<Eigen::VectorXd> centered;
  Eigen::VectorXd chain_means(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    chain_means(c) = chains.row(c).mean();
    centered.push_back(chains.row(c).transpose().array() - chain_means(c));
  }
  const double nn = static_cast<double>(n);
  // Mean over chains of the biased autocovariance at `lag`.
  auto acov = [&](Eigen::Index lag) {
    double s = 0.0;
    for (const auto& x : centered) s += x.head(n - lag).dot(x.tail(n - lag)) / nn;
    return s / static_cast<double>(m);
  };
  const double mean_var = acov(0) * nn / (nn - 1.0);
  double var_plus = mean_var * (nn - 1.0) / nn;
  if (m > 1) var_plus += sample_variance(chain_means);
  if (!(var_plus > 0.0)) return total;

  std::vector<double> rho(static_cast<std::size_t>(n) + 2, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - acov(1)) / var_plus;
  Eigen::Index t = 1;
  while (t < n - 5 && rho_even + rho_odd > 0.0) {
    rho[static_cast<std::size_t>(t)] = rho_odd;
    rho_even = 1.0 - (mean_var - acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[static_cast<std::size_t>(t + 1)] = rho_even;
      rho[static_cast<std::size_t>(t + 2)] = rho_odd;
    }
    t += 2;
  }
  const auto max_t = static_cast<std::size_t>(t);
  if (rho_even > 0.0) rho[max_t + 1] = rho_even;
  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
      rho[k + 2] = rho[k + 1];
    }
  }
  double sum = 0.0;
  for (std::size_t k = 0; k <= max_t; ++k) sum += rho[k];
  double tau = -1.0 + 2.0 * sum + rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

void compute_convergence(PosteriorSamples& samples) {
  const auto d = static_cast<Eigen::Index>(samples.dim);
  samples.ess.resize(d);
  samples.mcse.resize(d);
  const Eigen::VectorXd sd = samples.sd();
  for (Eigen::Index v = 0; v < d; ++v) {
    const Eigen::MatrixXd ch = samples.by_chain(static_cast<std::size_t>(v));
    samples.ess(v) = effective_sample_size(ch);
    samples.mcse(v) = sd(v) / std::sqrt(samples.ess(v));
  }
  if (samples.chains >= 2 && samples.draws >= 4)
    samples.rhat = gelman_rubin(samples);
  else
    samples.rhat.reset();
}

}  // namespace bmfa
