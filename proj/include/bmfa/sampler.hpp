#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/density_model.hpp"

namespace bmfa {

enum class InitMode { prior_mode, jittered };

struct SamplerConfig {
  std::size_t chains = 2;
  std::size_t draws = 10000;
  std::size_t tune = 2000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 0;
  InitMode init = InitMode::jittered;
  /// Run chains concurrently (OpenMP). Results are identical either way.
  bool parallel = true;
  /// Finite-difference check of the gradient at the first initial point.
  bool gradient_check = true;

  /// Throws ValidationError on out-of-range settings.
  void validate() const;
};

struct DrawStats {
  bool divergent = false;
  int tree_depth = 0;
  double energy = 0.0;
  double step_size = 0.0;
  double accept_stat = 0.0;
  int n_leapfrog = 0;
};

struct PosteriorSamples {
  std::vector<std::string> names;
  std::size_t chains = 0;
  std::size_t draws = 0;
  std::size_t dim = 0;
  /// Constrained draws, chain-major: row (chain * draws + draw), one column per variable.
  Eigen::MatrixXd values;
  std::vector<DrawStats> stats;          // same row order as values
  std::vector<double> step_sizes;        // adapted step size per chain
  std::vector<Eigen::VectorXd> inv_metric;  // adapted diagonal inverse mass matrix per chain
  std::optional<Eigen::VectorXd> rhat;   // absent with a single chain
  Eigen::VectorXd ess;
  Eigen::VectorXd mcse;

  double value(std::size_t chain, std::size_t draw, std::size_t var) const {
    return values(static_cast<Eigen::Index>(chain * draws + draw), static_cast<Eigen::Index>(var));
  }
  /// All draws of one variable, pooled over chains.
  Eigen::VectorXd column(std::size_t var) const { return values.col(static_cast<Eigen::Index>(var)); }
  /// chains x draws matrix of one variable.
  Eigen::MatrixXd by_chain(std::size_t var) const;
  std::size_t divergences() const;
  Eigen::VectorXd mean() const { return values.colwise().mean().transpose(); }
  Eigen::VectorXd sd() const;
};

/// Multinomial NUTS with dual-averaging step size and windowed diagonal
/// metric adaptation during warmup. Chain c uses the RNG seeded with seed + c.
PosteriorSamples nuts_sample(const LogDensityModel& model, const SamplerConfig& config);

/// Split-chain potential scale reduction, one value per column block.
/// `chains` holds one (chains x draws) matrix per variable.
double split_rhat(const Eigen::MatrixXd& chains);
Eigen::VectorXd gelman_rubin(const PosteriorSamples& samples);

/// Effective sample size from the initial monotone sequence of
/// autocorrelations (combined over chains).
double effective_sample_size(const Eigen::MatrixXd& chains);

/// Fills rhat, ess and mcse on `samples`.
void compute_convergence(PosteriorSamples& samples);

struct MapResult {
  Eigen::VectorXd z;       // unconstrained mode
  Eigen::VectorXd mode;    // constrained mode
  double log_density = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;  // max-abs gradient at the returned point
};

struct MapOptions {
  int max_iter = 2000;
  double tol = 1e-8;
};

/// Posterior mode by BFGS in unconstrained space on the density without the
/// Jacobian term. Throws NumericalError when the start point is not finite;
/// non-convergence is reported through `converged` and `grad_norm`.
MapResult map_estimate(const LogDensityModel& model, const Eigen::VectorXd& init, const MapOptions& options = {});
MapResult map_estimate(const LogDensityModel& model, const MapOptions& options = {});

}  // namespace bmfa
