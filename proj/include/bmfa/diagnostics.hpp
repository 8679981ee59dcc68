#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/observations.hpp"
#include "bmfa/sampler.hpp"

namespace bmfa {

struct HdiInterval {
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.95;
  /// Set when the sample histogram shows more than one clear mode; the
  /// interval is still the single shortest window.
  bool multimodal = false;

  double width() const { return upper - lower; }
};

/// Shortest contiguous window holding ceil(mass * N) sorted samples. Needs N >= 50.
HdiInterval hdi(std::span<const double> samples, double mass = 0.95);
HdiInterval hdi(const Eigen::VectorXd& samples, double mass = 0.95);

/// One replicate per posterior draw (rows of `theta_draws`), simulated from
/// each compiled row's likelihood family at that draw. `row_tau` holds one
/// row of noise SDs per draw, or a single row shared by all draws.
/// Draw d uses an RNG seeded from (seed, d), so the result does not depend on
/// `parallel`.
Eigen::MatrixXd posterior_predictive(const CompiledModel& model, const Eigen::MatrixXd& theta_draws,
                                     const Eigen::MatrixXd& row_tau, std::uint64_t seed, bool parallel = true);

struct PpcRow {
  std::string label;
  double observed = 0.0;
  HdiInterval replicate_hdi;
  double pvalue = 0.0;
  bool extreme = false;

  /// Distance of the p-value from 0.5; larger is more extreme.
  double extremeness() const { return std::abs(pvalue - 0.5); }
};

/// p_i = fraction of replicates >= Y_i; extreme when p < 0.05 or p > 0.95.
/// `replicates` is draws x rows. Needs at least 100 replicates.
std::vector<PpcRow> ppc_pvalues(const Eigen::MatrixXd& replicates, const Eigen::VectorXd& observed,
                                const std::vector<std::string>& labels = {});

struct RankedVariable {
  std::string name;
  std::size_t index = 0;
  double width = 0.0;
};

/// Variables by descending 95% HDI width; ties keep index order.
std::vector<RankedVariable> rank_uncertainty(const Eigen::MatrixXd& draws, const std::vector<std::string>& names);
std::vector<RankedVariable> rank_uncertainty(const PosteriorSamples& samples);

}  // namespace bmfa
