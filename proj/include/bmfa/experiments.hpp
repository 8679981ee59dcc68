#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmfa/fixtures.hpp"
#include "bmfa/sampler.hpp"

namespace bmfa {

enum class PriorSetting { weakly, uninformative };
std::string to_string(PriorSetting p);

enum class EstimateMethod { full_map, gaussian_mean, ridge };
std::string to_string(EstimateMethod m);

/// A system with known truth for simulation studies. Data rows carry the
/// order in which they are added; their values are replaced per run.
struct ExperimentSystem {
  SystemGraph graph;
  Eigen::VectorXd truth;
  std::vector<ObservationRow> data;
  std::vector<ObservationRow> balance;
  PriorSpec weakly;
  PriorSpec uninformative;
  double likelihood_upper = kDefaultMassBound;

  const PriorSpec& prior(PriorSetting p) const { return p == PriorSetting::weakly ? weakly : uninformative; }
  std::size_t n() const { return data.size(); }
  std::size_t p() const { return static_cast<std::size_t>(truth.size()); }
};

/// Builds an experiment system from a fixture with a truth; the weakly prior is
/// the fixture's, the uninformative one is elicited from the truth signs.
ExperimentSystem experiment_system(const Fixture& fixture);

/// Per-run errors of one estimator; rows are runs, columns k = 0..n.
struct CurveSeries {
  EstimateMethod method = EstimateMethod::full_map;
  std::optional<PriorSetting> prior;  // none for ridge
  Eigen::MatrixXd rmse;
  Eigen::MatrixXd max_error;

  std::string label() const;
  Eigen::VectorXd mean_rmse() const { return rmse.colwise().mean().transpose(); }
  Eigen::VectorXd mean_max_error() const { return max_error.colwise().mean().transpose(); }
  /// Standard error of the mean RMSE at each k.
  Eigen::VectorXd rmse_se() const;
};

struct ErrorCurve {
  std::size_t runs = 0;
  std::size_t n = 0;
  std::vector<CurveSeries> series;  // MAP x {weakly, uninformative}, Gaussian x {weakly, uninformative}, ridge

  const CurveSeries& find(EstimateMethod m, std::optional<PriorSetting> p) const;
};

struct ErrorCurveConfig {
  std::size_t runs = 50;
  std::uint64_t seed = 0;
  /// Ridge penalty tau^2 / lambda; the default matches a N(0, 40) prior at tau = 1.
  double ridge_penalty = 1.0 / 40.0;
  MapOptions map;
  bool parallel = true;
};

/// For each of `runs` random orderings of the data rows, adds them one at a
/// time (balance rows always present) and records RMSE and maximum absolute
/// error against the truth for every estimator. Data values equal the truth.
ErrorCurve run_error_curve(const ExperimentSystem& system, const ErrorCurveConfig& config);

struct CoverageCell {
  std::size_t hits = 0;
  std::size_t runs = 0;
  double mean_width = 0.0;

  double coverage() const { return runs ? 100.0 * static_cast<double>(hits) / static_cast<double>(runs) : 0.0; }
  /// Binomial standard error in percentage points.
  double se() const;
};

struct CoverageTable {
  std::vector<std::string> variables;
  std::vector<std::size_t> batch_sizes;
  std::vector<PriorSetting> priors;
  std::size_t runs = 0;
  /// cells[prior][batch][variable]
  std::vector<std::vector<std::vector<CoverageCell>>> cells;

  const CoverageCell& cell(std::size_t prior, std::size_t batch, std::size_t var) const {
    return cells[prior][batch][var];
  }
};

struct CoverageConfig {
  std::size_t runs = 300;
  std::size_t batch = 5;
  std::uint64_t seed = 0;
  std::vector<PriorSetting> priors = {PriorSetting::weakly, PriorSetting::uninformative};
  SamplerConfig sampler;  // seed and parallel are set per fit
  double mass = 0.95;
  bool parallel = true;

  CoverageConfig() {
    sampler.chains = 2;
    sampler.draws = 1000;
    sampler.tune = 1000;
    sampler.gradient_check = false;
  }
};

/// Resamples every data row from its likelihood at the truth (balance rows
/// stay at 0), fits NUTS at cumulative batch sizes and tabulates how often
/// each variable's HDI contains its true value.
CoverageTable run_coverage(const ExperimentSystem& system, const CoverageConfig& config);

/// One synthetic dataset: data values drawn from the likelihood at the truth.
std::vector<ObservationRow> resample_data(const ExperimentSystem& system, std::uint64_t seed);

}  // namespace bmfa
