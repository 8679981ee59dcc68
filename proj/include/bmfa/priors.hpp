#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bmfa/observations.hpp"
#include "bmfa/system_model.hpp"

namespace bmfa {

inline constexpr double kDefaultMassBound = 1e4;
inline constexpr double kZincMeanAbsolute = 3.6575;

struct VariablePrior {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Independent priors over theta: N(mu, sigma^2) for stocks and
/// N(mu, sigma^2) truncated to [0, upper] for flows.
struct PriorSpec {
  std::vector<VariablePrior> variables;
  std::size_t stock_count = 0;
  double upper = kDefaultMassBound;  // L

  std::size_t size() const { return variables.size(); }
  bool is_flow(std::size_t i) const { return i >= stock_count; }

  /// Normalized log-density of variable i at x (-inf outside the support).
  double log_density(std::size_t i, double x) const;

  /// Throws ValidationError unless sigma > 0, upper > 0 and flow modes lie in [0, upper].
  void validate() const;
};

enum class NoiseMode { plug_in, inverse_gamma };

struct InverseGammaPrior {
  double shape;  // a
  double scale;  // b
};

/// Per-row noise treatment, indexed like the input row list. Rows with a
/// hyperprior get their own sampled standard deviation; the rest stay fixed at tau.
struct NoisePriorSpec {
  NoiseMode mode = NoiseMode::plug_in;
  std::vector<double> tau;
  std::vector<std::optional<InverseGammaPrior>> hyper;
};

/// Nearest power of ten in linear distance; ties go to the smaller power.
double nearest_power_of_ten(double v);

/// mu = nearest power of ten of the report (sign kept), sigma = max(sqrt(40)|mu|, 0.1);
/// unreported variables get (1.0, 10.0).
PriorSpec elicit_aluminium_style(const VariableIndex& index, std::span<const std::optional<double>> reported,
                                 double upper = kDefaultMassBound);

enum class ZincMode { weakly, uninformative };

struct ZincOptions {
  ZincMode mode = ZincMode::weakly;
  double scale = kZincMeanAbsolute;
  /// Sign (+1/-1) of each stock change for the uninformative prior when no report
  /// is available; indexed like the stock block. Empty means "take it from the report".
  std::vector<int> stock_signs;
};

/// Weakly: mu = nearest power of ten of the report, sigma = max(min(4|mu|, 4), 0.1).
/// Uninformative: mu = +-scale for stocks, scale for flows, sigma = sqrt(40).
PriorSpec elicit_zinc_style(const VariableIndex& index, std::span<const std::optional<double>> reported,
                            const ZincOptions& options, double upper = kDefaultMassBound);

/// Mean absolute value of the reported values (all must be present).
double mean_absolute_value(std::span<const std::optional<double>> reported);

/// tau = max(0.1|Y|, 0.1) for stock/flow data, max(0.1|Y|, 0.01) for ratios,
/// 0.5 for balance rows. Inverse-gamma mode adds a = 4, b = 3 tau to data rows.
NoisePriorSpec plug_in_noise(std::span<const ObservationRow> rows, NoiseMode mode = NoiseMode::plug_in,
                             double balance_sd = 0.5);

/// Copy of `rows` with noise_sd taken from `noise.tau`.
std::vector<ObservationRow> with_noise(std::span<const ObservationRow> rows, const NoisePriorSpec& noise);

}  // namespace bmfa
