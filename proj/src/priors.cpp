#include "bmfa/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bmfa/error.hpp"
#include "bmfa/normal_math.hpp"

namespace bmfa {

namespace {

const double kSqrt40 = std::sqrt(40.0);

double signed_power_of_ten(double v) {
  const double mag = nearest_power_of_ten(std::abs(v));
  return v < 0.0 ? -mag : mag;
}

void check_report_size(const VariableIndex& index, std::span<const std::optional<double>> reported) {
  if (reported.size() != index.size())
    throw ValidationError("expected " + std::to_string(index.size()) + " reported values, got " +
                          std::to_string(reported.size()));
}

double report_value(const VariableIndex& index, std::size_t i, double v) {
  if (!std::isfinite(v) || v == 0.0)
    throw ValidationError("reported value for " + index.name(i) + " must be finite and non-zero");
  if (index.is_flow(i) && v < 0.0) throw ValidationError("reported flow " + index.name(i) + " is negative");
  return v;
}

}  // namespace

double PriorSpec::log_density(std::size_t i, double x) const {
  const VariablePrior& v = variables.at(i);
  const double zs = (x - v.mu) / v.sigma;
  const double base = math::log_std_normal_pdf(zs) - std::log(v.sigma);
  if (!is_flow(i)) return base;
  if (x < 0.0 || x > upper) return -std::numeric_limits<double>::infinity();
  return base - math::log_std_normal_mass(-v.mu / v.sigma, (upper - v.mu) / v.sigma);
}

void PriorSpec::validate() const {
  if (!(upper > 0.0)) throw ValidationError("prior upper bound L must be positive");
  if (stock_count > variables.size()) throw ValidationError("prior stock block larger than variable count");
  for (std::size_t i = 0; i < variables.size(); ++i) {
    const VariablePrior& v = variables[i];
    if (!(v.sigma > 0.0) || !std::isfinite(v.sigma) || !std::isfinite(v.mu))
      throw ValidationError("prior " + std::to_string(i) + ": sigma must be positive and finite");
    if (is_flow(i) && (v.mu < 0.0 || v.mu > upper))
      throw ValidationError("prior " + std::to_string(i) + ": flow mode must lie in [0, L]");
  }
}

double nearest_power_of_ten(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("nearest power of ten needs a positive value");
  int k = static_cast<int>(std::floor(std::log10(v)));
  if (std::pow(10.0, k) > v) --k;
  if (std::pow(10.0, k + 1) <= v) ++k;
  const double lo = std::pow(10.0, k);
  const double hi = std::pow(10.0, k + 1);
  return (v - lo <= hi - v) ? lo : hi;
}

PriorSpec elicit_aluminium_style(const VariableIndex& index, std::span<const std::optional<double>> reported,
                                 double upper) {
  check_report_size(index, reported);
  PriorSpec spec;
  spec.stock_count = index.stock_count();
  spec.upper = upper;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (reported[i]) {
      const double mu = signed_power_of_ten(report_value(index, i, *reported[i]));
      spec.variables.push_back({mu, std::max(kSqrt40 * std::abs(mu), 0.1)});
    } else {
      spec.variables.push_back({1.0, 10.0});
    }
  }
  spec.validate();
  return spec;
}

PriorSpec elicit_zinc_style(const VariableIndex& index, std::span<const std::optional<double>> reported,
                            const ZincOptions& options, double upper) {
  check_report_size(index, reported);
  if (!options.stock_signs.empty() && options.stock_signs.size() != index.stock_count())
    throw ValidationError("stock sign list does not match the number of stock variables");
  PriorSpec spec;
  spec.stock_count = index.stock_count();
  spec.upper = upper;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (options.mode == ZincMode::weakly) {
      if (!reported[i]) throw ValidationError("weakly informative prior needs a reported value for " + index.name(i));
      const double mu = signed_power_of_ten(report_value(index, i, *reported[i]));
      spec.variables.push_back({mu, std::max(std::min(4.0 * std::abs(mu), 4.0), 0.1)});
      continue;
    }
    double sign = 1.0;
    if (!index.is_flow(i)) {
      int s = options.stock_signs.empty() ? 0 : options.stock_signs[i];
      if (s == 0 && reported[i] && *reported[i] != 0.0) s = *reported[i] < 0.0 ? -1 : 1;
      if (s == 0) throw ValidationError("uninformative prior needs the sign of stock change " + index.name(i));
      sign = s < 0 ? -1.0 : 1.0;
    }
    spec.variables.push_back({sign * options.scale, kSqrt40});
  }
  spec.validate();
  return spec;
}

double mean_absolute_value(std::span<const std::optional<double>> reported) {
  if (reported.empty()) throw ValidationError("no reported values");
  double sum = 0.0;
  for (const auto& v : reported) {
    if (!v) throw ValidationError("mean absolute value needs every variable reported");
    sum += std::abs(*v);
  }
  return sum / static_cast<double>(reported.size());
}

NoisePriorSpec plug_in_noise(std::span<const ObservationRow> rows, NoiseMode mode, double balance_sd) {
  NoisePriorSpec spec;
  spec.mode = mode;
  for (const ObservationRow& row : rows) {
    double tau = 0.0;
    switch (row.kind) {
      case RowKind::mass_balance: tau = balance_sd; break;
      case RowKind::ratio: tau = std::max(0.1 * row.alpha, 0.01); break;
      default: tau = std::max(0.1 * std::abs(row.value), 0.1); break;
    }
    spec.tau.push_back(tau);
    if (mode == NoiseMode::inverse_gamma && row.kind != RowKind::mass_balance)
      spec.hyper.push_back(InverseGammaPrior{4.0, 3.0 * tau});
    else
      spec.hyper.push_back(std::nullopt);
  }
  return spec;
}

std::vector<ObservationRow> with_noise(std::span<const ObservationRow> rows, const NoisePriorSpec& noise) {
  if (noise.tau.size() != rows.size()) throw ValidationError("noise settings do not match the row count");
  std::vector<ObservationRow> out(rows.begin(), rows.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].noise_sd = noise.tau[i];
  return out;
}

}  // namespace bmfa
