#include "bmfa/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "bmfa/diagnostics.hpp"
#include "bmfa/error.hpp"
#include "bmfa/gaussian_inference.hpp"
#include "bmfa/normal_math.hpp"
#include "bmfa/posterior_core.hpp"

namespace bmfa {

namespace {

constexpr std::uint64_t kSamplerStream = 0x5bd1e995u;

double row_mean_at(const ObservationRow& row, const Eigen::VectorXd& theta) {
  if (!row.is_linear()) {
    RatioSpec spec{row.numerator, row.denominator, row.alpha};
    return eval_ratio(theta, spec);
  }
  double m = 0.0;
  for (const Term& t : row.terms) m += t.coeff * theta(static_cast<Eigen::Index>(t.index));
  return m;
}

std::vector<ObservationRow> assemble(const ExperimentSystem& s, const std::vector<ObservationRow>& data,
                                     const std::vector<std::size_t>& order, std::size_t k) {
  std::vector<ObservationRow> rows;
  rows.reserve(k + s.balance.size());
  for (std::size_t i = 0; i < k; ++i) rows.push_back(data[order[i]]);
  rows.insert(rows.end(), s.balance.begin(), s.balance.end());
  return rows;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::string to_string(PriorSetting p) { return p == PriorSetting::weakly ? "weakly" : "uninformative"; }

std::string to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::full_map: return "map";
    case EstimateMethod::gaussian_mean: return "gaussian";
    case EstimateMethod::ridge: return "ridge";
  }
  return "?";
}

std::string CurveSeries::label() const {
  return prior ? to_string(method) + "-" + to_string(*prior) : to_string(method);
}

Eigen::VectorXd CurveSeries::rmse_se() const {
  const double r = static_cast<double>(rmse.rows());
  const Eigen::RowVectorXd mu = rmse.colwise().mean();
  const Eigen::RowVectorXd var = (rmse.rowwise() - mu).array().square().colwise().sum() / std::max(1.0, r - 1.0);
  return (var.array() / r).sqrt().transpose();
}

const CurveSeries& ErrorCurve::find(EstimateMethod m, std::optional<PriorSetting> p) const {
  for (const CurveSeries& s : series)
    if (s.method == m && s.prior == p) return s;
  throw ValidationError("error curve has no series for that estimator");
}

double CoverageCell::se() const {
  if (runs == 0) return 0.0;
  const double c = static_cast<double>(hits) / static_cast<double>(runs);
  return 100.0 * std::sqrt(c * (1.0 - c) / static_cast<double>(runs));
}

ExperimentSystem experiment_system(const Fixture& fixture) {
  if (fixture.truth.size() == 0) throw ValidationError("fixture " + fixture.name + " has no ground truth");
  ExperimentSystem s;
  s.graph = fixture.graph;
  s.truth = fixture.truth;
  s.data = fixture.data;
  s.balance = fixture.balance;
  s.weakly = fixture.prior;
  s.likelihood_upper = fixture.likelihood_upper;
  std::vector<std::optional<double>> reports;
  for (Eigen::Index i = 0; i < s.truth.size(); ++i) reports.emplace_back(s.truth(i));
  s.uninformative = elicit_zinc_style(
      s.graph.index(), reports, ZincOptions{ZincMode::uninformative, mean_absolute_value(reports), {}},
      fixture.prior.upper);
  return s;
}

std::vector<ObservationRow> resample_data(const ExperimentSystem& system, std::uint64_t seed) {
  math::Rng rng(seed);
  std::normal_distribution<double> normal;
  std::vector<ObservationRow> out = system.data;
  for (ObservationRow& row : out) {
    const double mean = row_mean_at(row, system.truth);
    if (row.family == Family::truncated_normal)
      row.value = math::sample_truncated_normal(mean, row.noise_sd, 0.0, system.likelihood_upper, rng);
    else
      row.value = mean + row.noise_sd * normal(rng);
  }
  return out;
}

ErrorCurve run_error_curve(const ExperimentSystem& system, const ErrorCurveConfig& config) {
  if (config.runs < 1) throw ValidationError("error curve needs at least one run");
  const std::size_t n = system.n();
  const Eigen::Index cols = static_cast<Eigen::Index>(n + 1);
  const auto runs = static_cast<Eigen::Index>(config.runs);

  ErrorCurve curve;
  curve.runs = config.runs;
  curve.n = n;
  for (PriorSetting p : {PriorSetting::weakly, PriorSetting::uninformative})
    curve.series.push_back({EstimateMethod::full_map, p, {}, {}});
  for (PriorSetting p : {PriorSetting::weakly, PriorSetting::uninformative})
    curve.series.push_back({EstimateMethod::gaussian_mean, p, {}, {}});
  curve.series.push_back({EstimateMethod::ridge, std::nullopt, {}, {}});
  for (CurveSeries& s : curve.series) {
    s.rmse.resize(runs, cols);
    s.max_error.resize(runs, cols);
  }

  // Reported values are the ground truth.
  std::vector<ObservationRow> data = system.data;
  for (ObservationRow& row : data) row.value = row_mean_at(row, system.truth);

  std::vector<std::exception_ptr> errors(config.runs);
#pragma omp parallel for schedule(dynamic) if (config.parallel)
  for (Eigen::Index r = 0; r < runs; ++r) {
    try {
      math::Rng rng(math::mix_seed(config.seed, static_cast<std::uint64_t>(r)));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t k = 0; k <= n; ++k) {
        const std::vector<ObservationRow> rows = assemble(system, data, order, k);
        const CompiledModel model = compile(system.graph, rows, system.likelihood_upper);
        std::vector<Eigen::VectorXd> estimates;
        for (PriorSetting p : {PriorSetting::weakly, PriorSetting::uninformative}) {
          const LogPosterior post(model, system.prior(p), NoisePriorSpec{});
          estimates.push_back(map_estimate(post, config.map).mode.head(static_cast<Eigen::Index>(system.p())));
        }
        for (PriorSetting p : {PriorSetting::weakly, PriorSetting::uninformative})
          estimates.push_back(gaussian_posterior(model, system.prior(p)).mean);
        estimates.push_back(ridge_estimate(model.X, model.Y.head(model.X.rows()), config.ridge_penalty));
        for (std::size_t s = 0; s < estimates.size(); ++s) {
          const Eigen::VectorXd err = estimates[s] - system.truth;
          curve.series[s].rmse(r, static_cast<Eigen::Index>(k)) = std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
          curve.series[s].max_error(r, static_cast<Eigen::Index>(k)) = err.cwiseAbs().maxCoeff();
        }
      }
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return curve;
}

CoverageTable run_coverage(const ExperimentSystem& system, const CoverageConfig& config) {
  if (config.runs < 1) throw ValidationError("coverage study needs at least one run");
  if (config.batch < 1) throw ValidationError("batch size must be positive");
  if (config.priors.empty()) throw ValidationError("coverage study needs at least one prior setting");
  const std::size_t n = system.n();
  const std::size_t p = system.p();

  CoverageTable table;
  table.variables = system.graph.index().names();
  table.priors = config.priors;
  table.runs = config.runs;
  for (std::size_t b = config.batch; b < n + config.batch; b += config.batch) table.batch_sizes.push_back(std::min(b, n));
  if (table.batch_sizes.empty()) table.batch_sizes.push_back(0);
  const std::size_t nb = table.batch_sizes.size();
  const std::size_t np = config.priors.size();

  std::vector<std::vector<ObservationRow>> datasets(config.runs);
  for (std::size_t r = 0; r < config.runs; ++r) datasets[r] = resample_data(system, math::mix_seed(config.seed, r));
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});

  // Work item = (prior, run, batch), laid out in that nesting order.
  const std::size_t items = np * config.runs * nb;
  std::vector<std::vector<char>> hit(items);
  std::vector<Eigen::VectorXd> width(items);
  std::vector<std::exception_ptr> errors(items);
#pragma omp parallel for schedule(dynamic) if (config.parallel)
  for (long w = 0; w < static_cast<long>(items); ++w) {
    const auto item = static_cast<std::size_t>(w);
    const std::size_t pi = item / (config.runs * nb);
    const std::size_t r = (item / nb) % config.runs;
    const std::size_t b = item % nb;
    try {
      const std::vector<ObservationRow> rows = assemble(system, datasets[r], identity, table.batch_sizes[b]);
      const CompiledModel model = compile(system.graph, rows, system.likelihood_upper);
      const LogPosterior post(model, system.prior(config.priors[pi]), NoisePriorSpec{});
      SamplerConfig sc = config.sampler;
      sc.seed = math::mix_seed(config.seed ^ kSamplerStream, item);
      sc.parallel = false;
      const PosteriorSamples samples = nuts_sample(post, sc);
      hit[item].resize(p);
      width[item].resize(static_cast<Eigen::Index>(p));
      for (std::size_t v = 0; v < p; ++v) {
        const HdiInterval h = hdi(samples.column(v), config.mass);
        const double t = system.truth(static_cast<Eigen::Index>(v));
        hit[item][v] = (h.lower <= t && t <= h.upper) ? 1 : 0;
        width[item](static_cast<Eigen::Index>(v)) = h.width();
      }
    } catch (const std::exception& e) {
      errors[item] = std::make_exception_ptr(NumericalError("coverage fit (" + to_string(config.priors[pi]) +
                                                            ", run " + std::to_string(r) + ", " +
                                                            std::to_string(table.batch_sizes[b]) +
                                                            " data rows): " + e.what()));
    }
  }
  rethrow_first(errors);

  table.cells.assign(np, std::vector<std::vector<CoverageCell>>(nb, std::vector<CoverageCell>(p)));
  for (std::size_t item = 0; item < items; ++item) {
    const std::size_t pi = item / (config.runs * nb);
    const std::size_t b = item % nb;
    for (std::size_t v = 0; v < p; ++v) {
      CoverageCell& c = table.cells[pi][b][v];
      c.hits += static_cast<std::size_t>(hit[item][v]);
      c.runs += 1;
      c.mean_width += width[item](static_cast<Eigen::Index>(v));
    }
  }
  for (auto& per_prior : table.cells)
    for (auto& per_batch : per_prior)
      for (CoverageCell& c : per_batch) c.mean_width /= static_cast<double>(c.runs);
  return table;
}

}  // namespace bmfa
