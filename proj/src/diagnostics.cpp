#include "bmfa/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bmfa/error.hpp"
#include "bmfa/normal_math.hpp"

namespace bmfa {

namespace {

// Two histogram peaks separated by a valley below a quarter of the smaller peak.
bool looks_multimodal(const std::vector<double>& sorted) {
  constexpr int kBins = 20;
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (!(hi > lo)) return false;
  std::vector<double> counts(kBins, 0.0);
  for (double x : sorted) {
    const int b = std::min(kBins - 1, static_cast<int>((x - lo) / (hi - lo) * kBins));
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  const double floor = 0.02 * static_cast<double>(sorted.size());
  double peak = 0.0;
  double valley = 0.0;
  bool descending = false;
  for (double c : counts) {
    if (!descending) {
      if (c >= peak) {
        peak = c;
      } else {
        descending = true;
        valley = c;
      }
    } else if (c < valley) {
      valley = c;
    } else if (c > valley && c >= floor && peak >= floor && valley < 0.25 * std::min(peak, c)) {
      return true;
    }
  }
  return false;
}

}  // namespace

HdiInterval hdi(std::span<const double> samples, double mass) {
  if (samples.size() < 50) throw ValidationError("HDI needs at least 50 samples");
  if (!(mass > 0.0 && mass <= 1.0)) throw ValidationError("HDI mass must lie in (0, 1]");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))));
  std::size_t best = 0;
  double best_width = x[k - 1] - x[0];
  for (std::size_t i = 1; i + k <= n; ++i) {
    const double w = x[i + k - 1] - x[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  HdiInterval out;
  out.lower = x[best];
  out.upper = x[best + k - 1];
  out.mass = mass;
  out.multimodal = looks_multimodal(x);
  return out;
}

HdiInterval hdi(const Eigen::VectorXd& samples, double mass) {
  return hdi(std::span<const double>(samples.data(), static_cast<std::size_t>(samples.size())), mass);
}

Eigen::MatrixXd posterior_predictive(const CompiledModel& model, const Eigen::MatrixXd& theta_draws,
                                     const Eigen::MatrixXd& row_tau, std::uint64_t seed, bool parallel) {
  const Eigen::Index draws = theta_draws.rows();
  const auto n = static_cast<Eigen::Index>(model.n());
  if (draws == 0) throw ValidationError("posterior predictive needs at least one draw");
  if (row_tau.cols() != n || (row_tau.rows() != 1 && row_tau.rows() != draws))
    throw ValidationError("noise matrix does not match the draws and rows");
  Eigen::MatrixXd out(draws, n);
  const double upper = model.likelihood_upper;
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index d = 0; d < draws; ++d) {
    math::Rng rng(math::mix_seed(seed, static_cast<std::uint64_t>(d)));
    std::normal_distribution<double> normal;
    const Eigen::VectorXd mean = row_means(model, theta_draws.row(d).transpose());
    const Eigen::Index tau_row = row_tau.rows() == 1 ? 0 : d;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double tau = row_tau(tau_row, r);
      if (model.family[static_cast<std::size_t>(r)] == Family::truncated_normal)
        out(d, r) = math::sample_truncated_normal(mean(r), tau, 0.0, upper, rng);
      else
        out(d, r) = mean(r) + tau * normal(rng);
    }
  }
  return out;
}

std::vector<PpcRow> ppc_pvalues(const Eigen::MatrixXd& replicates, const Eigen::VectorXd& observed,
                                const std::vector<std::string>& labels) {
  if (replicates.rows() < 100) throw ValidationError("posterior predictive p-values need at least 100 replicates");
  if (replicates.cols() != observed.size()) throw ValidationError("replicates and observations differ in row count");
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(observed.size()))
    throw ValidationError("one label per row is required");
  std::vector<PpcRow> out;
  const double draws = static_cast<double>(replicates.rows());
  for (Eigen::Index r = 0; r < observed.size(); ++r) {
    PpcRow row;
    row.label = labels.empty() ? "row" + std::to_string(r) : labels[static_cast<std::size_t>(r)];
    row.observed = observed(r);
    const Eigen::VectorXd col = replicates.col(r);
    row.replicate_hdi = hdi(col);
    row.pvalue = static_cast<double>((col.array() >= observed(r)).count()) / draws;
    row.extreme = row.pvalue < 0.05 || row.pvalue > 0.95;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<RankedVariable> rank_uncertainty(const Eigen::MatrixXd& draws, const std::vector<std::string>& names) {
  if (draws.rows() == 0) throw ValidationError("ranking needs at least one draw");
  if (names.size() != static_cast<std::size_t>(draws.cols())) throw ValidationError("one name per variable is required");
  std::vector<RankedVariable> out;
  for (Eigen::Index v = 0; v < draws.cols(); ++v) {
    const Eigen::VectorXd col = draws.col(v);
    out.push_back({names[static_cast<std::size_t>(v)], static_cast<std::size_t>(v), hdi(col).width()});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedVariable& a, const RankedVariable& b) { return a.width > b.width; });
  return out;
}

std::vector<RankedVariable> rank_uncertainty(const PosteriorSamples& samples) {
  return rank_uncertainty(samples.values, samples.names);
}

}  // namespace bmfa
