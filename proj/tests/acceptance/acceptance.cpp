// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "bmfa/diagnostics.hpp"
#include "bmfa/experiments.hpp"
#include "bmfa/fixtures.hpp"
#include "bmfa/gaussian_inference.hpp"
#include "bmfa/posterior_core.hpp"
#include "bmfa/sampler.hpp"
#include "../test_support.hpp"

using namespace bmfa;
using bmfa::testing::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... A>
std::string fmtn(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Design matrix of the nested example.
Outcome design_matrix() {
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture f = small_nested_system();
  const CompiledModel m = compile(f.graph, f.data);
  Eigen::MatrixXd expected(5, 12);
  expected << 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0,  //
      1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,          //
      0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1,          //
      0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0,          //
      0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0;
  Eigen::VectorXd y(5);
  y << 1.7, 11.6, 2.3, 10.4, 5.8;
  const double t = elapsed(t0);
  const bool same = m.X.rows() == 5 && m.X.cols() == 12 && m.X == expected && m.Y == y;
  return {same && t < 1.0, fmtn("X and Y %s, %.3f s", same ? "bit-exact" : "differ", t)};
}

// 2. Closed-form posterior against draws from the exact joint-Gaussian conditional.
Outcome gaussian_conjugacy() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2002);
  const int N = 100000;
  const double k = 4.0;
  std::size_t checked = 0, failed = 0;
  double worst = 0.0;
  std::normal_distribution<double> z(0.0, 1.0);
  for (int inst = 0; inst < 50; ++inst) {
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng() % 20);
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10);
    const Eigen::VectorXd mu = testing::normal_vector(rng, p, 2.0);
    const Eigen::MatrixXd S = testing::random_spd(rng, p);
    const Eigen::MatrixXd X = testing::normal_matrix(rng, n, p);
    const Eigen::VectorXd y = testing::normal_vector(rng, n, 3.0);
    const Eigen::VectorXd var = (testing::normal_vector(rng, n).array().abs() + 0.2).matrix();
    const GaussianPosterior g = gaussian_posterior(mu, S, X, y, var);

    // Condition the joint N((mu, X mu), [[S, S X'], [X S, X S X' + T]]) on Y = y.
    Eigen::MatrixXd joint(p + n, p + n);
    joint.topLeftCorner(p, p) = S;
    joint.topRightCorner(p, n) = S * X.transpose();
    joint.bottomLeftCorner(n, p) = X * S;
    joint.bottomRightCorner(n, n) = X * S * X.transpose() + Eigen::MatrixXd(var.asDiagonal());
    const Eigen::MatrixXd prec = joint.inverse();
    Eigen::MatrixXd cond_cov = prec.topLeftCorner(p, p).inverse();
    cond_cov = 0.5 * (cond_cov + cond_cov.transpose());
    const Eigen::VectorXd cond_mean = mu - cond_cov * prec.topRightCorner(p, n) * (y - X * mu);
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(cond_cov).matrixL();

    Eigen::MatrixXd E(N, p);
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i < N; ++i) E(i, j) = z(rng);
    Eigen::MatrixXd D = E * L.transpose();
    D.rowwise() += cond_mean.transpose();
    const Eigen::VectorXd mean = D.colwise().mean().transpose();
    D.rowwise() -= mean.transpose();
    const Eigen::MatrixXd cov = D.transpose() * D / static_cast<double>(N - 1);

    for (Eigen::Index i = 0; i < p; ++i) {
      const double se = std::sqrt(g.cov(i, i) / N);
      const double r = std::abs(mean(i) - g.mean(i)) / se;
      worst = std::max(worst, r);
      ++checked;
      failed += r > k;
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double se_c = std::sqrt((g.cov(i, i) * g.cov(j, j) + g.cov(i, j) * g.cov(i, j)) / N);
        const double rc = std::abs(cov(i, j) - g.cov(i, j)) / se_c;
        worst = std::max(worst, rc);
        ++checked;
        failed += rc > k;
      }
    }
  }
  const double t = elapsed(t0);
  return {failed == 0 && t < 30.0,
          fmtn("%zu/%zu entries beyond 4 SE, worst %.2f SE, %.1f s", failed, checked, worst, t)};
}

// 3. Empirical MSE of the posterior mean never exceeds the bound.
Outcome mse_bound_holds() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(3003);
  int held = 0;
  double worst_ratio = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng() % 19);
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10);
    const Eigen::VectorXd mu = testing::normal_vector(rng, p, 2.0);
    const Eigen::VectorXd theta = mu + testing::normal_vector(rng, p, 1.5);
    const Eigen::MatrixXd S = testing::random_spd(rng, p);
    const Eigen::MatrixXd X = testing::normal_matrix(rng, n, p);
    const double tau = 0.2 + std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const Eigen::VectorXd taus = Eigen::VectorXd::Constant(n, tau);
    const MseBoundReport b = mse_bound(theta, mu, S, X, taus);
    const double emp = empirical_mse(theta, mu, S, X, taus, 2000, rng());
    held += emp <= b.bound_value;
    worst_ratio = std::max(worst_ratio, emp / b.bound_value);
  }
  Rng r2(3004);
  const Eigen::VectorXd mu = testing::normal_vector(r2, 8);
  const MseBoundReport zero =
      mse_bound(mu, mu, testing::random_spd(r2, 8), testing::normal_matrix(r2, 4, 8), Eigen::VectorXd::Constant(4, 0.7));
  const double t = elapsed(t0);
  return {held == 100 && zero.bias_term == 0.0 && t < 60.0,
          fmtn("%d/100 within bound (max empirical/bound %.3f), zero-bias term %g, %.1f s", held, worst_ratio,
               zero.bias_term, t)};
}

// 4. Ridge equals the zero-mean isotropic Gaussian posterior mean.
Outcome ridge_equivalence() {
  Rng rng(4004);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng() % 20);
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10);
    const Eigen::MatrixXd X = testing::normal_matrix(rng, n, p);
    const Eigen::VectorXd y = testing::normal_vector(rng, n, 3.0);
    const double lambda = 0.05 + 20.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double tau2 = 0.1 + std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    const Eigen::VectorXd r = ridge_estimate(X, y, tau2 / lambda);
    const GaussianPosterior g = gaussian_posterior(Eigen::VectorXd::Zero(p), lambda * Eigen::MatrixXd::Identity(p, p),
                                                   X, y, Eigen::VectorXd::Constant(n, tau2));
    worst = std::max(worst, (r - g.mean).norm() / g.mean.norm());
  }
  return {worst < 1e-8, fmt("max relative error %.2e over 100 instances", worst)};
}

// 5. Gradient of the full unconstrained log posterior against central differences.
Outcome gradient_check() {
  Fixture f = small_nested_system();
  const SystemGraph& g = f.graph;
  std::vector<ObservationRow> rows = f.data;
  rows.push_back(ratio_row(g, "4", "1", 0.3, 0.05, RatioForm::nonlinear));
  rows.push_back(ratio_row(g, "4", "2", 0.4, 0.05, RatioForm::nonlinear));
  rows.push_back(ratio_row(g, "1", "5", 0.5, 0.05, RatioForm::linear));
  for (const auto& b : f.balance) rows.push_back(b);
  const NoisePriorSpec noise = plug_in_noise(rows, NoiseMode::inverse_gamma);
  const double upper = 40.0;  // small enough that the truncation normalizers matter
  const CompiledModel m = compile(g, with_noise(rows, noise), upper);
  f.prior.upper = upper;
  const LogPosterior lp(m, f.prior, noise);

  Rng rng(5005);
  std::normal_distribution<double> zs(0.0, 3.0), zf(-1.5, 1.0), zt(-1.0, 0.5);
  double worst = 0.0;
  std::size_t bad = 0;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(lp.dim()));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      z(i) = ui < f.prior.stock_count ? zs(rng) : ui < lp.theta_dim() ? zf(rng) : zt(rng);
    }
    Eigen::VectorXd grad;
    lp.log_density(z, grad);
    const Eigen::VectorXd fd = testing::fd_gradient(lp, z, 1e-6);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double e = testing::rel_error(grad(i), fd(i));
      worst = std::max(worst, e);
      bad += e >= 1e-5;
    }
  }
  return {bad == 0, fmtn("%zu components over 1e-5 in %zu-dim model at 100 points, worst %.2e", bad, lp.dim(), worst)};
}

// 6. NUTS on the conjugate configuration against the closed form.
Outcome sampler_validation() {
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture f = small_nested_conjugate();
  const CompiledModel m = f.compile();
  const LogPosterior lp(m, f.prior, plug_in_noise(f.rows()));
  const GaussianPosterior g = gaussian_posterior(m, f.prior);
  SamplerConfig c;
  c.chains = 2;
  c.draws = 2000;
  c.tune = 1000;
  c.seed = 6006;
  const PosteriorSamples s = nuts_sample(lp, c);
  const Eigen::VectorXd mean = s.mean();
  const Eigen::VectorXd sd = s.sd();
  double worst_mean = 0.0, worst_sd = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    worst_mean = std::max(worst_mean, std::abs(mean(i) - g.mean(i)) / s.mcse(i));
    worst_sd = std::max(worst_sd, std::abs(sd(i) / std::sqrt(g.cov(i, i)) - 1.0));
  }
  const double rhat = s.rhat->maxCoeff();
  const double t = elapsed(t0);
  const bool ok = worst_mean <= 4.0 && worst_sd <= 0.05 && rhat < 1.01 && s.divergences() == 0 && t < 120.0;
  return {ok, fmtn("max |mean error| %.2f MCSE, max sd error %.1f%%, max R-hat %.4f, %zu divergences, %.1f s",
                   worst_mean, 100.0 * worst_sd, rhat, s.divergences(), t)};
}

// 7. The imbalanced remelter stands out in the posterior predictive check.
Outcome ppc_detection() {
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture f = remelting_imbalance();
  const CompiledModel m = f.compile();
  const LogPosterior lp(m, f.prior, plug_in_noise(f.rows()));
  std::size_t target = m.labels.size();
  for (std::size_t r = 0; r < m.labels.size(); ++r)
    if (m.labels[r] == "balance:Remelting") target = r;
  if (target == m.labels.size()) return {false, "no balance row for Remelting"};
  int wins = 0;
  double mean_p = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    SamplerConfig c;
    c.chains = 2;
    c.draws = 1000;
    c.tune = 1000;
    c.seed = 7000 + static_cast<std::uint64_t>(rep);
    c.gradient_check = rep == 0;
    const PosteriorSamples s = nuts_sample(lp, c);
    const Eigen::MatrixXd reps = posterior_predictive(m, s.values, m.tau.transpose(), c.seed);
    const std::vector<PpcRow> rows = ppc_pvalues(reps, m.Y, m.labels);
    bool strict = true;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (r != target && m.kind[r] == RowKind::mass_balance)
        strict = strict && rows[target].extremeness() > rows[r].extremeness();
    wins += strict;
    mean_p += rows[target].pvalue / 100.0;
  }
  const double t = elapsed(t0);
  return {wins >= 95, fmtn("remelter balance most extreme in %d/100 repetitions (mean p %.3f), %.1f s", wins, mean_p, t)};
}

// 8. Shortest-window HDI.
Outcome hdi_correctness() {
  Rng rng(8008);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd x(1000000);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);
  const HdiInterval h = hdi(x, 0.95);
  const double off = std::max(std::abs(h.lower + 1.96), std::abs(h.upper - 1.96));

  std::gamma_distribution<double> gam(1.5, 2.0);
  int minimal = 0, cases = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 50 + static_cast<std::size_t>(rng() % 451);
    std::vector<double> v(n);
    for (double& e : v) e = t % 2 ? gam(rng) : z(rng);
    for (double mass : {0.5, 0.8, 0.95}) {
      const HdiInterval got = hdi(v, mass);
      std::vector<double> s = v;
      std::sort(s.begin(), s.end());
      const auto k = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n)));
      double best = INFINITY;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
          if (j - i + 1 >= k) best = std::min(best, s[j] - s[i]);
      const auto inside = std::count_if(v.begin(), v.end(), [&](double e) { return e >= got.lower && e <= got.upper; });
      ++cases;
      minimal += got.width() == best && static_cast<std::size_t>(inside) >= k;
    }
  }
  return {off <= 0.02 && minimal == cases,
          fmtn("[%.4f, %.4f] on 1e6 normal draws, brute-force minimal in %d/%d cases", h.lower, h.upper, minimal, cases)};
}

// 9. Coverage pattern on the zinc-like fixture with two mis-centred priors.
Outcome coverage_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture f = zinc_like_misfit();
  const ExperimentSystem sys = experiment_system(f);
  CoverageConfig c;
  c.runs = 300;
  c.batch = 5;
  c.seed = 9009;
  c.priors = {PriorSetting::weakly};
  c.sampler.chains = 2;
  c.sampler.draws = 1000;
  c.sampler.tune = 1000;
  const CoverageTable table = run_coverage(sys, c);

  const std::vector<std::string> misfit = zinc_like_misfit_variables();
  // Index of the batch that first contains each variable's observation.
  auto data_batch = [&](const std::string& name) {
    for (std::size_t i = 0; i < sys.data.size(); ++i)
      if (sys.data[i].label == name) return i / c.batch;
    return table.batch_sizes.size();
  };
  bool ok = true;
  std::ostringstream msg;
  double lowest = 100.0;
  std::string lowest_at;
  for (std::size_t v = 0; v < table.variables.size(); ++v) {
    const std::string& name = table.variables[v];
    const bool is_misfit = std::find(misfit.begin(), misfit.end(), name) != misfit.end();
    const std::size_t arrives = data_batch(name);
    for (std::size_t b = 0; b < table.batch_sizes.size(); ++b) {
      const double cov = table.cell(0, b, v).coverage();
      if (is_misfit) {
        if (b == 0 && arrives > 0 && !(cov < 50.0)) {
          ok = false;
          msg << " " << name << "@5=" << cov;
        }
        if (b >= arrives && !(cov > 90.0)) {
          ok = false;
          msg << " " << name << "@" << table.batch_sizes[b] << "=" << cov;
        }
        if (b == 0 && arrives == 0) {
          ok = false;
          msg << " " << name << " observed in the first batch";
        }
      } else {
        if (cov < lowest) {
          lowest = cov;
          lowest_at = name + "@" + std::to_string(table.batch_sizes[b]);
        }
        if (cov < 90.0 || cov > 100.0) {
          ok = false;
          msg << " " << name << "@" << table.batch_sizes[b] << "=" << cov;
        }
      }
    }
  }
  std::ostringstream mis;
  for (const std::string& name : misfit) {
    const auto v = static_cast<std::size_t>(std::find(table.variables.begin(), table.variables.end(), name) -
                                            table.variables.begin());
    mis << " " << name << ":";
    for (std::size_t b = 0; b < table.batch_sizes.size(); ++b)
      mis << (b ? "->" : "") << fmt("%.1f", table.cell(0, b, v).coverage());
  }
  const double t = elapsed(t0);
  ok = ok && t < 1800.0;
  std::string detail = fmtn("lowest regular coverage %.1f%% (", lowest) + lowest_at + ");" + mis.str() +
                       fmtn("; %.0f s", t);
  if (!msg.str().empty()) detail += "; out of band:" + msg.str();
  return {ok, detail};
}

// 10. Error curves over random orderings.
Outcome error_curve_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentSystem sys = experiment_system(zinc_like());
  ErrorCurveConfig c;
  c.runs = 50;
  c.seed = 10010;
  const ErrorCurve e = run_error_curve(sys, c);
  bool monotone = true;
  std::string where;
  for (const CurveSeries& s : e.series) {
    const auto R = static_cast<double>(s.rmse.rows());
    for (Eigen::Index k = 0; k + 1 < s.rmse.cols(); ++k) {
      // Increment in mean RMSE against the Monte-Carlo SE of the paired increments.
      const Eigen::VectorXd d = s.rmse.col(k + 1) - s.rmse.col(k);
      const double mean = d.mean();
      const double sd = R > 1 ? std::sqrt((d.array() - mean).square().sum() / (R - 1.0)) : 0.0;
      if (mean > 2.0 * sd / std::sqrt(R) + 1e-12) {
        monotone = false;
        where += " " + s.label() + "@k=" + std::to_string(k + 1);
      }
    }
  }
  const double ridge = e.find(EstimateMethod::ridge, std::nullopt).mean_rmse()(0);
  bool ordered = true;
  std::string starts;
  for (EstimateMethod m : {EstimateMethod::full_map, EstimateMethod::gaussian_mean}) {
    const double w = e.find(m, PriorSetting::weakly).mean_rmse()(0);
    const double u = e.find(m, PriorSetting::uninformative).mean_rmse()(0);
    ordered = ordered && w < u && u < ridge;
    starts += fmtn(" %s %.2f < %.2f", to_string(m).c_str(), w, u);
  }
  const double t = elapsed(t0);
  std::string detail = std::string(monotone ? "non-increasing" : "increase beyond 2 SE:" + where) +
                       "; zero-data RMSE" + starts + fmtn(" < ridge %.2f; %.1f s", ridge, t);
  return {monotone && ordered, detail};
}

// 11. Every CLI command is byte-reproducible for a fixed seed.
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cli = BMFA_CLI_PATH;
  const std::string project = std::string(BMFA_DATA_DIR) + "/zinc_like.yaml";
  const fs::path root = fs::temp_directory_path() / ("bmfa_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  struct Command {
    std::string name, subcommand, flags;
  };
  const std::vector<Command> commands = {
      {"validate", "validate", ""},
      {"elicit", "elicit", ""},
      {"fit-gaussian", "fit-gaussian", ""},
      {"fit-map", "fit-map", ""},
      {"sample", "sample", "--seed 11 --chains 2 --draws 300 --tune 300"},
      {"ppc", "ppc", "--seed 12"},
      {"rank", "rank", ""},
      {"bound", "bound", "--seed 13 --mc-draws 500"},
      {"rmse", "experiment rmse", "--seed 14 --runs 3"},
      {"coverage", "experiment coverage", "--seed 15 --runs 2 --draws 200 --tune 200"},
  };
  std::size_t files = 0;
  std::string failures;
  for (const char* pass : {"a", "b"}) {
    const fs::path out = root / pass;
    fs::create_directories(out);
    for (const Command& c : commands) {
      const std::string cmd = "\"" + cli + "\" " + c.subcommand + " \"" + project + "\" " + c.flags + " --out \"" +
                              out.string() + "\" > \"" + (out / (c.name + ".stdout")).string() + "\" 2>/dev/null";
      if (std::system(cmd.c_str()) != 0) failures += " " + c.name + "(exit)";
    }
  }
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    const fs::path other = root / "b" / entry.path().filename();
    ++files;
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) failures += " " + entry.path().filename().string();
  }
  std::size_t expected = 0;
  for (const auto& entry : fs::directory_iterator(root / "b")) {
    (void)entry;
    ++expected;
  }
  if (expected != files) failures += " (file sets differ)";
  fs::remove_all(root);
  const double t = elapsed(t0);
  return {failures.empty() && files > commands.size(),
          fmtn("%zu output files from %zu commands compared", files, commands.size()) +
              (failures.empty() ? std::string(", all identical") : ", mismatched:" + failures) + fmtn(", %.1f s", t)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"design matrix golden", design_matrix},
      {"Gaussian conjugacy oracle", gaussian_conjugacy},
      {"MSE bound", mse_bound_holds},
      {"ridge equivalence", ridge_equivalence},
      {"gradient correctness", gradient_check},
      {"sampler validation", sampler_validation},
      {"PPC discrepancy detection", ppc_detection},
      {"HDI correctness", hdi_correctness},
      {"coverage trend", coverage_trend},
      {"error-curve trend", error_curve_trend},
      {"determinism", cli_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
