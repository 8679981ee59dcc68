// Command-line front end: validate projects, fit, diagnose and run experiments.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmfa/diagnostics.hpp"
#include "bmfa/error.hpp"
#include "bmfa/experiments.hpp"
#include "bmfa/gaussian_inference.hpp"
#include "bmfa/project.hpp"
#include "bmfa/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bmfa;

namespace {

struct Options {
  std::string project;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains;
  std::optional<std::size_t> draws;
  std::optional<std::size_t> tune;
  std::optional<double> target_accept;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> batch;
  int mc_draws = 2000;
};

std::string num(double v) { return format_double(v); }

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw ValidationError("--out is required for this command");
  fs::create_directories(o.out);
  return o.out;
}

SamplerConfig sampler_config(const Project& p, const Options& o) {
  SamplerConfig c = p.sampler;
  if (o.seed) c.seed = *o.seed;
  if (o.chains) c.chains = *o.chains;
  if (o.draws) c.draws = *o.draws;
  if (o.tune) c.tune = *o.tune;
  if (o.target_accept) c.target_accept = *o.target_accept;
  c.validate();
  return c;
}

json header_json(const AssembledModel& m, const char* kind) {
  return json{{"kind", kind}, {"units", m.units}, {"variables", m.graph.index().names()}};
}

int cmd_validate(const Options& o) {
  AssembledModel m = assemble(load_project(o.project));
  std::cout << "p=" << m.graph.index().size() << " variables, " << m.data_count << " data rows, "
            << m.balance_count() << " balance rows\n";
  for (std::size_t i = m.data_count; i < m.rows.size(); ++i) {
    const ObservationRow& row = m.rows[i];
    std::cout << "  " << row.label << ": " << m.graph.inflows(row.process).size() << " inflows, "
              << m.graph.outflows(row.process).size() << " outflows, stock "
              << (m.graph.has_stock(row.process) ? "yes" : "no") << "\n";
  }
  if (!o.out.empty()) {
    const CompiledModel& c = m.compiled;
    std::vector<std::string> header = {"row", "kind"};
    for (const auto& n : m.graph.index().names()) header.push_back(n);
    header.push_back("value");
    header.push_back("sd");
    CsvTable table(header);
    for (std::size_t r = 0; r < c.n_linear(); ++r) {
      std::vector<std::string> fields = {c.labels[r], to_string(c.kind[r])};
      for (std::size_t j = 0; j < c.p; ++j)
        fields.push_back(num(c.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j))));
      fields.push_back(num(c.Y(static_cast<Eigen::Index>(r))));
      fields.push_back(num(c.tau(static_cast<Eigen::Index>(r))));
      table.row(fields);
    }
    table.write(out_dir(o) / "design_matrix.csv");
  }
  return 0;
}

int cmd_elicit(const Options& o) {
  AssembledModel m = assemble(load_project(o.project));
  CsvTable table({"variable", "kind", "mu", "sigma", "lower", "upper"});
  const VariableIndex& index = m.graph.index();
  for (std::size_t i = 0; i < index.size(); ++i) {
    const bool flow = index.is_flow(i);
    table.row({index.name(i), flow ? "flow" : "stock", num(m.prior.variables[i].mu), num(m.prior.variables[i].sigma),
               flow ? "0" : "-inf", flow ? num(m.prior.upper) : "inf"});
  }
  if (o.out.empty())
    std::cout << table.str();
  else
    table.write(out_dir(o) / "priors.csv");
  return 0;
}

int cmd_fit_gaussian(const Options& o) {
  AssembledModel m = assemble(load_project(o.project));
  GaussianPosterior g = gaussian_posterior(m.compiled, m.prior);
  std::vector<double> neg = negative_mass(g, m.prior.stock_count);
  json j = header_json(m, "gaussian");
  j["mean"] = vec_json(g.mean);
  j["sd"] = vec_json(g.cov.diagonal().cwiseMax(0.0).cwiseSqrt());
  j["cov"] = mat_json(g.cov);
  json nm = json::array();
  const VariableIndex& index = m.graph.index();
  for (std::size_t i = index.stock_count(); i < index.size(); ++i)
    nm.push_back({{"variable", index.name(i)}, {"probability", neg[i]}});
  j["negative_mass"] = nm;
  write_json(out_dir(o) / "gaussian.json", j);
  return 0;
}

int cmd_fit_map(const Options& o) {
  AssembledModel m = assemble(load_project(o.project));
  LogPosterior lp = m.posterior();
  MapResult r = map_estimate(lp);
  const std::size_t p = lp.theta_dim();
  Eigen::VectorXd theta = r.mode.head(static_cast<Eigen::Index>(p));
  Eigen::VectorXd fitted = row_means(m.compiled, theta);
  Eigen::VectorXd tau = lp.row_tau(r.z);

  json j = header_json(m, "map");
  j["parameters"] = lp.parameter_names();
  j["mode"] = vec_json(r.mode);
  j["log_density"] = r.log_density;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["grad_norm"] = r.grad_norm;
  json res = json::array();
  for (std::size_t i = 0; i < m.compiled.n(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    res.push_back({{"row", m.compiled.labels[i]},
                   {"kind", to_string(m.compiled.kind[i])},
                   {"observed", m.compiled.Y(k)},
                   {"fitted", fitted(k)},
                   {"residual", m.compiled.Y(k) - fitted(k)},
                   {"standardized", (m.compiled.Y(k) - fitted(k)) / tau(k)}});
  }
  j["residuals"] = res;
  write_json(out_dir(o) / "map.json", j);
  if (!r.converged) std::cerr << "warning: optimizer stopped with gradient norm " << r.grad_norm << "\n";
  return 0;
}

std::optional<HdiInterval> safe_hdi(const Eigen::VectorXd& v) {
  if (v.size() < 50) return std::nullopt;
  return hdi(v, 0.95);
}

int cmd_sample(const Options& o) {
  Project project = load_project(o.project);
  AssembledModel m = assemble(project);
  SamplerConfig config = sampler_config(project, o);
  LogPosterior lp = m.posterior();
  PosteriorSamples s = nuts_sample(lp, config);
  const fs::path dir = out_dir(o);

  std::vector<std::string> header = {"chain", "draw"};
  header.insert(header.end(), s.names.begin(), s.names.end());
  CsvTable draws(header);
  CsvTable stats({"chain", "draw", "divergent", "tree_depth", "n_leapfrog", "step_size", "accept_stat", "energy"});
  CsvTable longf({"variable", "chain", "draw", "value"});
  for (std::size_t c = 0; c < s.chains; ++c) {
    for (std::size_t d = 0; d < s.draws; ++d) {
      std::vector<std::string> fields = {std::to_string(c), std::to_string(d)};
      for (std::size_t v = 0; v < s.dim; ++v) fields.push_back(num(s.value(c, d, v)));
      draws.row(fields);
      const DrawStats& st = s.stats[c * s.draws + d];
      stats.row({std::to_string(c), std::to_string(d), st.divergent ? "1" : "0", std::to_string(st.tree_depth),
                 std::to_string(st.n_leapfrog), num(st.step_size), num(st.accept_stat), num(st.energy)});
    }
  }
  for (std::size_t v = 0; v < s.dim; ++v)
    for (std::size_t c = 0; c < s.chains; ++c)
      for (std::size_t d = 0; d < s.draws; ++d)
        longf.row({s.names[v], std::to_string(c), std::to_string(d), num(s.value(c, d, v))});
  draws.write(dir / "draws.csv");
  stats.write(dir / "sampler_stats.csv");
  longf.write(dir / "draws_long.csv");

  CsvTable summary({"variable", "mean", "sd", "hdi_lo", "hdi_hi", "rhat", "ess", "mcse"});
  Eigen::VectorXd mean = s.mean();
  Eigen::VectorXd sd = s.sd();
  for (std::size_t v = 0; v < s.dim; ++v) {
    const auto k = static_cast<Eigen::Index>(v);
    auto h = safe_hdi(s.column(v));
    summary.row({s.names[v], num(mean(k)), num(sd(k)), h ? num(h->lower) : "nan", h ? num(h->upper) : "nan",
                 s.rhat ? num((*s.rhat)(k)) : "nan", num(s.ess(k)), num(s.mcse(k))});
  }
  summary.write(dir / "summary.csv");

  json j = header_json(m, "sample");
  j["parameters"] = s.names;
  j["chains"] = s.chains;
  j["draws"] = s.draws;
  j["tune"] = config.tune;
  j["seed"] = config.seed;
  j["target_accept"] = config.target_accept;
  j["divergences"] = s.divergences();
  j["step_sizes"] = s.step_sizes;
  json metric = json::array();
  for (const auto& im : s.inv_metric) metric.push_back(vec_json(im));
  j["inv_metric"] = metric;
  j["max_rhat"] = s.rhat ? json(s.rhat->maxCoeff()) : json(nullptr);
  j["min_ess"] = s.ess.minCoeff();
  write_json(dir / "stats.json", j);
  if (s.divergences() > 0) std::cerr << "warning: " << s.divergences() << " divergent transitions\n";
  return 0;
}

/// Posterior draws saved by `sample`, checked against the project's parameters.
DrawTable load_fit(const LogPosterior& lp, const Options& o) {
  DrawTable t = read_draws(fs::path(out_dir(o)) / "draws.csv");
  if (t.names != lp.parameter_names())
    throw ValidationError("draws.csv does not match the project's parameters; rerun sample");
  return t;
}

int cmd_ppc(const Options& o) {
  Project project = load_project(o.project);
  AssembledModel m = assemble(project);
  LogPosterior lp = m.posterior();
  DrawTable t = load_fit(lp, o);
  const auto p = static_cast<Eigen::Index>(lp.theta_dim());
  const Eigen::MatrixXd theta = t.values.leftCols(p);
  Eigen::MatrixXd tau = m.compiled.tau.transpose();
  if (lp.tau_dim() > 0) {
    tau = m.compiled.tau.transpose().replicate(t.values.rows(), 1);
    for (std::size_t k = 0; k < lp.tau_dim(); ++k)
      tau.col(static_cast<Eigen::Index>(lp.free_tau_rows()[k])) = t.values.col(p + static_cast<Eigen::Index>(k));
  }
  const std::uint64_t seed = o.seed.value_or(project.sampler.seed);
  Eigen::MatrixXd reps = posterior_predictive(m.compiled, theta, tau, seed);
  std::vector<PpcRow> rows = ppc_pvalues(reps, m.compiled.Y, m.compiled.labels);

  CsvTable table({"row", "observed", "hdi_lo", "hdi_hi", "pvalue", "extreme"});
  json j = header_json(m, "ppc");
  json arr = json::array();
  for (const PpcRow& r : rows) {
    table.row({r.label, num(r.observed), num(r.replicate_hdi.lower), num(r.replicate_hdi.upper), num(r.pvalue),
               r.extreme ? "1" : "0"});
    arr.push_back({{"row", r.label},
                   {"observed", r.observed},
                   {"hdi_lo", r.replicate_hdi.lower},
                   {"hdi_hi", r.replicate_hdi.upper},
                   {"pvalue", r.pvalue},
                   {"extreme", r.extreme}});
  }
  j["seed"] = seed;
  j["replicates"] = reps.rows();
  j["rows"] = arr;
  const fs::path dir = out_dir(o);
  table.write(dir / "ppc.csv");
  write_json(dir / "ppc.json", j);
  return 0;
}

int cmd_rank(const Options& o) {
  AssembledModel m = assemble(load_project(o.project));
  LogPosterior lp = m.posterior();
  DrawTable t = load_fit(lp, o);
  const auto p = static_cast<Eigen::Index>(lp.theta_dim());
  std::vector<std::string> names(t.names.begin(), t.names.begin() + p);
  std::vector<RankedVariable> ranked = rank_uncertainty(t.values.leftCols(p), names);
  CsvTable table({"rank", "variable", "width"});
  for (std::size_t i = 0; i < ranked.size(); ++i)
    table.row({std::to_string(i + 1), ranked[i].name, num(ranked[i].width)});
  table.write(out_dir(o) / "rank.csv");
  return 0;
}

int cmd_bound(const Options& o) {
  Project project = load_project(o.project);
  AssembledModel m = assemble(project);
  if (m.truth.size() == 0) throw ValidationError("bound needs a truth section");
  if (!m.compiled.ratio_specs.empty()) throw ValidationError("bound needs a linear model (no nonlinear ratio rows)");
  const Eigen::VectorXd mu = prior_mean(m.prior);
  const Eigen::MatrixXd Sigma = prior_covariance(m.prior);
  MseBoundReport b = mse_bound(m.truth, mu, Sigma, m.compiled.X, m.compiled.tau);
  const std::uint64_t seed = o.seed.value_or(project.sampler.seed);
  const double emp = empirical_mse(m.truth, mu, Sigma, m.compiled.X, m.compiled.tau, o.mc_draws, seed);
  json j = header_json(m, "bound");
  j["bound"] = b.bound_value;
  j["bias_term"] = b.bias_term;
  j["variance_term"] = b.variance_term;
  j["eigenvalues"] = vec_json(b.eigenvalues);
  j["singular_values"] = vec_json(b.singular_values);
  j["empirical_mse"] = emp;
  j["mc_draws"] = o.mc_draws;
  j["seed"] = seed;
  write_json(out_dir(o) / "bound.json", j);
  return 0;
}

ExperimentSystem experiment_from(const AssembledModel& m) {
  if (m.truth.size() == 0) throw ValidationError("experiments need a truth section");
  return experiment_system(m.fixture());
}

int cmd_rmse(const Options& o) {
  Project project = load_project(o.project);
  AssembledModel m = assemble(project);
  ExperimentSystem sys = experiment_from(m);
  ErrorCurveConfig config;
  config.runs = o.runs.value_or(project.experiment.runs);
  config.seed = o.seed.value_or(project.experiment.seed);
  ErrorCurve curve = run_error_curve(sys, config);

  CsvTable summary({"series", "k", "mean_rmse", "se_rmse", "mean_max_error"});
  CsvTable runs({"series", "run", "k", "rmse", "max_error"});
  for (const CurveSeries& s : curve.series) {
    Eigen::VectorXd mr = s.mean_rmse(), se = s.rmse_se(), mm = s.mean_max_error();
    for (Eigen::Index k = 0; k < mr.size(); ++k)
      summary.row({s.label(), std::to_string(k), num(mr(k)), num(se(k)), num(mm(k))});
    for (Eigen::Index r = 0; r < s.rmse.rows(); ++r)
      for (Eigen::Index k = 0; k < s.rmse.cols(); ++k)
        runs.row({s.label(), std::to_string(r), std::to_string(k), num(s.rmse(r, k)), num(s.max_error(r, k))});
  }
  const fs::path dir = out_dir(o);
  summary.write(dir / "error_curve.csv");
  runs.write(dir / "error_curve_runs.csv");
  return 0;
}

int cmd_coverage(const Options& o) {
  Project project = load_project(o.project);
  AssembledModel m = assemble(project);
  ExperimentSystem sys = experiment_from(m);
  const ExperimentSettings& e = project.experiment;
  CoverageConfig config;
  config.runs = o.runs.value_or(e.runs);
  config.batch = o.batch.value_or(e.batch);
  config.seed = o.seed.value_or(e.seed);
  config.mass = e.mass;
  config.sampler.chains = o.chains.value_or(e.chains);
  config.sampler.draws = o.draws.value_or(e.draws);
  config.sampler.tune = o.tune.value_or(e.tune);
  if (o.target_accept) config.sampler.target_accept = *o.target_accept;
  config.sampler.validate();
  CoverageTable table = run_coverage(sys, config);

  CsvTable longf({"variable", "prior", "batch_size", "coverage", "se", "mean_width", "hits", "runs"});
  std::vector<std::string> header = {"variable"};
  for (PriorSetting pr : table.priors)
    for (std::size_t b : table.batch_sizes) header.push_back(to_string(pr) + "_" + std::to_string(b));
  CsvTable wide(header);
  for (std::size_t v = 0; v < table.variables.size(); ++v) {
    std::vector<std::string> fields = {table.variables[v]};
    for (std::size_t pi = 0; pi < table.priors.size(); ++pi) {
      for (std::size_t bi = 0; bi < table.batch_sizes.size(); ++bi) {
        const CoverageCell& c = table.cell(pi, bi, v);
        longf.row({table.variables[v], to_string(table.priors[pi]), std::to_string(table.batch_sizes[bi]),
                   num(c.coverage()), num(c.se()), num(c.mean_width), std::to_string(c.hits), std::to_string(c.runs)});
        char cell[64];
        std::snprintf(cell, sizeof cell, "%.1f, %.2f", c.coverage(), c.mean_width);
        fields.push_back(cell);
      }
    }
    wide.row(fields);
  }
  const fs::path dir = out_dir(o);
  longf.write(dir / "coverage.csv");
  wide.write(dir / "coverage_table.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian material flow analysis"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* cmd, bool needs_out) {
    cmd->add_option("project", o.project, "Project file (YAML)")->required()->check(CLI::ExistingFile);
    auto* out = cmd->add_option("--out", o.out, "Output directory");
    if (needs_out) out->required();
  };
  auto add_seed = [&o](CLI::App* cmd) { cmd->add_option("--seed", o.seed, "Random seed"); };
  auto add_sampler = [&o](CLI::App* cmd) {
    cmd->add_option("--chains", o.chains, "Number of chains")->check(CLI::PositiveNumber);
    cmd->add_option("--draws", o.draws, "Draws per chain")->check(CLI::PositiveNumber);
    cmd->add_option("--tune", o.tune, "Warmup iterations per chain");
    cmd->add_option("--target-accept", o.target_accept, "Target acceptance statistic")->check(CLI::Range(0.0, 1.0));
  };

  std::function<int()> run;
  auto* validate = app.add_subcommand("validate", "Parse, build and compile a project");
  add_common(validate, false);
  validate->callback([&] { run = [&] { return cmd_validate(o); }; });

  auto* elicit = app.add_subcommand("elicit", "Write the elicited priors");
  add_common(elicit, false);
  elicit->callback([&] { run = [&] { return cmd_elicit(o); }; });

  auto* gauss = app.add_subcommand("fit-gaussian", "Closed-form conjugate Gaussian posterior");
  add_common(gauss, true);
  gauss->callback([&] { run = [&] { return cmd_fit_gaussian(o); }; });

  auto* map = app.add_subcommand("fit-map", "Posterior mode of the full model");
  add_common(map, true);
  map->callback([&] { run = [&] { return cmd_fit_map(o); }; });

  auto* sample = app.add_subcommand("sample", "NUTS sampling of the full model");
  add_common(sample, true);
  add_seed(sample);
  add_sampler(sample);
  sample->callback([&] { run = [&] { return cmd_sample(o); }; });

  auto* ppc = app.add_subcommand("ppc", "Posterior predictive check from saved draws");
  add_common(ppc, true);
  add_seed(ppc);
  ppc->callback([&] { run = [&] { return cmd_ppc(o); }; });

  auto* rank = app.add_subcommand("rank", "Rank variables by posterior HDI width");
  add_common(rank, true);
  rank->callback([&] { run = [&] { return cmd_rank(o); }; });

  auto* bound = app.add_subcommand("bound", "Mean-squared-error bound of the Gaussian posterior mean");
  add_common(bound, true);
  add_seed(bound);
  bound->add_option("--mc-draws", o.mc_draws, "Noise draws for the empirical MSE")->check(CLI::PositiveNumber);
  bound->callback([&] { run = [&] { return cmd_bound(o); }; });

  auto* experiment = app.add_subcommand("experiment", "Simulation studies on a project with a truth");
  experiment->require_subcommand(1);
  auto* rmse = experiment->add_subcommand("rmse", "Error curves over random data orderings");
  add_common(rmse, true);
  add_seed(rmse);
  rmse->add_option("--runs", o.runs, "Number of orderings")->check(CLI::PositiveNumber);
  rmse->callback([&] { run = [&] { return cmd_rmse(o); }; });
  auto* coverage = experiment->add_subcommand("coverage", "HDI coverage over resampled datasets");
  add_common(coverage, true);
  add_seed(coverage);
  add_sampler(coverage);
  coverage->add_option("--runs", o.runs, "Number of datasets")->check(CLI::PositiveNumber);
  coverage->add_option("--batch", o.batch, "Data rows added per batch")->check(CLI::PositiveNumber);
  coverage->callback([&] { run = [&] { return cmd_coverage(o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return run ? run() : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
