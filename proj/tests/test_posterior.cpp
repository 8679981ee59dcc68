#include <doctest.h>

#include <cmath>
#include <random>

#include "bmfa/error.hpp"
#include "bmfa/fixtures.hpp"
#include "bmfa/posterior_core.hpp"
#include "test_support.hpp"

using namespace bmfa;
using bmfa::testing::Rng;

namespace {

// Nested system with every likelihood form: direct and aggregate flows, a parent
// stock, both ratio forms and balance rows; bounds small enough that the
// truncation normalizers matter.
struct Setup {
  Fixture f;
  std::vector<ObservationRow> rows;
  NoisePriorSpec noise;
  CompiledModel compiled;
};

Setup make_setup(NoiseMode mode, double upper = 40.0) {
  Setup s;
  s.f = small_nested_system();
  const SystemGraph& g = s.f.graph;
  s.rows = s.f.data;
  s.rows.push_back(ratio_row(g, "4", "1", 0.3, 0.05, RatioForm::nonlinear));
  s.rows.push_back(ratio_row(g, "1", "5", 0.5, 0.05, RatioForm::linear));
  s.rows.push_back(stock_row(g, "4", -2.0, 1.0));
  for (const auto& b : s.f.balance) s.rows.push_back(b);
  s.noise = plug_in_noise(s.rows, mode);
  s.rows = with_noise(s.rows, s.noise);
  s.compiled = compile(g, s.rows, upper);
  s.f.prior.upper = upper;
  return s;
}

// log Phi(x); the asymptotic tail series takes over where erfc underflows.
double log_phi(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * M_PI) +
         std::log(1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

// log(Phi(b) - Phi(a)) for a < b, using the mirrored tails when a > 0.
double log_phi_mass(double a, double b) {
  if (a > 0.0) return log_phi_mass(-b, -a);
  const double lb = log_phi(b), la = log_phi(a);
  return lb + std::log1p(-std::exp(la - lb));
}

// Straightforward constrained-space log posterior plus the log-Jacobian, up to a constant.
double oracle(const Setup& s, const LogPosterior& lp, const Eigen::VectorXd& z) {
  const PriorSpec& pr = s.f.prior;
  const CompiledModel& m = s.compiled;
  const std::size_t p = m.p;
  Eigen::VectorXd theta(static_cast<Eigen::Index>(p));
  double out = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (pr.is_flow(i)) {
      const double u = 1.0 / (1.0 + std::exp(-z(ii)));
      theta(ii) = pr.upper * u;
      out += std::log(pr.upper * u * (1.0 - u));
    } else {
      theta(ii) = z(ii);
    }
    const double r = (theta(ii) - pr.variables[i].mu) / pr.variables[i].sigma;
    out += -0.5 * r * r;
  }
  Eigen::VectorXd tau = m.tau;
  for (std::size_t k = 0; k < lp.free_tau_rows().size(); ++k) {
    const double t = std::exp(z(static_cast<Eigen::Index>(p + k)));
    const std::size_t row = lp.free_tau_rows()[k];
    tau(static_cast<Eigen::Index>(row)) = t;
    const auto& h = *s.noise.hyper[m.row_provenance[row]];
    out += -(h.shape + 1.0) * std::log(t) - h.scale / t + std::log(t);
  }
  const Eigen::VectorXd mean = row_means(m, theta);
  for (Eigen::Index r = 0; r < mean.size(); ++r) {
    const double e = (m.Y(r) - mean(r)) / tau(r);
    out += -0.5 * e * e - std::log(tau(r));
    if (m.family[static_cast<std::size_t>(r)] == Family::truncated_normal)
      out -= log_phi_mass(-mean(r) / tau(r), (m.likelihood_upper - mean(r)) / tau(r));
  }
  return out;
}

Eigen::VectorXd random_point(Rng& rng, std::size_t p, std::size_t stocks, std::size_t extra) {
  std::normal_distribution<double> zs(0.0, 3.0), zf(-1.5, 1.0), zt(-1.0, 0.5);
  Eigen::VectorXd z(static_cast<Eigen::Index>(p + extra));
  for (std::size_t i = 0; i < p; ++i) z(static_cast<Eigen::Index>(i)) = i < stocks ? zs(rng) : zf(rng);
  for (std::size_t k = 0; k < extra; ++k) z(static_cast<Eigen::Index>(p + k)) = zt(rng);
  return z;
}

}  // namespace

TEST_CASE("log density differences match the direct oracle") {
  for (NoiseMode mode : {NoiseMode::plug_in, NoiseMode::inverse_gamma}) {
    const Setup s = make_setup(mode);
    const LogPosterior lp(s.compiled, s.f.prior, s.noise);
    if (mode == NoiseMode::inverse_gamma) CHECK(lp.tau_dim() == 8);
    Rng rng(31);
    Eigen::VectorXd g;
    const Eigen::VectorXd z0 = random_point(rng, 12, 2, lp.tau_dim());
    const double base = lp.log_density(z0, g);
    const double obase = oracle(s, lp, z0);
    for (int t = 0; t < 100; ++t) {
      const Eigen::VectorXd z = random_point(rng, 12, 2, lp.tau_dim());
      const double got = lp.log_density(z, g) - base;
      const double want = oracle(s, lp, z) - obase;
      CHECK(testing::rel_error(got, want) < 1e-9);
    }
  }
}

TEST_CASE("gradient matches central finite differences") {
  for (NoiseMode mode : {NoiseMode::plug_in, NoiseMode::inverse_gamma}) {
    const Setup s = make_setup(mode);
    const LogPosterior lp(s.compiled, s.f.prior, s.noise);
    Rng rng(37);
    for (int t = 0; t < 50; ++t) {
      const Eigen::VectorXd z = random_point(rng, 12, 2, lp.tau_dim());
      for (bool jac : {true, false}) {
        Eigen::VectorXd g;
        lp.log_density(z, g, jac);
        const Eigen::VectorXd fd = testing::fd_gradient(lp, z, 1e-6, jac);
        for (Eigen::Index i = 0; i < z.size(); ++i) CHECK(testing::rel_error(g(i), fd(i)) < 1e-5);
      }
    }
  }
}

TEST_CASE("block breakdown sums to the total") {
  const Setup s = make_setup(NoiseMode::inverse_gamma);
  const LogPosterior lp(s.compiled, s.f.prior, s.noise);
  Rng rng(41);
  const Eigen::VectorXd z = random_point(rng, 12, 2, lp.tau_dim());
  const LogDensityReport r = lp.evaluate(z);
  CHECK(r.log_posterior == doctest::Approx(r.blocks.total()));
  CHECK(r.blocks.ratio_lik != 0.0);
  CHECK(r.blocks.flow_lik != 0.0);
  CHECK(r.blocks.noise_prior != 0.0);
  const LogDensityReport nj = lp.evaluate(z, false);
  CHECK(nj.blocks.jacobian == 0.0);
}

TEST_CASE("transforms round-trip") {
  for (double x : {1e-6, 0.3, 17.0, 9999.0}) CHECK(flow_from_unconstrained(flow_to_unconstrained(x, 1e4), 1e4) == doctest::Approx(x).epsilon(1e-12));
  CHECK_THROWS_AS(flow_to_unconstrained(0.0, 1e4), ValidationError);
  CHECK_THROWS_AS(flow_to_unconstrained(1e4, 1e4), ValidationError);
  const Setup s = make_setup(NoiseMode::inverse_gamma);
  const LogPosterior lp(s.compiled, s.f.prior, s.noise);
  Rng rng(43);
  const Eigen::VectorXd z = random_point(rng, 12, 2, lp.tau_dim());
  CHECK((lp.unconstrain(lp.constrain(z)) - z).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("initial point is finite and named") {
  const Setup s = make_setup(NoiseMode::inverse_gamma);
  LogPosterior lp(s.compiled, s.f.prior, s.noise);
  lp.set_variable_names(s.f.graph.index().names());
  const Eigen::VectorXd z = lp.initial_point();
  Eigen::VectorXd g;
  CHECK(std::isfinite(lp.log_density(z, g)));
  const auto names = lp.parameter_names();
  CHECK(names.size() == lp.dim());
  CHECK(names.front() == "S:4");
  CHECK(names[12].rfind("tau:", 0) == 0);
}

TEST_CASE("ratio denominators that vanish give a non-finite density") {
  const Setup s = make_setup(NoiseMode::plug_in);
  const LogPosterior lp(s.compiled, s.f.prior, s.noise);
  Eigen::VectorXd z = lp.initial_point();
  // Push all outflows of process 4 to (numerically) zero.
  for (const char* name : {"U:4->1", "U:4->2", "U:4->3"}) z(static_cast<Eigen::Index>(*s.f.graph.index().find(name))) = -800.0;
  Eigen::VectorXd g;
  CHECK_FALSE(std::isfinite(lp.log_density(z, g)));
  CHECK_THROWS_AS(lp.evaluate(z), NumericalError);
}

TEST_CASE("mismatched priors are rejected") {
  const Setup s = make_setup(NoiseMode::plug_in);
  PriorSpec bad = s.f.prior;
  bad.variables.pop_back();
  CHECK_THROWS_AS(LogPosterior(s.compiled, bad, s.noise), ValidationError);
}
