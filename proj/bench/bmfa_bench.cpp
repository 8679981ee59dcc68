// Serial reference vs OpenMP-parallel kernels: wall time and bitwise agreement.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include <omp.h>

#include "bmfa/diagnostics.hpp"
#include "bmfa/experiments.hpp"
#include "bmfa/fixtures.hpp"
#include "bmfa/posterior_core.hpp"

using namespace bmfa;

namespace {

double seconds(const std::function<void()>& f) {
  auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-22s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
  int failures = 0;

  const Fixture zinc = zinc_like();
  LogPosterior lp(zinc.compile(), zinc.prior, plug_in_noise(zinc.rows()));
  {
    SamplerConfig c;
    c.chains = 4;
    c.draws = 1000;
    c.tune = 1000;
    c.seed = 7;
    PosteriorSamples a, b;
    c.parallel = false;
    const double ts = seconds([&] { a = nuts_sample(lp, c); });
    c.parallel = true;
    const double tp = seconds([&] { b = nuts_sample(lp, c); });
    const bool same = a.values == b.values;
    failures += !same;
    report("nuts chains", ts, tp, same);

    const Eigen::MatrixXd tau = zinc.compile().tau.transpose();
    Eigen::MatrixXd ra, rb;
    const double ps = seconds([&] { ra = posterior_predictive(lp.model(), a.values, tau, 3, false); });
    const double pp = seconds([&] { rb = posterior_predictive(lp.model(), a.values, tau, 3, true); });
    failures += !(ra == rb);
    report("posterior predictive", ps, pp, ra == rb);
  }
  {
    const ExperimentSystem sys = experiment_system(zinc);
    ErrorCurveConfig c;
    c.runs = 10;
    c.seed = 1;
    ErrorCurve a, b;
    c.parallel = false;
    const double ts = seconds([&] { a = run_error_curve(sys, c); });
    c.parallel = true;
    const double tp = seconds([&] { b = run_error_curve(sys, c); });
    bool same = true;
    for (std::size_t s = 0; s < a.series.size(); ++s) same = same && a.series[s].rmse == b.series[s].rmse;
    failures += !same;
    report("error curve", ts, tp, same);
  }
  {
    const ExperimentSystem sys = experiment_system(zinc_like_misfit());
    CoverageConfig c;
    c.runs = 4;
    c.seed = 2;
    c.sampler.draws = 300;
    c.sampler.tune = 300;
    CoverageTable a, b;
    c.parallel = false;
    const double ts = seconds([&] { a = run_coverage(sys, c); });
    c.parallel = true;
    const double tp = seconds([&] { b = run_coverage(sys, c); });
    bool same = true;
    for (std::size_t p = 0; p < a.cells.size(); ++p)
      for (std::size_t k = 0; k < a.cells[p].size(); ++k)
        for (std::size_t v = 0; v < a.cells[p][k].size(); ++v)
          same = same && a.cells[p][k][v].hits == b.cells[p][k][v].hits &&
                 a.cells[p][k][v].mean_width == b.cells[p][k][v].mean_width;
    failures += !same;
    report("coverage", ts, tp, same);
  }
  return failures == 0 ? 0 : 1;
}
