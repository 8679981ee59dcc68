#include <cmath>
#include <functional>

#include "bmfa/error.hpp"
#include "bmfa/sampler.hpp"

namespace bmfa {

namespace {

using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Inverse of the central-difference Hessian of f at z, or a scaled identity
// when that Hessian is not positive definite.
Eigen::MatrixXd inverse_hessian_guess(const Objective& f, const Eigen::VectorXd& z, const Eigen::VectorXd& g) {
  const Eigen::Index d = z.size();
  Eigen::MatrixXd h(d, d);
  Eigen::VectorXd gp, gm;
  bool finite = true;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double step = 1e-5 * (1.0 + std::abs(z(i)));
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += step;
    zm(i) -= step;
    const double fp = f(zp, gp);
    const double fm = f(zm, gm);
    if (!std::isfinite(fp) || !std::isfinite(fm) || !gp.allFinite() || !gm.allFinite()) {
      finite = false;
      break;
    }
    h.col(i) = (gp - gm) / (2.0 * step);
  }
  if (finite) {
    const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() == Eigen::Success) return llt.solve(Eigen::MatrixXd::Identity(d, d));
  }
  const double scale = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
  return scale * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

MapResult map_estimate(const LogDensityModel& model, const MapOptions& options) {
  return map_estimate(model, model.initial_point(), options);
}

// Dense BFGS on -log p (no Jacobian term), started from the inverse of a
// finite-difference Hessian so that badly scaled coordinates (flows in logit
// space next to stocks) do not stall the iteration.
MapResult map_estimate(const LogDensityModel& model, const Eigen::VectorXd& init, const MapOptions& options) {
  if (static_cast<std::size_t>(init.size()) != model.dim()) throw ValidationError("initial point has the wrong length");
  const Objective objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
    const double lp = model.log_density(z, g, false);
    g = -g;
    return -lp;
  };

  Eigen::VectorXd z = init, g;
  double f = objective(z, g);
  if (!std::isfinite(f) || !g.allFinite()) throw NumericalError("log-density is not finite at the optimizer start point");

  Eigen::MatrixXd hinv = inverse_hessian_guess(objective, z, g);
  bool fresh = true;  // hinv was just rebuilt
  MapResult res;
  int it = 0;
  for (; it < options.max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < options.tol) break;
    Eigen::VectorXd dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -g.squaredNorm();
    }

    double t = 1.0;
    Eigen::VectorXd z_new, g_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      z_new = z + t * dir;
      f_new = objective(z_new, g_new);
      if (std::isfinite(f_new) && g_new.allFinite()) {
        if (f_new <= f + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
        // Near the optimum f stops resolving; accept steps that shrink the gradient.
        if (f_new <= f + 1e-12 * std::abs(f) && g_new.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (fresh) break;
      hinv = inverse_hessian_guess(objective, z, g);
      fresh = true;
      continue;
    }

    const Eigen::VectorXd s = z_new - z;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
    fresh = false;
    z = z_new;
    g = g_new;
    f = f_new;
  }
  res.z = z;
  res.mode = model.constrain(z);
  res.log_density = -f;
  res.iterations = it;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  res.converged = res.grad_norm < options.tol;
  return res;
}

}  // namespace bmfa
