#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <string>

#include "bmfa/error.hpp"
#include "bmfa/normal_math.hpp"
#include "bmfa/sampler.hpp"

namespace bmfa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxDeltaH = 1000.0;
constexpr int kInitRetries = 100;

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd g;  // gradient of log density
  double logp = -kInf;
};

class DualAveraging {
 public:
  explicit DualAveraging(double delta) : delta_(delta) {}
  void restart(double step) {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
    mu_ = std::log(10.0 * step);
  }
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  double mu_ = 0.0;
};

// Warmup schedule for the diagonal metric: an initial fast buffer, a series
// of doubling slow windows, and a terminal fast buffer.
class MetricWindows {
 public:
  MetricWindows(std::size_t warmup, std::size_t dim) : warmup_(warmup) {
    enabled_ = warmup >= 20;
    if (!enabled_) return;
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
      term_buffer_ = static_cast<std::size_t>(0.1 * static_cast<double>(warmup));
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
    mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    m2_ = mean_;
  }

  /// Feed one warmup draw; returns true when a new metric is available in `inv_metric`.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric) {
    if (!enabled_) return false;
    if (in_window()) {
      ++n_;
      const Eigen::VectorXd delta = q - mean_;
      mean_ += delta / static_cast<double>(n_);
      m2_ += delta.cwiseProduct(q - mean_);
    }
    if (counter_ == next_window_ && counter_ != warmup_) {
      compute_next_window();
      const double n = static_cast<double>(n_);
      const Eigen::VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      n_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const std::size_t boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  std::size_t warmup_;
  bool enabled_ = false;
  std::size_t init_buffer_ = 75;
  std::size_t term_buffer_ = 50;
  std::size_t base_window_ = 25;
  std::size_t window_size_ = 0;
  std::size_t next_window_ = 0;
  std::size_t counter_ = 0;
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

class NutsChain {
 public:
  NutsChain(const LogDensityModel& model, const SamplerConfig& config, std::uint64_t seed)
      : model_(model), config_(config), rng_(seed), adapt_(config.target_accept) {
    inv_metric_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(model.dim()));
  }

  void initialize(const Eigen::VectorXd& start) {
    const auto d = static_cast<Eigen::Index>(model_.dim());
    for (int attempt = 0; attempt < kInitRetries; ++attempt) {
      Eigen::VectorXd q = start;
      if (config_.init == InitMode::jittered || attempt > 0)
        for (Eigen::Index i = 0; i < d; ++i) q(i) += 2.0 * math::uniform01(rng_) - 1.0;
      z_.q = q;
      if (update_density(z_) && z_.g.allFinite()) return;
    }
    throw NumericalError("non-finite log-density at every initial point after " + std::to_string(kInitRetries) +
                         " attempts");
  }

  void run(PosteriorSamples& out, std::size_t chain) {
    z_.p = Eigen::VectorXd::Zero(z_.q.size());
    init_stepsize();
    adapt_.restart(step_);
    MetricWindows windows(config_.tune, model_.dim());
    std::size_t warmup_divergent = 0;
    for (std::size_t it = 0; it < config_.tune; ++it) {
      const DrawStats s = transition();
      if (s.divergent) ++warmup_divergent;
      step_ = adapt_.learn(s.accept_stat);
      if (windows.learn(z_.q, inv_metric_)) {
        init_stepsize();
        adapt_.restart(step_);
      }
    }
    if (config_.tune > 0) {
      if (warmup_divergent == config_.tune) throw NumericalError("every warmup transition diverged");
      step_ = adapt_.final_step();
    }
    out.step_sizes[chain] = step_;
    out.inv_metric[chain] = inv_metric_;
    for (std::size_t it = 0; it < config_.draws; ++it) {
      const DrawStats s = transition();
      const auto row = static_cast<Eigen::Index>(chain * config_.draws + it);
      out.values.row(row) = model_.constrain(z_.q).transpose();
      out.stats[static_cast<std::size_t>(row)] = s;
    }
  }

 private:
  bool update_density(PhasePoint& z) const {
    z.logp = model_.log_density(z.q, z.g, true);
    if (!std::isfinite(z.logp)) {
      z.logp = -kInf;
      return false;
    }
    return true;
  }

  double hamiltonian(const PhasePoint& z) const {
    return -z.logp + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
  }

  Eigen::VectorXd velocity(const PhasePoint& z) const { return inv_metric_.cwiseProduct(z.p); }

  void sample_momentum(PhasePoint& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p(i) = normal_(rng_) / std::sqrt(inv_metric_(i));
  }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.g;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    if (!update_density(z) || !z.g.allFinite()) {
      z.logp = -kInf;
      return;
    }
    z.p += 0.5 * eps * z.g;
  }

  double energy(const PhasePoint& z) const {
    const double h = hamiltonian(z);
    return std::isnan(h) || z.logp == -kInf ? kInf : h;
  }

  void init_stepsize() {
    const PhasePoint start = z_;
    sample_momentum(z_);
    double h0 = energy(z_);
    leapfrog(z_, step_);
    double delta_h = h0 - energy(z_);
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (;;) {
      z_ = start;
      sample_momentum(z_);
      h0 = energy(z_);
      leapfrog(z_, step_);
      delta_h = h0 - energy(z_);
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      step_ = direction == 1 ? 2.0 * step_ : 0.5 * step_;
      if (step_ > 1e7) throw NumericalError("posterior is improper: step size grew without bound");
      if (step_ == 0.0) throw NumericalError("no acceptably small step size was found");
    }
    z_ = start;
  }

  static bool no_u_turn(const Eigen::VectorXd& v_minus, const Eigen::VectorXd& v_plus, const Eigen::VectorXd& rho) {
    return v_plus.dot(rho) > 0.0 && v_minus.dot(rho) > 0.0;
  }

  struct TreeState {
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    bool divergent = false;
  };

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Eigen::VectorXd& v_beg, Eigen::VectorXd& v_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                  double& log_sum_weight, TreeState& ts) {
    if (depth == 0) {
      leapfrog(z, sign * step_);
      ++ts.n_leapfrog;
      const double h = energy(z);
      if (h - h0 > kMaxDeltaH) ts.divergent = true;
      log_sum_weight = math::log_sum_exp(log_sum_weight, h0 - h);
      ts.sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      v_beg = velocity(z);
      v_end = v_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !ts.divergent;
    }
    const auto d = z.q.size();
    double lsw_init = -kInf;
    Eigen::VectorXd p_init_end(d), v_init_end(d), rho_init = Eigen::VectorXd::Zero(d);
    if (!build_tree(depth - 1, z, z_propose, v_beg, v_init_end, rho_init, p_beg, p_init_end, h0, sign, lsw_init, ts))
      return false;

    PhasePoint z_propose_final = z;
    double lsw_final = -kInf;
    Eigen::VectorXd p_final_beg(d), v_final_beg(d), rho_final = Eigen::VectorXd::Zero(d);
    if (!build_tree(depth - 1, z, z_propose_final, v_final_beg, v_end, rho_final, p_final_beg, p_end, h0, sign,
                    lsw_final, ts))
      return false;

    const double lsw_subtree = math::log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = math::log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (math::uniform01(rng_) < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(v_beg, v_end, rho_subtree);
    persist = persist && no_u_turn(v_beg, v_final_beg, rho_init + p_final_beg);
    persist = persist && no_u_turn(v_init_end, v_end, rho_final + p_init_end);
    return persist;
  }

  DrawStats transition() {
    sample_momentum(z_);
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    Eigen::VectorXd v_fwd_fwd = velocity(z_), v_fwd_bck = v_fwd_fwd, v_bck_fwd = v_fwd_fwd, v_bck_bck = v_fwd_fwd;
    Eigen::VectorXd p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    Eigen::VectorXd rho = z_.p;
    const double h0 = energy(z_);
    double log_sum_weight = 0.0;
    TreeState ts;
    int depth = 0;
    const auto d = z_.q.size();

    while (depth < config_.max_tree_depth) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(d), rho_bck = Eigen::VectorXd::Zero(d);
      double lsw_subtree = -kInf;
      bool valid = false;
      if (math::uniform01(rng_) > 0.5) {
        PhasePoint z = z_fwd;
        // The old trajectory becomes the backward part; its forward end borders the new subtree.
        rho_bck = rho;
        p_bck_fwd = p_fwd_fwd;
        v_bck_fwd = v_fwd_fwd;
        valid = build_tree(depth, z, z_propose, v_fwd_bck, v_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0, 1.0,
                           lsw_subtree, ts);
        z_fwd = std::move(z);
      } else {
        PhasePoint z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_bck;
        v_fwd_bck = v_bck_bck;
        valid = build_tree(depth, z, z_propose, v_bck_fwd, v_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0, -1.0,
                           lsw_subtree, ts);
        z_bck = std::move(z);
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (math::uniform01(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = math::log_sum_exp(log_sum_weight, lsw_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(v_bck_bck, v_fwd_fwd, rho);
      persist = persist && no_u_turn(v_bck_bck, v_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && no_u_turn(v_bck_fwd, v_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    z_ = z_sample;
    DrawStats s;
    s.divergent = ts.divergent;
    s.tree_depth = depth;
    s.n_leapfrog = ts.n_leapfrog;
    s.accept_stat = ts.n_leapfrog > 0 ? ts.sum_metro_prob / ts.n_leapfrog : 0.0;
    s.step_size = step_;
    s.energy = hamiltonian(z_);
    return s;
  }

  const LogDensityModel& model_;
  const SamplerConfig& config_;
  math::Rng rng_;
  std::normal_distribution<double> normal_;
  DualAveraging adapt_;
  Eigen::VectorXd inv_metric_;
  PhasePoint z_;
  double step_ = 1.0;
};

void check_gradient(const LogDensityModel& model, const Eigen::VectorXd& z) {
  Eigen::VectorXd g, scratch;
  const double f0 = model.log_density(z, g, true);
  if (!std::isfinite(f0) || !g.allFinite()) return;  // the jitter retries deal with this point
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(z(i)));
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    const double fd = (model.log_density(zp, scratch, true) - model.log_density(zm, scratch, true)) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(fd), std::abs(g(i))});
    if (!(std::abs(fd - g(i)) <= 1e-3 * scale))
      throw NumericalError("gradient check failed at the initial point for coordinate " + std::to_string(i) +
                           ": analytic " + std::to_string(g(i)) + ", finite difference " + std::to_string(fd));
  }
}

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw ValidationError("sampler needs at least one chain");
  if (draws < 1) throw ValidationError("sampler needs at least one draw per chain");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ValidationError("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw ValidationError("max_tree_depth must be at least 1");
}

PosteriorSamples nuts_sample(const LogDensityModel& model, const SamplerConfig& config) {
  config.validate();
  const std::size_t dim = model.dim();
  if (dim == 0) throw ValidationError("model has no parameters");
  const Eigen::VectorXd start = model.initial_point();
  if (config.gradient_check) check_gradient(model, start);

  PosteriorSamples out;
  out.names = model.parameter_names();
  out.chains = config.chains;
  out.draws = config.draws;
  out.dim = static_cast<std::size_t>(model.constrain(start).size());
  out.values.resize(static_cast<Eigen::Index>(config.chains * config.draws), static_cast<Eigen::Index>(out.dim));
  out.stats.resize(config.chains * config.draws);
  out.step_sizes.resize(config.chains);
  out.inv_metric.resize(config.chains);

  std::vector<std::exception_ptr> errors(config.chains);
  const auto n_chains = static_cast<long>(config.chains);
#pragma omp parallel for schedule(static, 1) if (config.parallel)
  for (long c = 0; c < n_chains; ++c) {
    const auto chain = static_cast<std::size_t>(c);
    try {
      NutsChain runner(model, config, config.seed + chain);
      runner.initialize(start);
      runner.run(out, chain);
    } catch (...) {
      errors[chain] = std::current_exception();
    }
  }
  for (std::size_t c = 0; c < config.chains; ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const NumericalError& e) {
      throw NumericalError("chain " + std::to_string(c) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("chain " + std::to_string(c) + ": " + e.what());
    }
  }
  compute_convergence(out);
  return out;
}

Eigen::MatrixXd PosteriorSamples::by_chain(std::size_t var) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(chains), static_cast<Eigen::Index>(draws));
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t d = 0; d < draws; ++d)
      m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)) = value(c, d, var);
  return m;
}

std::size_t PosteriorSamples::divergences() const {
  std::size_t n = 0;
  for (const DrawStats& s : stats) n += s.divergent ? 1 : 0;
  return n;
}

Eigen::VectorXd PosteriorSamples::sd() const {
  const Eigen::RowVectorXd mu = values.colwise().mean();
  const double denom = std::max<double>(1.0, static_cast<double>(values.rows()) - 1.0);
  return ((values.rowwise() - mu).array().square().colwise().sum() / denom).sqrt().transpose();
}

}  // namespace bmfa
