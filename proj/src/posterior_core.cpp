#include "bmfa/posterior_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bmfa/error.hpp"
#include "bmfa/normal_math.hpp"

namespace bmfa {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRatioFloor = 1e-12;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct RowTerm {
  double value;
  double d_mean;
  double d_tau;
};

RowTerm normal_term(double y, double mean, double tau) {
  const double r = y - mean;
  const double t2 = tau * tau;
  return {-0.5 * r * r / t2 - std::log(tau), r / t2, r * r / (t2 * tau) - 1.0 / tau};
}

// Normal truncated to [0, upper]; the normalizer depends on the mean.
RowTerm truncated_term(double y, double mean, double tau, double upper) {
  RowTerm t = normal_term(y, mean, tau);
  const double a = (0.0 - mean) / tau;
  const double b = (upper - mean) / tau;
  const double log_z = math::log_std_normal_mass(a, b);
  const double ra = std::exp(math::log_std_normal_pdf(a) - log_z);  // phi(a) / Z
  const double rb = std::isfinite(b) ? std::exp(math::log_std_normal_pdf(b) - log_z) : 0.0;
  t.value -= log_z;
  t.d_mean += (rb - ra) / tau;
  t.d_tau += ((std::isfinite(b) ? b * rb : 0.0) - a * ra) / tau;
  return t;
}

double& block_for(LogDensityBlocks& blocks, RowKind kind, Family family) {
  if (kind == RowKind::mass_balance) return blocks.mass_balance_lik;
  if (kind == RowKind::ratio) return blocks.ratio_lik;
  if (family == Family::truncated_normal) return blocks.flow_lik;
  return blocks.stock_lik;
}

// Accumulates the likelihood into `blocks` and the gradients (when given).
void likelihood_terms(const CompiledModel& m, const Eigen::VectorXd& theta, const Eigen::VectorXd& tau,
                      Eigen::VectorXd* g_theta, Eigen::VectorXd* g_tau, LogDensityBlocks& blocks) {
  const Eigen::Index nl = static_cast<Eigen::Index>(m.n_linear());
  const Eigen::VectorXd mean = m.X * theta;
  for (Eigen::Index r = 0; r < nl; ++r) {
    const auto ri = static_cast<std::size_t>(r);
    const RowTerm t = m.family[ri] == Family::truncated_normal
                          ? truncated_term(m.Y(r), mean(r), tau(r), m.likelihood_upper)
                          : normal_term(m.Y(r), mean(r), tau(r));
    block_for(blocks, m.kind[ri], m.family[ri]) += t.value;
    if (g_theta) *g_theta += t.d_mean * m.X.row(r).transpose();
    if (g_tau) (*g_tau)(r) += t.d_tau;
  }
  for (std::size_t k = 0; k < m.ratio_specs.size(); ++k) {
    const RatioSpec& spec = m.ratio_specs[k];
    const Eigen::Index r = nl + static_cast<Eigen::Index>(k);
    double denom = 0.0;
    for (std::size_t idx : spec.denominator) denom += theta(static_cast<Eigen::Index>(idx));
    if (!(denom > kRatioFloor)) {
      blocks.ratio_lik = kNegInf;
      return;
    }
    const double num = theta(static_cast<Eigen::Index>(spec.numerator));
    const double ratio = num / denom;
    const RowTerm t = normal_term(m.Y(r), ratio, tau(r));
    blocks.ratio_lik += t.value;
    if (g_theta) {
      const double d_den = -t.d_mean * num / (denom * denom);
      for (std::size_t idx : spec.denominator) (*g_theta)(static_cast<Eigen::Index>(idx)) += d_den;
      (*g_theta)(static_cast<Eigen::Index>(spec.numerator)) += t.d_mean / denom;
    }
    if (g_tau) (*g_tau)(r) += t.d_tau;
  }
}

}  // namespace

double flow_from_unconstrained(double z, double upper) { return upper * sigmoid(z); }

double flow_to_unconstrained(double theta, double upper) {
  if (!(theta > 0.0 && theta < upper))
    throw ValidationError("flow value " + std::to_string(theta) + " lies outside (0, L)");
  const double u = theta / upper;
  return std::log(u) - std::log1p(-u);
}

LogPosterior::LogPosterior(CompiledModel model, PriorSpec prior, NoisePriorSpec noise)
    : model_(std::move(model)), prior_(std::move(prior)), p_(model_.p) {
  prior_.validate();
  if (prior_.size() != p_) throw ValidationError("prior covers a different number of variables than the model");
  if (!noise.hyper.empty()) {
    for (std::size_t r = 0; r < model_.n(); ++r) {
      const std::size_t source = model_.row_provenance[r];
      if (source >= noise.hyper.size()) throw ValidationError("noise settings do not cover every row");
      if (const auto& h = noise.hyper[source]) {
        if (!(h->shape > 1.0) || !(h->scale > 0.0))
          throw ValidationError("inverse-gamma noise prior needs shape > 1 and scale > 0");
        free_tau_rows_.push_back(r);
        tau_hyper_.push_back(*h);
      }
    }
  }
}

double LogPosterior::log_prior(const Eigen::VectorXd& theta, Eigen::VectorXd* grad_theta) const {
  double lp = 0.0;
  for (std::size_t i = 0; i < p_; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const VariablePrior& v = prior_.variables[i];
    if (prior_.is_flow(i) && (theta(ii) < 0.0 || theta(ii) > prior_.upper))
      throw ValidationError("flow " + std::to_string(i) + " lies outside [0, L]");
    const double r = theta(ii) - v.mu;
    lp -= 0.5 * r * r / (v.sigma * v.sigma);
    if (grad_theta) (*grad_theta)(ii) -= r / (v.sigma * v.sigma);
  }
  return lp;
}

double LogPosterior::log_likelihood(const Eigen::VectorXd& theta, const Eigen::VectorXd& tau,
                                    Eigen::VectorXd* grad_theta, Eigen::VectorXd* grad_tau) const {
  LogDensityBlocks blocks;
  likelihood_terms(model_, theta, tau, grad_theta, grad_tau, blocks);
  if (blocks.ratio_lik == kNegInf) throw NumericalError("transfer-coefficient denominator underflow");
  return blocks.stock_lik + blocks.flow_lik + blocks.ratio_lik + blocks.mass_balance_lik;
}

double LogPosterior::compute(const Eigen::VectorXd& z, Eigen::VectorXd* grad, bool jacobian,
                             LogDensityBlocks* out_blocks) const {
  const Eigen::Index p = static_cast<Eigen::Index>(p_);
  LogDensityBlocks blocks;
  Eigen::VectorXd theta(p), dtheta(p), gjac = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  const double upper = prior_.upper;
  const double log_upper = std::log(upper);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!prior_.is_flow(static_cast<std::size_t>(i))) {
      theta(i) = z(i);
      dtheta(i) = 1.0;
      continue;
    }
    const double s = sigmoid(z(i));
    const double sm = sigmoid(-z(i));
    theta(i) = upper * s;
    dtheta(i) = upper * s * sm;
    if (jacobian) {
      blocks.jacobian += log_upper - softplus(-z(i)) - softplus(z(i));
      gjac(i) = sm - s;
    }
  }
  Eigen::VectorXd tau = model_.tau;
  for (std::size_t k = 0; k < free_tau_rows_.size(); ++k) {
    const Eigen::Index zi = p + static_cast<Eigen::Index>(k);
    tau(static_cast<Eigen::Index>(free_tau_rows_[k])) = std::exp(z(zi));
    if (jacobian) {
      blocks.jacobian += z(zi);
      gjac(zi) = 1.0;
    }
  }

  Eigen::VectorXd g_theta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd g_tau = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model_.n()));
  for (Eigen::Index i = 0; i < p; ++i) {
    const VariablePrior& v = prior_.variables[static_cast<std::size_t>(i)];
    const double r = theta(i) - v.mu;
    blocks.prior -= 0.5 * r * r / (v.sigma * v.sigma);
    g_theta(i) -= r / (v.sigma * v.sigma);
  }
  likelihood_terms(model_, theta, tau, grad ? &g_theta : nullptr, grad ? &g_tau : nullptr, blocks);

  Eigen::VectorXd g_free(static_cast<Eigen::Index>(free_tau_rows_.size()));
  for (std::size_t k = 0; k < free_tau_rows_.size(); ++k) {
    const double t = tau(static_cast<Eigen::Index>(free_tau_rows_[k]));
    const InverseGammaPrior& h = tau_hyper_[k];
    blocks.noise_prior += -h.scale / t - (h.shape + 1.0) * std::log(t);
    g_free(static_cast<Eigen::Index>(k)) = g_tau(static_cast<Eigen::Index>(free_tau_rows_[k])) +
                                           h.scale / (t * t) - (h.shape + 1.0) / t;
    g_free(static_cast<Eigen::Index>(k)) *= t;
  }

  if (grad) {
    grad->resize(static_cast<Eigen::Index>(dim()));
    grad->head(p) = g_theta.cwiseProduct(dtheta);
    grad->tail(g_free.size()) = g_free;
    *grad += gjac;
  }
  if (out_blocks) *out_blocks = blocks;
  return blocks.total();
}

double LogPosterior::log_density(const Eigen::VectorXd& z, Eigen::VectorXd& grad, bool jacobian) const {
  return compute(z, &grad, jacobian, nullptr);
}

LogDensityReport LogPosterior::evaluate(const Eigen::VectorXd& z, bool jacobian) const {
  if (static_cast<std::size_t>(z.size()) != dim()) throw ValidationError("parameter vector has the wrong length");
  LogDensityReport rep;
  rep.log_posterior = compute(z, &rep.gradient, jacobian, &rep.blocks);
  const std::pair<const char*, double> named[] = {
      {"prior", rep.blocks.prior},
      {"stock likelihood", rep.blocks.stock_lik},
      {"flow likelihood", rep.blocks.flow_lik},
      {"ratio likelihood", rep.blocks.ratio_lik},
      {"mass-balance likelihood", rep.blocks.mass_balance_lik},
      {"noise prior", rep.blocks.noise_prior},
      {"jacobian", rep.blocks.jacobian},
  };
  for (const auto& [name, value] : named)
    if (!std::isfinite(value)) throw NumericalError(std::string("non-finite log-density in block: ") + name);
  if (!rep.gradient.allFinite()) throw NumericalError("non-finite log-density gradient");
  return rep;
}

Eigen::VectorXd LogPosterior::constrain(const Eigen::VectorXd& z) const {
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (ui >= p_)
      out(i) = std::exp(z(i));
    else if (prior_.is_flow(ui))
      out(i) = flow_from_unconstrained(z(i), prior_.upper);
    else
      out(i) = z(i);
  }
  return out;
}

Eigen::VectorXd LogPosterior::unconstrain(const Eigen::VectorXd& params) const {
  const auto size = static_cast<std::size_t>(params.size());
  if (size != p_ && size != dim()) throw ValidationError("parameter vector has the wrong length");
  Eigen::VectorXd z(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < dim(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (i >= p_) {
      const double t = size == dim() ? params(ii) : model_.tau(static_cast<Eigen::Index>(free_tau_rows_[i - p_]));
      if (!(t > 0.0)) throw ValidationError("noise standard deviation must be positive");
      z(ii) = std::log(t);
    } else if (prior_.is_flow(i)) {
      z(ii) = flow_to_unconstrained(params(ii), prior_.upper);
    } else {
      z(ii) = params(ii);
    }
  }
  return z;
}

Eigen::VectorXd LogPosterior::initial_point() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(p_));
  for (std::size_t i = 0; i < p_; ++i) {
    const VariablePrior& v = prior_.variables[i];
    double x = v.mu;
    if (prior_.is_flow(i)) {
      const double margin = std::min(0.01 * v.sigma, 0.25 * prior_.upper);
      x = std::clamp(x, margin, prior_.upper - margin);
    }
    theta(static_cast<Eigen::Index>(i)) = x;
  }
  return unconstrain(theta);
}

std::vector<std::string> LogPosterior::parameter_names() const {
  std::vector<std::string> out = names_;
  if (out.size() != p_) {
    out.clear();
    for (std::size_t i = 0; i < p_; ++i) out.push_back("theta" + std::to_string(i));
  }
  for (std::size_t r : free_tau_rows_) out.push_back("tau:" + model_.labels[r]);
  return out;
}

Eigen::VectorXd LogPosterior::row_tau(const Eigen::VectorXd& z) const {
  Eigen::VectorXd tau = model_.tau;
  for (std::size_t k = 0; k < free_tau_rows_.size(); ++k)
    tau(static_cast<Eigen::Index>(free_tau_rows_[k])) = std::exp(z(static_cast<Eigen::Index>(p_ + k)));
  return tau;
}

}  // namespace bmfa
