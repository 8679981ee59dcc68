#include "bmfa/normal_math.hpp"

#include <cmath>
#include <limits>

namespace bmfa::math {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Below this point erfc underflows; switch to the asymptotic Mills-ratio series.
constexpr double kAsymptoticCutoff = -30.0;

double upper_tail_draw(double a, double b, Rng& rng) {
  // 0 <= a < b. Robert (1995): exponential proposal unless the window is short.
  const double root = std::sqrt(a * a + 4.0);
  const double alpha = 0.5 * (a + root);
  const double cutoff = a + 2.0 / (a + root) * std::exp(0.25 * (a * a - a * root) + 0.5);
  if (b > cutoff) {
    for (;;) {
      const double x = a - std::log(uniform01(rng)) / alpha;
      if (x > b) continue;
      const double d = x - alpha;
      if (uniform01(rng) <= std::exp(-0.5 * d * d)) return x;
    }
  }
  for (;;) {
    const double x = a + (b - a) * uniform01(rng);
    if (uniform01(rng) <= std::exp(0.5 * (a * a - x * x))) return x;
  }
}

double std_truncated_draw(double a, double b, Rng& rng) {
  if (!(a < b)) return a;
  if (a >= 0.0) return upper_tail_draw(a, b, rng);
  if (b <= 0.0) return -upper_tail_draw(-b, -a, rng);
  if (log_std_normal_mass(a, b) > std::log(0.3)) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
      const double x = normal(rng);
      if (x >= a && x <= b) return x;
    }
  }
  // short window straddling zero: uniform proposal, density peak at 0
  for (;;) {
    const double x = a + (b - a) * uniform01(rng);
    if (uniform01(rng) <= std::exp(-0.5 * x * x)) return x;
  }
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double log_std_normal_cdf(double x) {
  if (x == kInf) return 0.0;
  if (x == -kInf) return -kInf;
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  if (x > kAsymptoticCutoff) return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

double log1mexp(double x) {
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

double log_std_normal_mass(double a, double b) {
  if (!(a < b)) return -kInf;
  if (a >= 0.0) {
    // both bounds in the upper tail: Phi(-a) - Phi(-b)
    const double la = log_std_normal_cdf(-a);
    const double lb = log_std_normal_cdf(-b);
    return la + log1mexp(lb - la);
  }
  if (b <= 0.0) {
    const double lb = log_std_normal_cdf(b);
    const double la = log_std_normal_cdf(a);
    return lb + log1mexp(la - lb);
  }
  return std::log1p(-std_normal_cdf(a) - std_normal_cdf(-b));
}

double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng) {
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  const double x = mean + sd * std_truncated_draw(a, b, rng);
  if (x < lower) return lower;
  if (x > upper) return upper;
  return x;
}

double uniform01(Rng& rng) {
  // 53 random bits, shifted off zero
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace bmfa::math
