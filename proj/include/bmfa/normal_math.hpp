#pragma once

#include <cstdint>
#include <random>

namespace bmfa::math {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kInvSqrt2 = 0.70710678118654752440;

using Rng = std::mt19937_64;

/// Standard normal log-density.
inline double log_std_normal_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double std_normal_cdf(double x);

/// log Phi(x), accurate far into the lower tail (x << 0).
double log_std_normal_cdf(double x);

/// log(1 - exp(x)) for x <= 0.
double log1mexp(double x);

double log_sum_exp(double a, double b);

/// log(Phi(b) - Phi(a)) for a <= b; either bound may be infinite.
/// Picks the tail that avoids cancellation.
double log_std_normal_mass(double a, double b);

/// Draw from N(mean, sd^2) restricted to [lower, upper].
double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng);

/// Uniform draw on the open interval (0, 1).
double uniform01(Rng& rng);

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace bmfa::math
