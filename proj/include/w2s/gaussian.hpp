#pragma once

#include <cmath>
#include <numbers>

namespace w2s::gaussian {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176;

inline double pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double log_pdf(double x) noexcept { return -0.5 * x * x - kLogSqrt2Pi; }

/// Standard normal CDF.
inline double cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// log Phi(x) with full relative accuracy in both tails.
///
/// For x > 0 the upper tail goes through log1p so that N * log Phi(x) keeps its
/// digits when Phi(x) is within rounding of 1; below x = -37 erfc underflows and
/// the Mills-ratio asymptotic series takes over.
inline double log_cdf(double x) noexcept {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  const double inv2 = 1.0 / (x * x);
  // 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8
  const double series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)));
  return log_pdf(x) - std::log(-x) + std::log(series);
}

/// Phi(x)^power evaluated as exp(power * log Phi(x)).
inline double cdf_pow(double x, double power) noexcept { return std::exp(power * log_cdf(x)); }

}  // namespace w2s::gaussian
