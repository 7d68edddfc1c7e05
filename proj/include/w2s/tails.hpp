#pragma once

// Lower tail of the maximum of N equicorrelated standard Gaussians.
//
// With g_i = sqrt(rho0) x + sqrt(1 - rho0) h_i the event max g_i <= t, given
// the shared factor x, has probability Phi((t - sqrt(rho0) x) / sqrt(1 - rho0))^N.
// Integrating that over x gives the exact value; averaging it over sampled x
// gives a conditional Monte Carlo estimate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "w2s/error.hpp"
#include "w2s/gaussian.hpp"
#include "w2s/random.hpp"

namespace w2s::tails {

struct TailParams {
  std::size_t N = 100;
  double rho0 = 0.5;
  double delta0 = 0.0;
  /// delta0 * sqrt(2 (1 - rho0) ln N)
  double t_N = 0.0;
  /// sqrt(rho0 / (1 - rho0))
  double C = 1.0;
  /// (1 - delta0)^2 (1 - 1/rho0)
  double exp_N = -1.0;
  /// (1 - rho0 (2 - delta0) - delta0) / (2 rho0)
  double exp_log = 0.0;
};

inline void check_correlation(double rho0) {
  if (!(rho0 > 0.0 && rho0 < 1.0)) fail(ErrorKind::domain_error, "rho0 must lie in (0, 1)");
}

inline TailParams make_tail_params(std::size_t N, double rho0, double delta0) {
  check_correlation(rho0);
  if (!(delta0 >= 0.0 && delta0 < 1.0)) fail(ErrorKind::domain_error, "delta0 must lie in [0, 1)");
  if (N < 1) fail(ErrorKind::domain_error, "N must be >= 1");
  TailParams p;
  p.N = N;
  p.rho0 = rho0;
  p.delta0 = delta0;
  p.t_N = delta0 * std::sqrt(2.0 * (1.0 - rho0) * std::log(static_cast<double>(N)));
  p.C = std::sqrt(rho0 / (1.0 - rho0));
  p.exp_N = (1.0 - delta0) * (1.0 - delta0) * (1.0 - 1.0 / rho0);
  p.exp_log = (1.0 - rho0 * (2.0 - delta0) - delta0) / (2.0 * rho0);
  return p;
}

struct TailBound {
  double raw = 0.0;
  /// min(raw, 1)
  double clipped = 0.0;
};

/// C N^exp_N (ln N)^exp_log, evaluated through its logarithm.
inline TailBound tail_bound(const TailParams& p) {
  check_correlation(p.rho0);
  if (!(p.delta0 >= 0.0 && p.delta0 < 1.0)) fail(ErrorKind::domain_error, "delta0 must lie in [0, 1)");
  if (p.N < 3) fail(ErrorKind::domain_error, "the bound needs N >= 3");
  const double logN = std::log(static_cast<double>(p.N));
  const double log_bound = std::log(p.C) + p.exp_N * logN + p.exp_log * std::log(logN);
  TailBound out;
  out.raw = std::exp(log_bound);
  out.clipped = log_bound >= 0.0 ? 1.0 : out.raw;
  return out;
}

struct QuadratureOptions {
  double half_width = 12.0;
  unsigned max_depth = 15;
  double relative_tol = 1e-12;
  double absolute_target = 1e-10;
};

/// Pr[max_i g_i <= t] for N unit Gaussians with common correlation rho0.
///
/// Adaptive 15-point Gauss-Kronrod on each unit panel of [-12, 12]; the
/// truncated Gaussian mass is below 1e-30.
inline double exact_tail_quadrature(std::size_t N, double rho0, double t, const QuadratureOptions& opt = {}) {
  check_correlation(rho0);
  if (N < 1) fail(ErrorKind::domain_error, "N must be >= 1");
  if (!std::isfinite(t)) fail(ErrorKind::domain_error, "threshold must be finite");
  const double a = std::sqrt(rho0);
  const double b = std::sqrt(1.0 - rho0);
  const double power = static_cast<double>(N);
  auto integrand = [&](double s) { return std::exp(gaussian::log_pdf(s) + power * gaussian::log_cdf((t - a * s) / b)); };

  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  double total = 0.0;
  double error = 0.0;
  for (double lo = -opt.half_width; lo < opt.half_width; lo += 1.0) {
    double panel_error = 0.0;
    total += GK::integrate(integrand, lo, lo + 1.0, opt.max_depth, opt.relative_tol, &panel_error);
    error += panel_error;
  }
  if (!(error <= opt.absolute_target) || !std::isfinite(total)) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "error estimate %.3g above target %.3g", error, opt.absolute_target);
    fail(ErrorKind::quadrature_nonconvergence, msg);
  }
  return total;
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Mode of the log-concave conditional integrand phi(x) Phi((t - a x)/b)^N.
inline double conditional_mode(double power, double a, double b, double t) {
  auto log_f = [&](double x) { return gaussian::log_pdf(x) + power * gaussian::log_cdf((t - a * x) / b); };
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-9; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (log_f(m1) < log_f(m2)) lo = m1;
    else hi = m2;
  }
  return 0.5 * (lo + hi);
}

/// Monte Carlo estimate of the same probability. Sample i uses only the
/// counter-based normals of row i, so the result does not depend on how the
/// samples are batched.
///
/// The conditional estimator draws the shared factor from N(mu, 1) centred at
/// the integrand's mode and reweights by phi(x)/phi(x - mu). For small
/// probabilities the mass sits far in the factor's tail, where unshifted
/// draws almost never land.
inline McEstimate mc_tail_estimate(std::size_t N, double rho0, double t, std::size_t samples, random::StreamKey key,
                                   bool naive = false) {
  check_correlation(rho0);
  if (N < 1) fail(ErrorKind::domain_error, "N must be >= 1");
  if (samples < 1000) fail(ErrorKind::invalid_params, "need at least 1000 samples");
  const double a = std::sqrt(rho0);
  const double b = std::sqrt(1.0 - rho0);
  const double power = static_cast<double>(N);
  const double mu = naive ? 0.0 : conditional_mode(power, a, b, t);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = random::normal_at(key, i, 0) + mu;
    double v;
    if (naive) {
      bool below = true;
      for (std::size_t j = 0; j < N && below; ++j) below = a * x + b * random::normal_at(key, i, j + 1) <= t;
      v = below ? 1.0 : 0.0;
    } else {
      v = std::exp(power * gaussian::log_cdf((t - a * x) / b) - mu * x + 0.5 * mu * mu);
    }
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  McEstimate out;
  out.estimate = sum / n;
  out.std_error = std::sqrt(std::max(0.0, (sum_sq / n - out.estimate * out.estimate) / (n - 1.0)));
  return out;
}

}  // namespace w2s::tails
