#pragma once

// Small descriptive statistics used by the diagnostics and the harness.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace w2s::stats {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double low = 0.0;
  double high = 0.0;

  bool overlaps(const Interval& other) const noexcept { return low <= other.high && other.low <= high; }
};

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Unbiased sample variance; zero for a single observation.
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return acc / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

inline double median(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Two-sided 95% Student-t interval for the mean.
inline Interval mean_ci95(std::span<const double> xs) {
  const double mu = mean(xs);
  if (xs.size() < 2) return {mu, mu};
  const double dof = static_cast<double>(xs.size() - 1);
  const double tq = boost::math::quantile(boost::math::students_t(dof), 0.975);
  const double half = tq * stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
  return {mu - half, mu + half};
}

/// Wilson score interval for a binomial proportion.
inline Interval wilson95(std::size_t successes, std::size_t trials) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / n;
  const double centre = (phat + z2 / (2.0 * n)) / denom;
  const double half = kZ95 * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Binomial standard error sqrt(p(1-p)/n).
inline double binomial_se(double p, std::size_t trials) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("pearson: bad sizes");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct RankCorrelation {
  double rho = 0.0;
  /// One-sided p-value for rho > 0 (Student-t approximation, n - 2 dof).
  double p_positive = 1.0;
  std::size_t count = 0;
};

inline RankCorrelation spearman(std::span<const double> xs, std::span<const double> ys) {
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  RankCorrelation out;
  out.count = xs.size();
  out.rho = pearson(rx, ry);
  if (out.count < 3) return out;
  const double dof = static_cast<double>(out.count - 2);
  const double r = std::clamp(out.rho, -1.0 + 1e-15, 1.0 - 1e-15);
  const double tstat = r * std::sqrt(dof / (1.0 - r * r));
  out.p_positive = boost::math::cdf(boost::math::complement(boost::math::students_t(dof), tstat));
  return out;
}

/// Least-squares slope of ys against xs.
inline double ols_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("ols_slope: bad sizes");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace w2s::stats
