#pragma once

// Survival and contamination of a trained model, the arctan accuracy law,
// and Monte Carlo accuracy estimates.
//
// For a test point x = Lambda^{1/2} z the score <f, x> splits into a part along
// the label coordinate, su * z_v, and an independent Gaussian remainder of
// standard deviation cn. Hence Pr[sgn <f, x> = sgn z_v] = 1/2 + arctan(su/cn)/pi.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "w2s/ensemble.hpp"
#include "w2s/error.hpp"
#include "w2s/interpolator.hpp"
#include "w2s/pipeline.hpp"
#include "w2s/random.hpp"
#include "w2s/stats.hpp"

namespace w2s {

struct SuCn {
  double su = 0.0;
  double cn = 0.0;
  /// su / cn; +-infinity when cn = 0 and su != 0, 0 when both vanish.
  double ratio = 0.0;
  /// f^T Lambda f, the variance of the test score.
  double total_var = 0.0;
};

inline void check_axis(const LinearModel& model, const Levels& levels, std::size_t axis) {
  if (model.dim() != levels.d) {
    fail(ErrorKind::dimension_mismatch,
         "model has " + std::to_string(model.dim()) + " coefficients, ensemble has d = " + std::to_string(levels.d));
  }
  if (axis >= levels.d) fail(ErrorKind::index_out_of_range, "axis " + std::to_string(axis) + " >= d");
}

/// sqrt(lambda_v) f[v] for the axis direction e_v.
inline double survival(const LinearModel& model, const Levels& levels, std::size_t axis) {
  check_axis(model, levels, axis);
  return levels.sqrt_lambda(axis) * model.coeffs[static_cast<Eigen::Index>(axis)];
}

/// sum_i sqrt(lambda_i) f[i] v[i] for a general direction v in the eigenbasis.
inline double survival_along(const LinearModel& model, const Levels& levels, std::span<const double> direction) {
  if (direction.size() != model.dim() || model.dim() != levels.d) {
    fail(ErrorKind::dimension_mismatch, "direction, model and ensemble dimensions differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < direction.size(); ++i) {
    acc += levels.sqrt_lambda(i) * model.coeffs[static_cast<Eigen::Index>(i)] * direction[i];
  }
  return acc;
}

inline double ratio_of(double su, double cn) noexcept {
  if (cn > 0.0) return su / cn;
  if (su == 0.0) return 0.0;
  return su > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

inline SuCn contamination(const LinearModel& model, const Levels& levels, std::size_t axis) {
  check_axis(model, levels, axis);
  SuCn out;
  out.su = survival(model, levels, axis);
  const auto s = static_cast<Eigen::Index>(levels.s);
  const auto& f = model.coeffs;
  out.total_var = levels.lambda_F * f.head(s).squaredNorm() + levels.lambda_U * f.tail(f.size() - s).squaredNorm();
  const double rest = out.total_var - out.su * out.su;
  if (rest < -1e-12 * out.total_var) {
    fail(ErrorKind::numerical_inconsistency, "su^2 exceeds f^T Lambda f");
  }
  out.cn = std::sqrt(std::max(rest, 0.0));
  out.ratio = ratio_of(out.su, out.cn);
  return out;
}

/// 1/2 + arctan(su/cn)/pi, with the cn = 0 limits.
inline double closed_form_accuracy(const SuCn& sucn) noexcept {
  if (sucn.cn == 0.0) {
    if (sucn.su > 0.0) return 1.0;
    if (sucn.su < 0.0) return 0.0;
    return 0.5;
  }
  return 0.5 + std::atan(sucn.su / sucn.cn) / std::numbers::pi;
}

struct AccuracyEstimate {
  double accuracy = 0.0;
  stats::Interval ci;
  std::size_t correct = 0;
  std::size_t total = 0;

  double stderr_hat() const { return stats::binomial_se(accuracy, total); }
};

inline AccuracyEstimate make_accuracy(std::size_t correct, std::size_t total) {
  AccuracyEstimate out;
  out.correct = correct;
  out.total = total;
  out.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  out.ci = stats::wilson95(correct, total);
  return out;
}

/// Accuracy on n_test fresh points of the sampler's ensemble, drawn in blocks.
inline AccuracyEstimate empirical_accuracy(std::span<const LinearModel> models, const EnsembleSampler& sampler,
                                           std::size_t n_test, random::StreamKey key, std::size_t block = 2000) {
  if (n_test < 1) fail(ErrorKind::invalid_params, "n_test must be >= 1");
  std::size_t correct = 0;
  for (std::size_t first = 0; first < n_test; first += block) {
    const std::size_t count = std::min(block, n_test - first);
    const SampleBatch batch = sampler.sample(count, key, first);
    correct += count_correct(models, batch, sampler.config().mode);
  }
  return make_accuracy(correct, n_test);
}

struct NoiseProbe {
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  /// E[sgn(g1) g2] = sqrt(2/pi) w for unit Gaussians with correlation w.
  double exact = 0.0;
  /// (2/pi)^{3/2} arcsin(w): the form carried by the survival asymptotics.
  double asymptotic_form = 0.0;
};

inline NoiseProbe noise_stability_probe(double w, std::size_t samples, random::StreamKey key) {
  if (!(std::abs(w) <= 1.0)) fail(ErrorKind::domain_error, "correlation must lie in [-1, 1]");
  if (samples < 2) fail(ErrorKind::invalid_params, "need at least two samples");
  random::Stream rng(key);
  const double orth = std::sqrt(1.0 - w * w);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double g1 = rng.normal();
    const double g2 = w * g1 + orth * rng.normal();
    const double v = sign(g1) * g2;
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  NoiseProbe out;
  out.mc_mean = sum / n;
  out.mc_stderr = std::sqrt(std::max(0.0, (sum_sq / n - out.mc_mean * out.mc_mean) / (n - 1.0)));
  out.exact = std::sqrt(2.0 / std::numbers::pi) * w;
  out.asymptotic_form = std::pow(2.0 / std::numbers::pi, 1.5) * std::asin(w);
  return out;
}

/// Survival/contamination trace of a clean binary MNI fit.
struct CleanTrace {
  Levels levels;
  SuCn sucn;
  double closed_form = 0.0;
  AccuracyEstimate empirical;
};

/// Clean binary MNI on n points of a bi-level ensemble, computed entirely in the
/// n-dimensional dual space so that d never has to be materialized.
///
/// With Z the latent train matrix split into favored and unfavored columns,
/// A = lambda_F Zf Zf^T + lambda_U Zu Zu^T, alpha = A^{-1} y, and the primal
/// coefficients are f_j = sqrt(lambda_j) z_j^T alpha. Then su = lambda_F z_0^T alpha,
/// f^T Lambda f = alpha^T (lambda_F^2 Zf Zf^T + lambda_U^2 Zu Zu^T) alpha, and test
/// scores are alpha^T (sum_j lambda_j z_j z_test,j). The latent entries are the same
/// counter-based normals a SampleBatch would hold, so the result matches the
/// explicit primal fit on the same keys.
inline CleanTrace trace_clean_fit(const BiLevelParams& params, std::size_t n_test, random::StreamKey train_key,
                                  random::StreamKey test_key, std::size_t block = 2048) {
  if (n_test < 1) fail(ErrorKind::invalid_params, "n_test must be >= 1");
  CleanTrace out;
  out.levels = derive_levels(params);
  const Levels& lv = out.levels;
  const auto n = static_cast<Eigen::Index>(params.n);
  const auto nt = static_cast<Eigen::Index>(n_test);
  if (params.n > lv.d) fail(ErrorKind::rank_deficient, "n > d");

  Eigen::MatrixXd gram_F = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd gram_U = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(n, nt);
  Eigen::VectorXd z0(n), z0_test(nt);

  RowMatrix Ztr, Zte;
  auto fill = [&](RowMatrix& Z, random::StreamKey key, Eigen::Index rows, std::size_t c0, std::size_t width) {
    Z.resize(rows, static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < rows; ++i) {
      random::fill_normal_row(key, static_cast<std::uint64_t>(i), c0, width, Z.row(i).data());
    }
  };

  for (std::size_t c0 = 0; c0 < lv.d;) {
    const bool favored = c0 < lv.s;
    const std::size_t width = favored ? lv.s : std::min(block, lv.d - c0);
    fill(Ztr, train_key, n, c0, width);
    fill(Zte, test_key, nt, c0, width);
    if (favored) {
      z0 = Ztr.col(0);
      z0_test = Zte.col(0);
    }
    Eigen::MatrixXd& gram = favored ? gram_F : gram_U;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(Ztr);
    cross.noalias() += (favored ? lv.lambda_F : lv.lambda_U) * (Ztr * Zte.transpose());
    c0 += width;
  }
  gram_F.triangularView<Eigen::StrictlyUpper>() = gram_F.transpose();
  gram_U.triangularView<Eigen::StrictlyUpper>() = gram_U.transpose();

  const Eigen::VectorXd y = z0.unaryExpr([](double v) { return sign(v); });
  Eigen::MatrixXd A = lv.lambda_F * gram_F + lv.lambda_U * gram_U;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    A.diagonal().array() += 1e-12 * A.trace() / static_cast<double>(n);
    llt.compute(A);
    if (llt.info() != Eigen::Success) fail(ErrorKind::singular_gram, "Cholesky failed after diagonal jitter");
  }
  const Eigen::VectorXd alpha = llt.solve(y);

  SuCn& sc = out.sucn;
  sc.su = lv.lambda_F * z0.dot(alpha);
  const Eigen::MatrixXd weighted = lv.lambda_F * lv.lambda_F * gram_F + lv.lambda_U * lv.lambda_U * gram_U;
  sc.total_var = alpha.dot(weighted * alpha);
  const double rest = sc.total_var - sc.su * sc.su;
  if (rest < -1e-12 * sc.total_var) fail(ErrorKind::numerical_inconsistency, "su^2 exceeds f^T Lambda f");
  sc.cn = std::sqrt(std::max(rest, 0.0));
  sc.ratio = ratio_of(sc.su, sc.cn);
  out.closed_form = closed_form_accuracy(sc);

  const Eigen::VectorXd test_scores = cross.transpose() * alpha;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < nt; ++i) correct += sign(test_scores[i]) == sign(z0_test[i]);
  out.empirical = make_accuracy(correct, n_test);
  return out;
}

}  // namespace w2s
