#pragma once

// The weak-to-strong training procedure: a weak MNI model fit on n clean
// points labels m fresh points, and a strong MNI model is fit on those hard
// pseudolabels.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "w2s/ensemble.hpp"
#include "w2s/error.hpp"
#include "w2s/interpolator.hpp"
#include "w2s/random.hpp"

namespace w2s {

/// Substream tags; part of the seed-derivation contract.
enum class Stage : std::uint64_t {
  weak_train = 1,
  unlabeled = 2,
  test = 3,
  weak_test = 4,
  clean_train = 5,
  probe = 6,
};

inline random::StreamKey stage_key(random::StreamKey base, Stage stage, std::uint64_t a = 0, std::uint64_t b = 0,
                                   std::uint64_t c = 0) {
  return random::derive(base, {a, b, c, static_cast<std::uint64_t>(stage)});
}

/// Features of `batch` that a model in `space` sees.
inline const RowMatrix& features(const SampleBatch& batch, FeatureSpace space) {
  return space == FeatureSpace::weak ? batch.weak_X : batch.strong_X;
}

/// count x heads score matrix.
inline Eigen::MatrixXd scores(std::span<const LinearModel> models, const SampleBatch& batch) {
  const Eigen::MatrixXd W = stack_coeffs(models);
  const RowMatrix& X = features(batch, models.front().space);
  if (X.cols() != W.rows()) fail(ErrorKind::dimension_mismatch, "model and batch feature dimensions differ");
  return X * W;
}

/// Clean training targets: the +-1 heads, or centered one-hot rows for multiclass.
inline Eigen::MatrixXd clean_targets(const SampleBatch& batch, Mode mode) {
  if (mode != Mode::multiclass) return batch.labels;
  const auto k = batch.labels.cols();
  Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(batch.count), k, -1.0 / double(k));
  for (std::size_t i = 0; i < batch.count; ++i) Y(static_cast<Eigen::Index>(i), batch.classes[i]) += 1.0;
  return Y;
}

/// Number of points of `batch` the models classify correctly under `mode`.
///
/// Binary: sign of the single head. Multilabel: every head's sign right.
/// Multiclass: argmax over heads (lowest index on ties) equals the class.
inline std::size_t count_correct(std::span<const LinearModel> models, const SampleBatch& batch, Mode mode) {
  const Eigen::MatrixXd S = scores(models, batch);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    if (mode == Mode::multiclass) {
      Eigen::Index best = 0;
      for (Eigen::Index h = 1; h < S.cols(); ++h) {
        if (S(i, h) > S(i, best)) best = h;
      }
      correct += static_cast<std::size_t>(best) == batch.classes[static_cast<std::size_t>(i)];
    } else {
      bool all = true;
      for (Eigen::Index h = 0; h < S.cols(); ++h) all = all && sign(S(i, h)) == batch.labels(i, h);
      correct += all;
    }
  }
  return correct;
}

/// Weak model(s) together with the clean batch they were fit on.
struct WeakFit {
  SampleBatch batch;
  std::vector<LinearModel> models;
};

inline WeakFit train_weak(const EnsembleSampler& sampler, random::StreamKey key) {
  WeakFit out;
  out.batch = sampler.sample(sampler.config().n, key);
  out.models = fit_mni_heads(out.batch.weak_X, out.batch.labels, FeatureSpace::weak);
  return out;
}

/// MNI on the weak features of n clean points; one model per head.
inline std::vector<LinearModel> train_weak(const W2SConfig& config, random::StreamKey key) {
  return train_weak(EnsembleSampler(config), key).models;
}

/// Hard pseudolabels sgn(<f_weak, x_weak>) (ties to +1), count x heads.
/// With `soft` the raw weak scores are returned instead.
inline Eigen::MatrixXd pseudolabel(std::span<const LinearModel> f_weak, const SampleBatch& batch, bool soft = false) {
  if (f_weak.empty()) fail(ErrorKind::empty_model_list, "no weak models");
  if (f_weak.front().space != FeatureSpace::weak) fail(ErrorKind::dimension_mismatch, "pseudolabels need weak models");
  Eigen::MatrixXd S = scores(f_weak, batch);
  if (!soft) S = S.unaryExpr([](double v) { return sign(v); });
  return S;
}

/// Strong-space model g with <g, x_strong> = <f_weak, x_weak> for every point.
inline LinearModel embed_weak_into_strong(const LinearModel& f_weak, const SubsetLink& link) {
  if (f_weak.dim() != link.weak_dim()) {
    fail(ErrorKind::dimension_mismatch,
         "weak model has " + std::to_string(f_weak.dim()) + " coefficients, link expects " +
             std::to_string(link.weak_dim()));
  }
  LinearModel g{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(link.strong_dim)), FeatureSpace::strong,
                f_weak.method};
  for (std::size_t j = 0; j < link.weak_dim(); ++j) {
    g.coeffs[static_cast<Eigen::Index>(link.strong_index(j))] = link.scale(j) * f_weak.coeffs[static_cast<Eigen::Index>(j)];
  }
  return g;
}

/// Fraction of test points with at least one head wrong.
inline double multilabel_loss(std::span<const LinearModel> models, const SampleBatch& test) {
  if (models.empty()) fail(ErrorKind::empty_model_list, "no heads");
  if (static_cast<Eigen::Index>(models.size()) > test.labels.cols()) {
    fail(ErrorKind::dimension_mismatch, "more heads than test labels");
  }
  const std::size_t correct = count_correct(models, test, Mode::multilabel);
  return 1.0 - static_cast<double>(correct) / static_cast<double>(test.count);
}

struct RunOptions {
  bool clean_m = false;
  bool clean_n = false;
  bool averaging = false;
  bool soft_pseudolabels = false;
};

struct RunSeeds {
  random::StreamKey weak_train;
  random::StreamKey unlabeled;
};

struct W2SRun {
  std::vector<LinearModel> f_weak;
  std::vector<LinearModel> f_wts;
  std::optional<std::vector<LinearModel>> f_wts_avg;
  std::optional<std::vector<LinearModel>> f_strong_clean_m;
  std::optional<std::vector<LinearModel>> f_strong_clean_n;
  double pseudolabel_agreement = 0.0;
  std::size_t m = 0;
  RunSeeds seeds;
};

/// Steps (2)-(4) for an already trained weak model. The m unlabeled points are
/// drawn once; the weak learner labels their weak view and the strong learner
/// trains on their strong view. True labels are only used for diagnostics and
/// the optional clean baselines.
inline W2SRun train_w2s_from_weak(const EnsembleSampler& sampler, const WeakFit& weak, random::StreamKey unlabeled_key,
                                  const RunOptions& options = {}) {
  const W2SConfig& config = sampler.config();
  W2SRun run;
  run.f_weak = weak.models;
  run.m = config.m();
  run.seeds.unlabeled = unlabeled_key;

  const SampleBatch pool = sampler.sample(run.m, unlabeled_key);
  const Eigen::MatrixXd soft_or_hard = pseudolabel(weak.models, pool, options.soft_pseudolabels);
  const Eigen::MatrixXd hard = soft_or_hard.unaryExpr([](double v) { return sign(v); });

  std::size_t agree = 0;
  for (Eigen::Index i = 0; i < hard.rows(); ++i) agree += (hard.row(i).array() == pool.labels.row(i).array()).all();
  run.pseudolabel_agreement = static_cast<double>(agree) / static_cast<double>(run.m);

  // The pseudolabel fit and the clean-m fit share the Gram factorization.
  const GramSolver solver(pool.strong_X);
  auto mni_from = [&](const Eigen::MatrixXd& Y) {
    const Eigen::MatrixXd coeffs = pool.strong_X.transpose() * solver.solve(Y);
    std::vector<LinearModel> out;
    for (Eigen::Index h = 0; h < coeffs.cols(); ++h) out.push_back({coeffs.col(h), FeatureSpace::strong, FitMethod::mni});
    return out;
  };
  run.f_wts = mni_from(soft_or_hard);
  if (options.averaging) run.f_wts_avg = fit_avg_heads(pool.strong_X, soft_or_hard, FeatureSpace::strong);
  if (options.clean_m) run.f_strong_clean_m = mni_from(clean_targets(pool, config.mode));
  if (options.clean_n) {
    run.f_strong_clean_n = fit_mni_heads(weak.batch.strong_X, clean_targets(weak.batch, config.mode));
  }
  return run;
}

/// Full procedure from a configuration. Throws ConfigInvalid when the
/// configuration violates the theorem hypotheses unless `force` is set.
inline W2SRun train_w2s(const W2SConfig& config, const RunSeeds& seeds, const RunOptions& options = {},
                        bool force = false) {
  if (!force) {
    const auto violations = validate_w2s(config);
    if (!violations.empty()) {
      std::string names;
      for (const auto& v : violations) names += (names.empty() ? "" : "; ") + v.name;
      fail(ErrorKind::config_invalid, "configuration violates: " + names);
    }
  }
  const EnsembleSampler sampler(config);
  const WeakFit weak = train_weak(sampler, seeds.weak_train);
  W2SRun run = train_w2s_from_weak(sampler, weak, seeds.unlabeled, options);
  run.seeds.weak_train = seeds.weak_train;
  return run;
}

}  // namespace w2s
