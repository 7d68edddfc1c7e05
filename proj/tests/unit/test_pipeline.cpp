#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "w2s/diagnostics.hpp"
#include "w2s/pipeline.hpp"

using namespace w2s;

namespace {

const random::StreamKey kBase{20240601};

}  // namespace

TEST(TrainWeak, InterpolatesCleanLabels) {
  const EnsembleSampler sampler{W2SConfig{}};
  const WeakFit wf = train_weak(sampler, kBase);
  ASSERT_EQ(wf.models.size(), 1u);
  EXPECT_EQ(wf.models[0].dim(), 239u);
  EXPECT_EQ(wf.batch.count, 50u);
  const Eigen::VectorXd fitted = wf.batch.weak_X * wf.models[0].coeffs;
  EXPECT_LE((fitted - wf.batch.labels.col(0)).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(TrainWeak, MultilabelHeadsInterpolateEachHead) {
  W2SConfig c;
  c.mode = Mode::multilabel;
  c.k = 2;
  const EnsembleSampler sampler(c);
  const WeakFit wf = train_weak(sampler, kBase);
  ASSERT_EQ(wf.models.size(), 2u);
  EXPECT_NE(wf.models[0].coeffs, wf.models[1].coeffs);
  for (int h = 0; h < 2; ++h) {
    const Eigen::VectorXd fitted = wf.batch.weak_X * wf.models[static_cast<std::size_t>(h)].coeffs;
    EXPECT_LE((fitted - wf.batch.labels.col(h)).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Pseudolabel, AxisModelAndTieRule) {
  const EnsembleSampler sampler{W2SConfig{}};
  const SampleBatch b = sampler.sample(100, kBase);
  LinearModel e1{Eigen::VectorXd::Zero(239), FeatureSpace::weak};
  e1.coeffs[0] = 1.0;
  const Eigen::MatrixXd y = pseudolabel(std::vector{e1}, b);
  for (Eigen::Index i = 0; i < 100; ++i) EXPECT_EQ(y(i, 0), sign(b.weak_X(i, 0)));
  const LinearModel zero{Eigen::VectorXd::Zero(239), FeatureSpace::weak};
  EXPECT_TRUE((pseudolabel(std::vector{zero}, b).array() == 1.0).all());
  EXPECT_W2S_ERROR(pseudolabel(std::vector<LinearModel>{}, b), ErrorKind::empty_model_list);
}

TEST(Embed, AxisAndNorm) {
  const SubsetLink link = build_subset_link(W2SConfig{});
  LinearModel e1{Eigen::VectorXd::Zero(239), FeatureSpace::weak};
  e1.coeffs[0] = 1.0;
  const LinearModel g = embed_weak_into_strong(e1, link);
  EXPECT_EQ(g.space, FeatureSpace::strong);
  EXPECT_EQ(g.dim(), 2500u);
  EXPECT_EQ(g.coeffs[0], link.scale_F);
  EXPECT_EQ(g.coeffs.tail(2499).squaredNorm(), 0.0);
  const LinearModel zero{Eigen::VectorXd::Zero(239), FeatureSpace::weak};
  EXPECT_EQ(embed_weak_into_strong(zero, link).coeffs.norm(), 0.0);
  EXPECT_W2S_ERROR(embed_weak_into_strong(LinearModel{Eigen::VectorXd::Zero(10)}, link),
                   ErrorKind::dimension_mismatch);
}

TEST(Embed, ReproducesWeakScoresAndPseudolabels) {
  const EnsembleSampler sampler{W2SConfig{}};
  const WeakFit wf = train_weak(sampler, kBase);
  const LinearModel g = embed_weak_into_strong(wf.models[0], sampler.link());
  const SampleBatch b = sampler.sample(10000, stage_key(kBase, Stage::test));
  const Eigen::VectorXd weak_scores = b.weak_X * wf.models[0].coeffs;
  const Eigen::VectorXd strong_scores = b.strong_X * g.coeffs;
  EXPECT_LE((weak_scores - strong_scores).lpNorm<Eigen::Infinity>(), 1e-10 * weak_scores.lpNorm<Eigen::Infinity>());
  const Eigen::MatrixXd labels = pseudolabel(wf.models, b);
  std::size_t mismatches = 0;
  for (Eigen::Index i = 0; i < 10000; ++i) mismatches += sign(strong_scores[i]) != labels(i, 0);
  EXPECT_EQ(mismatches, 0u);
}

TEST(MultilabelLoss, SingleHeadAndPerfectHeads) {
  W2SConfig c;
  c.mode = Mode::multilabel;
  c.k = 3;
  const EnsembleSampler sampler(c);
  const SampleBatch b = sampler.sample(2000, kBase);
  std::vector<LinearModel> perfect;
  for (int h = 0; h < 3; ++h) {
    LinearModel m{Eigen::VectorXd::Zero(2500)};
    m.coeffs[h] = 1.0;
    perfect.push_back(m);
  }
  EXPECT_EQ(multilabel_loss(perfect, b), 0.0);

  LinearModel noisy{Eigen::VectorXd::Zero(2500)};
  noisy.coeffs[0] = 1.0;
  noisy.coeffs[100] = 3.0;
  const std::vector<LinearModel> one{noisy};
  const double binary_error = 1.0 - static_cast<double>(count_correct(one, b, Mode::binary)) / 2000.0;
  EXPECT_DOUBLE_EQ(multilabel_loss(one, b), binary_error);
}

TEST(MultilabelLoss, IndependentHeadErrorsCompose) {
  W2SConfig c;
  c.mode = Mode::multilabel;
  c.k = 3;
  const EnsembleSampler sampler(c);
  const std::size_t count = 20000;
  const SampleBatch b = sampler.sample(count, kBase);
  // Head h sees its own favored coordinate plus an independent unfavored one.
  std::vector<LinearModel> heads;
  const double noise = 2.0;
  for (int h = 0; h < 3; ++h) {
    LinearModel m{Eigen::VectorXd::Zero(2500)};
    m.coeffs[h] = 1.0;
    m.coeffs[100 + h] = noise;
    heads.push_back(m);
  }
  const Levels lv = sampler.strong();
  const SuCn sc = contamination(heads[0], lv, 0);
  const double eps = 1.0 - closed_form_accuracy(sc);
  const double expected = 1.0 - std::pow(1.0 - eps, 3);
  const double se = std::sqrt(expected * (1 - expected) / count);
  EXPECT_NEAR(multilabel_loss(heads, b), expected, 3 * se);
}

TEST(TrainW2s, ReferenceRun) {
  W2SConfig c;
  const RunSeeds seeds{stage_key(kBase, Stage::weak_train), stage_key(kBase, Stage::unlabeled)};
  const W2SRun run = train_w2s(c, seeds, {true, true, true, false});
  EXPECT_EQ(run.m, 89u);
  ASSERT_EQ(run.f_wts.size(), 1u);
  ASSERT_TRUE(run.f_wts_avg && run.f_strong_clean_m && run.f_strong_clean_n);

  // Regenerate the pool to check interpolation of the pseudolabels.
  const EnsembleSampler sampler(c);
  const SampleBatch pool = sampler.sample(run.m, seeds.unlabeled);
  const Eigen::MatrixXd y = pseudolabel(run.f_weak, pool);
  const Eigen::VectorXd fitted = pool.strong_X * run.f_wts[0].coeffs;
  EXPECT_LE((fitted - y.col(0)).lpNorm<Eigen::Infinity>(), 1e-8);

  // Agreement is the weak model's accuracy on the pool.
  const double acc = static_cast<double>(count_correct(run.f_weak, pool, Mode::binary)) / static_cast<double>(run.m);
  EXPECT_DOUBLE_EQ(run.pseudolabel_agreement, acc);

  const Eigen::VectorXd clean_fit = pool.strong_X * (*run.f_strong_clean_m)[0].coeffs;
  EXPECT_LE((clean_fit - pool.labels.col(0)).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(TrainW2s, RejectsInvalidUnlessForced) {
  W2SConfig c;
  c.u = 1.25;
  const RunSeeds seeds{random::StreamKey{1}, random::StreamKey{2}};
  EXPECT_W2S_ERROR(train_w2s(c, seeds), ErrorKind::config_invalid);
  EXPECT_NO_THROW(train_w2s(c, seeds, {}, true));
}

TEST(TrainW2s, SoftPseudolabelsFitScores) {
  W2SConfig c;
  const RunSeeds seeds{random::StreamKey{3}, random::StreamKey{4}};
  const W2SRun run = train_w2s(c, seeds, {false, false, false, true});
  const EnsembleSampler sampler(c);
  const SampleBatch pool = sampler.sample(run.m, seeds.unlabeled);
  const Eigen::MatrixXd soft = pseudolabel(run.f_weak, pool, true);
  const Eigen::VectorXd fitted = pool.strong_X * run.f_wts[0].coeffs;
  EXPECT_LE((fitted - soft.col(0)).lpNorm<Eigen::Infinity>(), 1e-8 * std::max(1.0, soft.lpNorm<Eigen::Infinity>()));
}

TEST(TrainW2s, MulticlassUsesCenteredOneHotForCleanBaselines) {
  W2SConfig c;
  c.mode = Mode::multiclass;
  c.k = 3;
  const EnsembleSampler sampler(c);
  const SampleBatch b = sampler.sample(10, kBase);
  const Eigen::MatrixXd Y = clean_targets(b, Mode::multiclass);
  for (Eigen::Index i = 0; i < 10; ++i) {
    EXPECT_NEAR(Y.row(i).sum(), 0.0, 1e-15);
    EXPECT_NEAR(Y(i, static_cast<Eigen::Index>(b.classes[static_cast<std::size_t>(i)])), 2.0 / 3.0, 1e-15);
  }
}
