#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "w2s/diagnostics.hpp"

using namespace w2s;

namespace {

Levels toy_levels() {
  Levels lv;
  lv.d = 4;
  lv.s = 2;
  lv.lambda_F = 4.0;
  lv.lambda_U = 1.0;
  return lv;
}

LinearModel random_model(std::size_t d, random::StreamKey key) {
  LinearModel m{Eigen::VectorXd(static_cast<Eigen::Index>(d))};
  random::fill_normal_row(key, 0, 0, d, m.coeffs.data());
  return m;
}

}  // namespace

TEST(Survival, AxisExamples) {
  const Levels lv = toy_levels();
  EXPECT_DOUBLE_EQ(survival(LinearModel{Eigen::Vector4d(1, 0, 0, 0)}, lv, 0), 2.0);
  EXPECT_DOUBLE_EQ(survival(LinearModel{Eigen::Vector4d(0, 1, 0, 0)}, lv, 0), 0.0);
  EXPECT_W2S_ERROR(survival(LinearModel{Eigen::Vector4d(1, 0, 0, 0)}, lv, 4), ErrorKind::index_out_of_range);
  EXPECT_W2S_ERROR(survival(LinearModel{Eigen::Vector3d(1, 0, 0)}, lv, 0), ErrorKind::dimension_mismatch);
}

TEST(Survival, MatchesBruteForceSum) {
  const Levels lv = derive_levels({50, {2.0, 0.6, 0.6}});
  const LinearModel f = random_model(lv.d, random::StreamKey{4});
  for (std::size_t v : {0u, 5u, 9u, 10u, 1234u}) {
    std::vector<double> e(lv.d, 0.0);
    e[v] = 1.0;
    EXPECT_NEAR(survival(f, lv, v), survival_along(f, lv, e), 1e-14);
  }
}

TEST(Contamination, HandExamples) {
  const Levels lv = toy_levels();
  const SuCn axis = contamination(LinearModel{Eigen::Vector4d(1, 0, 0, 0)}, lv, 0);
  EXPECT_EQ(axis.cn, 0.0);
  EXPECT_EQ(closed_form_accuracy(axis), 1.0);
  const SuCn two = contamination(LinearModel{Eigen::Vector4d(1, 1, 0, 0)}, lv, 0);
  EXPECT_DOUBLE_EQ(two.su, 2.0);
  EXPECT_DOUBLE_EQ(two.cn, 2.0);
  EXPECT_DOUBLE_EQ(two.ratio, 1.0);
  EXPECT_DOUBLE_EQ(closed_form_accuracy(two), 0.75);
}

TEST(Contamination, ConservationAndScaleEquivariance) {
  const Levels lv = derive_levels({50, {2.0, 0.6, 0.6}});
  for (std::uint64_t k = 0; k < 20; ++k) {
    const LinearModel f = random_model(lv.d, random::StreamKey{k});
    const SuCn a = contamination(f, lv, 0);
    EXPECT_NEAR(a.su * a.su + a.cn * a.cn, a.total_var, 1e-10 * a.total_var);
    const SuCn b = contamination(LinearModel{3.5 * f.coeffs}, lv, 0);
    EXPECT_NEAR(b.su, 3.5 * a.su, 1e-12 * std::abs(b.su) + 1e-300);
    EXPECT_NEAR(b.cn, 3.5 * a.cn, 1e-12 * b.cn);
    EXPECT_NEAR(b.ratio, a.ratio, 1e-12 * std::abs(a.ratio));
    EXPECT_NEAR(closed_form_accuracy(b), closed_form_accuracy(a), 1e-14);
  }
}

TEST(Contamination, TotalVarianceIsScoreVariance) {
  W2SConfig c;
  const EnsembleSampler sampler(c);
  const LinearModel f = random_model(sampler.strong().d, random::StreamKey{99});
  const SampleBatch b = sampler.sample(100000, random::StreamKey{100});
  const Eigen::VectorXd scores = b.strong_X * f.coeffs;
  const double var = scores.squaredNorm() / 100000.0;
  const SuCn sc = contamination(f, sampler.strong(), 0);
  // Var of a sample variance of Gaussians: 2 sigma^4 / n.
  EXPECT_NEAR(var, sc.total_var, 5.0 * sc.total_var * std::sqrt(2.0 / 100000.0));
}

TEST(ClosedForm, Limits) {
  EXPECT_DOUBLE_EQ(closed_form_accuracy({0.0, 1.0, 0.0, 1.0}), 0.5);
  EXPECT_DOUBLE_EQ(closed_form_accuracy({1.0, 0.0, ratio_of(1.0, 0.0), 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(closed_form_accuracy({-1.0, 0.0, ratio_of(-1.0, 0.0), 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(closed_form_accuracy({0.0, 0.0, 0.0, 0.0}), 0.5);
  EXPECT_TRUE(std::isinf(ratio_of(1.0, 0.0)));
}

TEST(EmpiricalAccuracy, TrueDirectionAndPureNoise) {
  const EnsembleSampler sampler{W2SConfig{}};
  LinearModel e1{Eigen::VectorXd::Zero(2500)};
  e1.coeffs[0] = 1.0;
  EXPECT_EQ(empirical_accuracy(std::vector{e1}, sampler, 5000, random::StreamKey{1}).accuracy, 1.0);
  LinearModel e2{Eigen::VectorXd::Zero(2500)};
  e2.coeffs[1] = 1.0;
  const auto est = empirical_accuracy(std::vector{e2}, sampler, 10000, random::StreamKey{2});
  EXPECT_NEAR(est.accuracy, 0.5, 3 * std::sqrt(0.25 / 10000));
  EXPECT_LE(est.ci.low, est.accuracy);
  EXPECT_GE(est.ci.high, est.accuracy);
}

TEST(EmpiricalAccuracy, BlockSizeDoesNotChangeResult) {
  const EnsembleSampler sampler{W2SConfig{}};
  const LinearModel f = random_model(2500, random::StreamKey{5});
  const auto a = empirical_accuracy(std::vector{f}, sampler, 777, random::StreamKey{6}, 100);
  const auto b = empirical_accuracy(std::vector{f}, sampler, 777, random::StreamKey{6}, 2000);
  EXPECT_EQ(a.correct, b.correct);
}

TEST(EmpiricalAccuracy, MatchesClosedFormForBiLevelModels) {
  const EnsembleSampler sampler{W2SConfig{}};
  const Levels& lv = sampler.strong();
  for (std::uint64_t k = 0; k < 5; ++k) {
    LinearModel f{Eigen::VectorXd::Zero(2500)};
    random::fill_normal_row(random::StreamKey{k + 10}, 0, 0, 2500, f.coeffs.data());
    f.coeffs[0] += 8.0;  // a visible signal component
    const double cf = closed_form_accuracy(contamination(f, lv, 0));
    const auto est = empirical_accuracy(std::vector{f}, sampler, 10000, random::StreamKey{k + 50});
    EXPECT_NEAR(est.accuracy, cf, 3 * est.stderr_hat() + 1e-3) << "model " << k;
  }
}

TEST(NoiseProbe, ExactAndAsymptoticForms) {
  const NoiseProbe zero = noise_stability_probe(0.0, 1000, random::StreamKey{1});
  EXPECT_EQ(zero.exact, 0.0);
  EXPECT_EQ(zero.asymptotic_form, 0.0);
  const NoiseProbe one = noise_stability_probe(1.0, 1000, random::StreamKey{1});
  EXPECT_NEAR(one.exact, 0.797884560802865, 1e-14);
  EXPECT_NEAR(one.asymptotic_form, 0.797884560802865, 1e-14);
  const NoiseProbe mid = noise_stability_probe(0.3, 1000000, random::StreamKey{7});
  EXPECT_NEAR(mid.exact, 0.239365368240860, 1e-14);
  EXPECT_NEAR(mid.mc_mean, mid.exact, 4 * mid.mc_stderr);
  EXPECT_W2S_ERROR(noise_stability_probe(1.5, 1000, random::StreamKey{1}), ErrorKind::domain_error);
}

TEST(CleanTrace, StreamingDualMatchesPrimalFit) {
  const BiLevelParams params{50, {2.0, 0.6, 0.6}};
  const random::StreamKey train{31}, test{32};
  const CleanTrace trace = trace_clean_fit(params, 500, train, test, 300);

  W2SConfig c;
  c.n = 50;
  c.strong = params.exponents;
  const EnsembleSampler sampler(c);
  const SampleBatch batch = sampler.sample(50, train);
  const LinearModel f = fit_mni(batch.strong_X, Eigen::VectorXd(batch.labels.col(0)));
  const SuCn direct = contamination(f, sampler.strong(), 0);
  EXPECT_NEAR(trace.sucn.su, direct.su, 1e-9 * std::abs(direct.su));
  EXPECT_NEAR(trace.sucn.total_var, direct.total_var, 1e-9 * direct.total_var);
  EXPECT_NEAR(trace.sucn.cn, direct.cn, 1e-8 * direct.cn);
  const auto emp = empirical_accuracy(std::vector{f}, sampler, 500, test);
  EXPECT_EQ(trace.empirical.correct, emp.correct);
}
