#pragma once

// Bi-level spiked-covariance ensembles and the weak/strong subset ensemble.
//
// Everything lives in the distinguished eigenbasis: the strong covariance is
// diagonal, the true label direction is the first coordinate, and the weak
// features are rescaled coordinate subsets of the strong ones. Indices are
// zero-based throughout (coordinate 0 carries the binary label).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "w2s/error.hpp"
#include "w2s/random.hpp"

namespace w2s {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// floor(base^exponent), robust to pow() landing a hair under an exact integer.
inline std::size_t floor_power(double base, double exponent) {
  const double v = std::pow(base, exponent);
  return static_cast<std::size_t>(std::floor(v + 1e-10 * std::max(1.0, v)));
}

/// Exponents (p, q, r) of a bi-level ensemble.
struct Exponents {
  double p = 2.0;
  double q = 0.6;
  double r = 0.6;

  /// p > 1, 0 <= r < 1, 0 < q <= p - r. The upper end is closed (up to
  /// rounding) so that q = p - r, where favored and unfavored eigenvalues are
  /// of the same order, remains a legal ensemble.
  bool in_domain() const noexcept {
    return p > 1.0 && r >= 0.0 && r < 1.0 && q > 0.0 && q <= p - r + 1e-12;
  }
};

struct BiLevelParams {
  std::size_t n = 50;
  Exponents exponents;
};

/// Integer and real scales derived from a bi-level ensemble at a given n.
struct Levels {
  std::size_t d = 0;
  std::size_t s = 0;
  double a = 0.0;
  double lambda_F = 0.0;
  double lambda_U = 0.0;
  double mu = 0.0;

  double lambda(std::size_t j) const noexcept { return j < s ? lambda_F : lambda_U; }
  double sqrt_lambda(std::size_t j) const noexcept { return std::sqrt(lambda(j)); }
};

inline Levels derive_levels(const BiLevelParams& params, std::optional<std::size_t> count_override = {}) {
  const auto& e = params.exponents;
  if (!e.in_domain()) {
    std::ostringstream msg;
    msg << "bi-level domain requires p > 1, 0 <= r < 1, 0 < q <= p - r; got (p, q, r) = (" << e.p << ", " << e.q
        << ", " << e.r << ")";
    fail(ErrorKind::invalid_params, msg.str());
  }
  if (params.n < 2) fail(ErrorKind::invalid_params, "n must be at least 2");
  if (count_override && *count_override < 1) fail(ErrorKind::invalid_params, "count override must be >= 1");

  const auto n = static_cast<double>(params.n);
  Levels lv;
  lv.d = floor_power(n, e.p);
  lv.s = floor_power(n, e.r);
  if (lv.d <= lv.s) fail(ErrorKind::degenerate_ensemble, "d <= s");
  lv.a = std::pow(n, -e.q);
  const auto d = static_cast<double>(lv.d);
  const auto s = static_cast<double>(lv.s);
  lv.lambda_F = lv.a * d / s;
  lv.lambda_U = (1.0 - lv.a) * d / (d - s);
  const double count = count_override ? static_cast<double>(*count_override) : n;
  lv.mu = lv.a * count / s;
  return lv;
}

enum class Mode { binary, multilabel, multiclass };

inline std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::binary: return "binary";
    case Mode::multilabel: return "multilabel";
    case Mode::multiclass: return "multiclass";
  }
  return "binary";
}

/// Joint description of the weak and strong ensembles plus the pseudolabel budget.
struct W2SConfig {
  std::size_t n = 50;
  Exponents strong{2.0, 0.6, 0.6};
  Exponents weak{1.4, 0.9, 0.5};
  double u = 1.15;
  Mode mode = Mode::binary;
  std::size_t k = 1;
  /// Multiclass class-count scaling k = c_k * floor(n^t); overrides k when set.
  std::optional<double> t;
  std::size_t c_k = 1;

  /// Number of weakly labelled points, floor(n^u).
  std::size_t m() const { return floor_power(static_cast<double>(n), u); }

  /// Heads (multilabel), classes (multiclass) or 1 (binary).
  std::size_t heads() const {
    if (mode == Mode::binary) return 1;
    if (t) return c_k * floor_power(static_cast<double>(n), *t);
    return k;
  }

  Levels strong_levels() const { return derive_levels({n, strong}); }
  Levels weak_levels() const { return derive_levels({n, weak}); }
};

struct Violation {
  std::string name;
  std::string detail;
};

/// Every violated hypothesis of the weak-to-strong setup, in a fixed order.
inline std::vector<Violation> validate_w2s(const W2SConfig& config) {
  std::vector<Violation> out;
  auto add = [&](std::string name, std::string detail) { out.push_back({std::move(name), std::move(detail)}); };
  const auto& S = config.strong;
  const auto& W = config.weak;
  const double u = config.u;

  if (!S.in_domain()) add("strong_domain", "strong exponents violate p > 1, 0 <= r < 1, 0 < q <= p - r");
  if (!W.in_domain()) add("weak_domain", "weak exponents violate p > 1, 0 <= r < 1, 0 < q <= p - r");
  if (config.n < 2) add("n>=2", "need at least two labelled points");
  if (!(S.q + S.r > u)) add("q+r>u", "q + r = " + std::to_string(S.q + S.r) + " <= u = " + std::to_string(u));
  if (!(W.q + W.r > 1.0)) add("q_w+r_w>1", "q_w + r_w = " + std::to_string(W.q + W.r) + " <= 1");
  const double cap = (S.p + 1.0 + S.q + S.r - (W.q + W.r)) / 2.0;
  if (!(u < cap)) add("u<(p+1+q+r-(q_w+r_w))/2", "u = " + std::to_string(u) + " >= " + std::to_string(cap));

  if (S.in_domain() && W.in_domain() && config.n >= 2) {
    const Levels st = config.strong_levels();
    const Levels wk = config.weak_levels();
    if (wk.s > st.s) add("s_weak<=s", std::to_string(wk.s) + " > " + std::to_string(st.s));
    if (wk.d - wk.s > st.d - st.s) {
      add("d_weak-s_weak<=d-s", std::to_string(wk.d - wk.s) + " > " + std::to_string(st.d - st.s));
    }
    if (config.heads() > wk.s) add("k<=s_weak", std::to_string(config.heads()) + " > " + std::to_string(wk.s));
  }
  if (config.mode == Mode::multiclass && config.t && !(*config.t >= 0.0 && *config.t < S.r)) {
    add("0<=t<r", "class-count exponent t must satisfy 0 <= t < r");
  }
  if (config.heads() < 1) add("k>=1", "need at least one head");
  if (!(u > 1.0)) add("u>1", "need more weakly labelled than clean points");
  return out;
}

/// Coordinates of the weak features inside the strong feature space.
struct SubsetLink {
  std::vector<std::size_t> S;  // favored, subset of [0, s)
  std::vector<std::size_t> T;  // unfavored, subset of [s, d)
  double scale_F = 1.0;
  double scale_U = 1.0;
  std::size_t strong_dim = 0;

  std::size_t weak_dim() const noexcept { return S.size() + T.size(); }

  /// Strong coordinate feeding weak coordinate j.
  std::size_t strong_index(std::size_t j) const { return j < S.size() ? S[j] : T[j - S.size()]; }

  double scale(std::size_t j) const noexcept { return j < S.size() ? scale_F : scale_U; }
};

inline SubsetLink build_subset_link(const Levels& strong, const Levels& weak) {
  if (weak.s > strong.s) fail(ErrorKind::invalid_params, "s_weak > s");
  if (weak.d - weak.s > strong.d - strong.s) fail(ErrorKind::invalid_params, "d_weak - s_weak > d - s");
  SubsetLink link;
  link.strong_dim = strong.d;
  link.S.resize(weak.s);
  for (std::size_t j = 0; j < weak.s; ++j) link.S[j] = j;
  link.T.resize(weak.d - weak.s);
  for (std::size_t j = 0; j < link.T.size(); ++j) link.T[j] = strong.s + j;
  link.scale_F = std::sqrt(weak.lambda_F / strong.lambda_F);
  link.scale_U = std::sqrt(weak.lambda_U / strong.lambda_U);
  return link;
}

inline SubsetLink build_subset_link(const W2SConfig& config) {
  return build_subset_link(config.strong_levels(), config.weak_levels());
}

/// A batch of datapoints seen through both feature maps.
struct SampleBatch {
  std::size_t count = 0;
  RowMatrix latent;    // count x d standard normals
  RowMatrix strong_X;  // count x d
  RowMatrix weak_X;    // count x d_weak
  /// count x heads matrix of +-1: sgn of latent coordinate j (sgn(0) = +1).
  RowMatrix labels;
  /// Multiclass only: argmax over the first `heads` strong coordinates.
  std::vector<std::size_t> classes;
};

inline double sign(double x) noexcept { return x >= 0.0 ? 1.0 : -1.0; }

/// Precomputed scales for drawing batches from one configuration.
class EnsembleSampler {
 public:
  explicit EnsembleSampler(const W2SConfig& config)
      : config_(config),
        strong_(config.strong_levels()),
        weak_(config.weak_levels()),
        link_(build_subset_link(strong_, weak_)),
        heads_(config.heads()) {
    if (heads_ > strong_.s) fail(ErrorKind::invalid_params, "more heads than favored strong features");
  }

  const W2SConfig& config() const noexcept { return config_; }
  const Levels& strong() const noexcept { return strong_; }
  const Levels& weak() const noexcept { return weak_; }
  const SubsetLink& link() const noexcept { return link_; }
  std::size_t heads() const noexcept { return heads_; }

  /// Rows [first_row, first_row + count) of the stream `key`.
  SampleBatch sample(std::size_t count, random::StreamKey key, std::size_t first_row = 0) const {
    const std::size_t d = strong_.d;
    SampleBatch b;
    b.count = count;
    b.latent.resize(count, d);
    b.strong_X.resize(count, d);
    b.weak_X.resize(count, link_.weak_dim());
    b.labels.resize(count, heads_);
    const double root_F = std::sqrt(strong_.lambda_F);
    const double root_U = std::sqrt(strong_.lambda_U);
    for (std::size_t i = 0; i < count; ++i) {
      double* z = b.latent.row(i).data();
      random::fill_normal_row(key, first_row + i, 0, d, z);
      double* x = b.strong_X.row(i).data();
      for (std::size_t j = 0; j < d; ++j) x[j] = (j < strong_.s ? root_F : root_U) * z[j];
      double* w = b.weak_X.row(i).data();
      for (std::size_t j = 0; j < link_.weak_dim(); ++j) w[j] = link_.scale(j) * x[link_.strong_index(j)];
      for (std::size_t h = 0; h < heads_; ++h) b.labels(i, h) = sign(z[h]);
    }
    if (config_.mode == Mode::multiclass) {
      b.classes.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t best = 0;
        for (std::size_t h = 1; h < heads_; ++h) {
          if (b.strong_X(i, h) > b.strong_X(i, best)) best = h;
        }
        b.classes[i] = best;
      }
    }
    return b;
  }

 private:
  W2SConfig config_;
  Levels strong_;
  Levels weak_;
  SubsetLink link_;
  std::size_t heads_;
};

inline SampleBatch sample_batch(const W2SConfig& config, std::size_t count, random::StreamKey key) {
  return EnsembleSampler(config).sample(count, key);
}

}  // namespace w2s
