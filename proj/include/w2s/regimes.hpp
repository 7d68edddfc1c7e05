#pragma once

// Closed-form phase classification for clean-label and weak-to-strong MNI.
//
// All quantities are exponents of n; nothing here depends on a sample size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "w2s/ensemble.hpp"
#include "w2s/error.hpp"

namespace w2s::regimes {

inline constexpr double kBoundaryTol = 1e-12;

/// Name of the "not too many weakly labelled examples" hypothesis.
inline constexpr const char* kCapHypothesis = "u<(p+1+q+r-(q_w+r_w))/2";

enum class CleanPhase { success, failure, boundary, out_of_theory };
enum class Phase { w2s_success, w2s_failure, boundary, out_of_theory };

inline std::string to_string(CleanPhase p) {
  switch (p) {
    case CleanPhase::success: return "SUCCESS";
    case CleanPhase::failure: return "FAILURE";
    case CleanPhase::boundary: return "BOUNDARY";
    case CleanPhase::out_of_theory: return "OUT_OF_THEORY";
  }
  return "OUT_OF_THEORY";
}

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::w2s_success: return "W2S_SUCCESS";
    case Phase::w2s_failure: return "W2S_FAILURE";
    case Phase::boundary: return "BOUNDARY";
    case Phase::out_of_theory: return "OUT_OF_THEORY";
  }
  return "OUT_OF_THEORY";
}

struct RegimeInputs {
  double p = 2.0, q = 0.6, r = 0.6;
  double p_w = 1.4, q_w = 0.9, r_w = 0.5;
  double u = 1.15;
  double t = 0.0;

  Exponents strong() const noexcept { return {p, q, r}; }
  Exponents weak() const noexcept { return {p_w, q_w, r_w}; }
};

inline double tau_strong(double p, double q, double r) noexcept { return p + 1.0 - 2.0 * (q + r); }

inline double tau_weak(const RegimeInputs& in) noexcept { return tau_strong(in.p_w, in.q_w, in.r_w); }

inline double tau_w2s(const RegimeInputs& in) noexcept { return in.p + 1.0 - (in.q + in.r + in.q_w + in.r_w); }

/// q_w + r_w - min{1 - r, tau_strong}: the smallest u with weak-to-strong success.
inline double threshold_u(const RegimeInputs& in) noexcept {
  return in.q_w + in.r_w - std::min(1.0 - in.r, tau_strong(in.p, in.q, in.r));
}

struct Flags {
  bool weak_fails = false;
  bool capability = false;
  bool pca_fails = false;
  bool strong_fails_n_clean = false;
  bool nonvacuous = false;
};

struct RegimeVerdict {
  Phase phase = Phase::out_of_theory;
  double tau_strong = 0.0;
  double tau_weak = 0.0;
  double tau_w2s = 0.0;
  double threshold_u = 0.0;
  Flags flags;
  std::vector<std::string> violated;
};

/// Clean-label MNI with k = floor(n^t) classes (t = 0 for binary).
inline CleanPhase classify_clean(double p, double q, double r, double t = 0.0) {
  const Exponents e{p, q, r};
  if (!e.in_domain() || !(q + r > 1.0)) return CleanPhase::out_of_theory;
  const double edge = std::min(1.0 - r, tau_strong(p, q, r));
  if (std::abs(t - edge) <= kBoundaryTol) return CleanPhase::boundary;
  return t < edge ? CleanPhase::success : CleanPhase::failure;
}

/// Exponent of the arctan argument in the clean binary error 1/2 - arctan(Theta(n^tau))/pi.
inline double clean_binary_error_exponent(double p, double q, double r) {
  if (!(q + r > 1.0)) fail(ErrorKind::hypothesis_violated, "clean-label error rate needs q + r > 1");
  return tau_strong(p, q, r);
}

/// Names of the weak-to-strong theorem hypotheses that fail.
inline std::vector<std::string> hypothesis_violations(const RegimeInputs& in) {
  std::vector<std::string> out;
  if (!in.strong().in_domain()) out.emplace_back("strong_domain");
  if (!in.weak().in_domain()) out.emplace_back("weak_domain");
  if (!(in.q + in.r > in.u)) out.emplace_back("q+r>u");
  if (!(in.q_w + in.r_w > 1.0)) out.emplace_back("q_w+r_w>1");
  if (!(in.u < (in.p + 1.0 + in.q + in.r - (in.q_w + in.r_w)) / 2.0)) out.emplace_back(kCapHypothesis);
  return out;
}

inline RegimeVerdict classify_w2s(const RegimeInputs& in) {
  RegimeVerdict v;
  v.tau_strong = tau_strong(in.p, in.q, in.r);
  v.tau_weak = tau_weak(in);
  v.tau_w2s = tau_w2s(in);
  v.threshold_u = threshold_u(in);
  v.flags.weak_fails = v.tau_weak < 0.0;
  // Asymptotic form of s_weak <= s and d_weak - s_weak <= d - s.
  v.flags.capability = in.r_w <= in.r && in.p_w <= in.p;
  v.flags.pca_fails = in.q + in.r > in.u;
  v.flags.strong_fails_n_clean = v.tau_strong < 0.0;
  v.flags.nonvacuous = v.tau_w2s > 0.0;
  v.violated = hypothesis_violations(in);
  // The cap on the number of weak labels only guards the success conclusion:
  // below the threshold the strong model fails whether or not m is capped.
  const bool cap_only = v.violated.size() == 1 && v.violated.front() == kCapHypothesis;
  if (v.violated.empty()) {
    if (std::abs(in.u - v.threshold_u) <= kBoundaryTol) {
      v.phase = Phase::boundary;
    } else {
      v.phase = in.u > v.threshold_u ? Phase::w2s_success : Phase::w2s_failure;
    }
  } else if (cap_only && in.u < v.threshold_u - kBoundaryTol) {
    v.phase = Phase::w2s_failure;
  } else {
    v.phase = Phase::out_of_theory;
  }
  return v;
}

/// Weak-to-strong success with m weak labels must imply success with m clean
/// labels, i.e. u > 2(q+r) - p. Empty when the hypotheses fail.
inline std::optional<bool> sanity_clean_vs_w2s(const RegimeInputs& in) {
  if (!hypothesis_violations(in).empty()) return std::nullopt;
  if (classify_w2s(in).phase != Phase::w2s_success) return true;
  return in.u > 2.0 * (in.q + in.r) - in.p;
}

enum class Axis { p, q, r, p_w, q_w, r_w, u, t };

inline std::optional<Axis> parse_axis(const std::string& name) {
  if (name == "p") return Axis::p;
  if (name == "q") return Axis::q;
  if (name == "r") return Axis::r;
  if (name == "p_w") return Axis::p_w;
  if (name == "q_w") return Axis::q_w;
  if (name == "r_w") return Axis::r_w;
  if (name == "u") return Axis::u;
  if (name == "t") return Axis::t;
  return std::nullopt;
}

inline double& coordinate(RegimeInputs& in, Axis axis) {
  switch (axis) {
    case Axis::p: return in.p;
    case Axis::q: return in.q;
    case Axis::r: return in.r;
    case Axis::p_w: return in.p_w;
    case Axis::q_w: return in.q_w;
    case Axis::r_w: return in.r_w;
    case Axis::u: return in.u;
    case Axis::t: return in.t;
  }
  return in.u;
}

/// Inclusive grid of `steps` points from `min` to `max`.
struct AxisSpec {
  std::string name = "p";
  double min = 0.0;
  double max = 0.0;
  std::size_t steps = 1;

  double at(std::size_t i) const noexcept {
    if (steps <= 1) return min;
    return min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
};

struct SweepCell {
  double axis1 = 0.0;
  double axis2 = 0.0;
  RegimeVerdict verdict;
};

/// Row-major raster over axis1 x axis2; every other coordinate comes from `fixed`.
inline std::vector<SweepCell> sweep(const AxisSpec& axis1, const AxisSpec& axis2, const RegimeInputs& fixed) {
  if (axis1.steps == 0 || axis2.steps == 0) fail(ErrorKind::empty_grid, "sweep axes need at least one step");
  const auto a1 = parse_axis(axis1.name);
  const auto a2 = parse_axis(axis2.name);
  if (!a1 || !a2) fail(ErrorKind::config_invalid, "unknown sweep axis '" + (a1 ? axis2.name : axis1.name) + "'");
  if (*a1 == *a2) fail(ErrorKind::config_invalid, "sweep axes must differ");
  for (const AxisSpec* ax : {&axis1, &axis2}) {
    if (!std::isfinite(ax->min) || !std::isfinite(ax->max)) fail(ErrorKind::config_invalid, "axis range must be finite");
    if (ax->steps > 1 && !(ax->max > ax->min)) fail(ErrorKind::config_invalid, "axis step must be positive");
  }
  std::vector<SweepCell> out;
  out.reserve(axis1.steps * axis2.steps);
  for (std::size_t i = 0; i < axis1.steps; ++i) {
    for (std::size_t j = 0; j < axis2.steps; ++j) {
      RegimeInputs in = fixed;
      coordinate(in, *a1) = axis1.at(i);
      coordinate(in, *a2) = axis2.at(j);
      out.push_back({axis1.at(i), axis2.at(j), classify_w2s(in)});
    }
  }
  return out;
}

struct ErrorBand {
  double lower = 0.0;
  double upper = 1.0;
};

/// Desk-scale constants standing in for the unknown Theta(1/k) constants.
struct BandConstants {
  double c_lo = 0.2;
  double c_hi = 5.0;
};

/// Predicted failure-regime multiclass error band [1 - c_hi/k, 1 - c_lo/k], clipped to [0, 1].
inline ErrorBand multiclass_failure_rate_band(std::size_t k, BandConstants c = {}) {
  if (k < 2) fail(ErrorKind::invalid_params, "multiclass needs k >= 2");
  const double kk = static_cast<double>(k);
  return {std::clamp(1.0 - c.c_hi / kk, 0.0, 1.0), std::clamp(1.0 - c.c_lo / kk, 0.0, 1.0)};
}

}  // namespace w2s::regimes
