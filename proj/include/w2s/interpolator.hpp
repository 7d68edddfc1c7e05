#pragma once

// Linear models trained by minimum-norm interpolation or class averaging.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "w2s/ensemble.hpp"
#include "w2s/error.hpp"

namespace w2s {

enum class FeatureSpace { weak, strong };
enum class FitMethod { mni, avg };

inline std::string to_string(FeatureSpace s) { return s == FeatureSpace::weak ? "weak" : "strong"; }
inline std::string to_string(FitMethod m) { return m == FitMethod::mni ? "MNI" : "AVG"; }

struct LinearModel {
  Eigen::VectorXd coeffs;
  FeatureSpace space = FeatureSpace::strong;
  FitMethod method = FitMethod::mni;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(coeffs.size()); }

  template <typename Derived>
  double score(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != coeffs.size()) {
      fail(ErrorKind::dimension_mismatch,
           "model has " + std::to_string(coeffs.size()) + " coefficients, point has " + std::to_string(x.size()));
    }
    return coeffs.dot(x.derived().template cast<double>().reshaped());
  }
};

/// Cholesky factorization of the Gram matrix X X^T, shared by all heads fit on X.
class GramSolver {
 public:
  template <typename Derived>
  explicit GramSolver(const Eigen::MatrixBase<Derived>& X) {
    const auto count = X.rows();
    if (count > X.cols()) {
      fail(ErrorKind::rank_deficient,
           std::to_string(count) + " points in dimension " + std::to_string(X.cols()) + " cannot be interpolated");
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(count, count);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.derived().template cast<double>());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    factor(std::move(gram));
  }

  /// Solves (X X^T) alpha = y for every column of y.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& y) const { return llt_.solve(y); }

  bool jittered() const noexcept { return jittered_; }

 private:
  void factor(Eigen::MatrixXd gram) {
    llt_.compute(gram);
    if (llt_.info() == Eigen::Success) return;
    const double jitter = 1e-12 * gram.trace() / static_cast<double>(gram.rows());
    gram.diagonal().array() += jitter;
    llt_.compute(gram);
    jittered_ = true;
    if (llt_.info() != Eigen::Success) fail(ErrorKind::singular_gram, "Cholesky failed after diagonal jitter");
  }

  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool jittered_ = false;
};

/// Minimum-norm interpolators X^T (X X^T)^{-1} Y, one per column of Y.
template <typename DerivedX, typename DerivedY>
std::vector<LinearModel> fit_mni_heads(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& Y,
                                       FeatureSpace space = FeatureSpace::strong) {
  if (Y.rows() != X.rows()) fail(ErrorKind::dimension_mismatch, "label rows do not match data rows");
  const GramSolver solver(X);
  const Eigen::MatrixXd alpha = solver.solve(Y.derived().template cast<double>());
  const Eigen::MatrixXd coeffs = X.derived().template cast<double>().transpose() * alpha;
  std::vector<LinearModel> out;
  out.reserve(static_cast<std::size_t>(Y.cols()));
  for (Eigen::Index h = 0; h < Y.cols(); ++h) out.push_back({coeffs.col(h), space, FitMethod::mni});
  return out;
}

template <typename DerivedX, typename DerivedY>
LinearModel fit_mni(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y,
                    FeatureSpace space = FeatureSpace::strong) {
  if (y.cols() != 1) fail(ErrorKind::dimension_mismatch, "fit_mni expects a single label column");
  return fit_mni_heads(X, y, space).front();
}

/// Signed class mean (1/count) sum_i y_i x_i, one per column of Y.
template <typename DerivedX, typename DerivedY>
std::vector<LinearModel> fit_avg_heads(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& Y,
                                       FeatureSpace space = FeatureSpace::strong) {
  if (Y.rows() != X.rows()) fail(ErrorKind::dimension_mismatch, "label rows do not match data rows");
  if (X.rows() < 1) fail(ErrorKind::invalid_params, "averaging needs at least one point");
  const Eigen::MatrixXd coeffs = X.derived().template cast<double>().transpose() *
                                 Y.derived().template cast<double>() / static_cast<double>(X.rows());
  std::vector<LinearModel> out;
  for (Eigen::Index h = 0; h < Y.cols(); ++h) out.push_back({coeffs.col(h), space, FitMethod::avg});
  return out;
}

template <typename DerivedX, typename DerivedY>
LinearModel fit_avg(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y,
                    FeatureSpace space = FeatureSpace::strong) {
  if (y.cols() != 1) fail(ErrorKind::dimension_mismatch, "fit_avg expects a single label column");
  return fit_avg_heads(X, y, space).front();
}

/// sgn(<f, x>) with sgn(0) = +1.
template <typename Derived>
int predict_binary(const LinearModel& model, const Eigen::MatrixBase<Derived>& x) {
  return model.score(x) >= 0.0 ? 1 : -1;
}

/// Index of the highest-scoring model; ties go to the lowest index.
template <typename Derived>
std::size_t predict_multiclass(std::span<const LinearModel> models, const Eigen::MatrixBase<Derived>& x) {
  if (models.empty()) fail(ErrorKind::empty_model_list, "no models to take the argmax over");
  std::size_t best = 0;
  double best_score = models[0].score(x);
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].dim() != models[0].dim()) fail(ErrorKind::dimension_mismatch, "models differ in dimension");
    const double s = models[i].score(x);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

/// Coefficients of several heads stacked as columns (dim x heads).
inline Eigen::MatrixXd stack_coeffs(std::span<const LinearModel> models) {
  if (models.empty()) fail(ErrorKind::empty_model_list, "no models to stack");
  Eigen::MatrixXd W(models[0].coeffs.size(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t h = 0; h < models.size(); ++h) {
    if (models[h].coeffs.size() != W.rows()) fail(ErrorKind::dimension_mismatch, "models differ in dimension");
    W.col(static_cast<Eigen::Index>(h)) = models[h].coeffs;
  }
  return W;
}

}  // namespace w2s
