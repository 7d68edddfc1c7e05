#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace w2s {

enum class ErrorKind {
  invalid_params,
  degenerate_ensemble,
  singular_gram,
  rank_deficient,
  dimension_mismatch,
  empty_model_list,
  index_out_of_range,
  numerical_inconsistency,
  domain_error,
  quadrature_nonconvergence,
  hypothesis_violated,
  empty_grid,
  config_invalid,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_params: return "InvalidParams";
    case ErrorKind::degenerate_ensemble: return "DegenerateEnsemble";
    case ErrorKind::singular_gram: return "SingularGram";
    case ErrorKind::rank_deficient: return "RankDeficient";
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::empty_model_list: return "EmptyModelList";
    case ErrorKind::index_out_of_range: return "IndexOutOfRange";
    case ErrorKind::numerical_inconsistency: return "NumericalInconsistency";
    case ErrorKind::domain_error: return "DomainError";
    case ErrorKind::quadrature_nonconvergence: return "QuadratureNonconvergence";
    case ErrorKind::hypothesis_violated: return "HypothesisViolated";
    case ErrorKind::empty_grid: return "EmptyGrid";
    case ErrorKind::config_invalid: return "ConfigInvalid";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` says which contract broke.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures that come from the numbers rather than the inputs.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::singular_gram || kind_ == ErrorKind::rank_deficient ||
           kind_ == ErrorKind::numerical_inconsistency ||
           kind_ == ErrorKind::quadrature_nonconvergence;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace w2s
