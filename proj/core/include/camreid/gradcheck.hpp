#ifndef CAMREID_GRADCHECK_HPP_
#define CAMREID_GRADCHECK_HPP_

#include <cstddef>
#include <functional>
#include <span>

#include "camreid/autodiff.hpp"

namespace camreid {

/// Builds a scalar loss on a fresh tape. Called once for the analytic pass
/// and twice per perturbed coordinate.
using LossFn = std::function<Variable(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `loss` w.r.t. every element of `wrt`
/// against central differences with the given step. Per coordinate the error
/// is |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// Gradients of `wrt` are reset before and after the check; their values are
/// restored exactly.
///
/// `numeric_scale` multiplies the central difference before comparison. It
/// lets the check verify a backward pass that deliberately differs from the
/// forward derivative by a known factor, such as gradient reversal (−μ).
GradCheckResult grad_check(const LossFn& loss, std::span<const Variable> wrt,
                           double step, double numeric_scale = 1.0);

/// Single-input form: max relative error of d f(x)/dx at `x`.
double grad_check(const std::function<Variable(Tape&, const Variable&)>& f,
                  const Tensor& x, double step);

}  // namespace camreid

#endif  // CAMREID_GRADCHECK_HPP_
