#include "camreid/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace camreid {
namespace {

double evaluate(const LossFn& loss) {
  Tape tape;
  const Variable out = loss(tape);
  if (!out.shape().is_scalar()) {
    throw ShapeError("grad_check: loss must be scalar, got " +
                     out.shape().str());
  }
  return out.value().item();
}

}  // namespace

GradCheckResult grad_check(const LossFn& loss, std::span<const Variable> wrt,
                           double step, double numeric_scale) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");

  // Copies share nodes with the caller's variables.
  std::vector<Variable> vars(wrt.begin(), wrt.end());
  for (auto& v : vars) v.zero_grad();

  std::vector<Tensor> analytic;
  {
    Tape tape;
    const Variable out = loss(tape);
    if (!out.shape().is_scalar()) {
      throw ShapeError("grad_check: loss must be scalar, got " +
                       out.shape().str());
    }
    tape.backward(out);
    for (auto& v : vars) {
      analytic.push_back(v.grad());
      v.zero_grad();
    }
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    auto data = vars[k].mutable_value().data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double plus = evaluate(loss);
      data[i] = saved - step;
      const double minus = evaluate(loss);
      data[i] = saved;

      const double numeric = numeric_scale * (plus - minus) / (2.0 * step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (result.coordinates == 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.analytic_at_worst = a;
        result.numeric_at_worst = numeric;
      }
      ++result.coordinates;
    }
  }
  return result;
}

double grad_check(const std::function<Variable(Tape&, const Variable&)>& f,
                  const Tensor& x, double step) {
  const Variable input = Variable::parameter(x);
  const Variable vars[] = {input};
  return grad_check([&](Tape& tape) { return f(tape, input); }, vars, step)
      .max_rel_error;
}

}  // namespace camreid
