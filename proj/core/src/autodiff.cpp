#include "camreid/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

namespace camreid {

Variable Variable::parameter(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Variable(std::move(node));
}

Variable Variable::constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Variable(std::move(node));
}

Tensor Variable::grad() const {
  if (node_->grad) return *node_->grad;
  return Tensor(node_->value.shape());
}

void Variable::accumulate(const Tensor& g) {
  if (g.shape() != node_->value.shape()) {
    throw ShapeError("gradient shape " + g.shape().str() +
                     " does not match value shape " +
                     node_->value.shape().str());
  }
  if (!node_->grad) {
    node_->grad = g;
    return;
  }
  auto dst = node_->grad->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Variable Tape::record(std::string op_name, Tensor out,
                      std::vector<Variable> inputs, VjpFn vjp) {
  bool needs_grad = false;
  for (const auto& in : inputs) {
    if (!in.valid()) {
      throw std::invalid_argument(op_name + ": uninitialized input variable");
    }
    needs_grad = needs_grad || in.requires_grad();
  }
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(out);
  node->requires_grad = needs_grad;
  Variable result(std::move(node));
  if (needs_grad) {
    entries_.push_back(
        Entry{std::move(op_name), std::move(inputs), result, std::move(vjp)});
  }
  return result;
}

void Tape::backward(const Variable& loss) {
  if (!loss.valid() || !loss.shape().is_scalar()) {
    throw ShapeError("backward() requires a scalar loss of shape (1,1,1,1)" +
                     (loss.valid() ? ", got " + loss.shape().str()
                                   : std::string()));
  }
  if (!loss.requires_grad()) return;

  // Every entry output is a fresh node, so a repeated output would mean the
  // tape was spliced into a cycle.
  std::unordered_set<const detail::Node*> produced;
  for (const auto& e : entries_) {
    if (!produced.insert(e.output.node_.get()).second) {
      throw std::logic_error("tape records op '" + e.name +
                             "' output twice (cyclic tape)");
    }
  }

  for (auto& e : entries_) e.output.node_->grad.reset();
  loss.node_->grad = Tensor::scalar(1.0);

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    auto& out_node = *it->output.node_;
    if (!out_node.grad) continue;
    std::vector<Tensor> grads = it->vjp(*out_node.grad);
    if (grads.size() != it->inputs.size()) {
      throw std::logic_error("op '" + it->name + "' returned " +
                             std::to_string(grads.size()) +
                             " gradients for " +
                             std::to_string(it->inputs.size()) + " inputs");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto& in = it->inputs[i];
      if (in.requires_grad() && !grads[i].empty()) in.accumulate(grads[i]);
    }
  }
}

}  // namespace camreid
