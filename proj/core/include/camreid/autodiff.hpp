#ifndef CAMREID_AUTODIFF_HPP_
#define CAMREID_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "camreid/tensor.hpp"

namespace camreid {

namespace detail {
struct Node {
  Tensor value;
  std::optional<Tensor> grad;
  bool requires_grad = false;
};
}  // namespace detail

/// A tensor participating in differentiation. Copies share the same node,
/// so a parameter handed to several ops accumulates all their gradients.
class Variable {
 public:
  Variable() = default;

  /// Leaf that receives a gradient on backward().
  static Variable parameter(Tensor value);
  /// Leaf that never receives a gradient.
  static Variable constant(Tensor value);

  bool valid() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Direct write access; only meaningful for leaves (optimizer updates,
  /// finite-difference perturbation).
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return node_->grad.has_value(); }
  /// Accumulated gradient; a zero tensor if none has been accumulated.
  Tensor grad() const;
  void zero_grad() { node_->grad.reset(); }

  bool same_node(const Variable& other) const { return node_ == other.node_; }

 private:
  friend class Tape;
  explicit Variable(std::shared_ptr<detail::Node> node)
      : node_(std::move(node)) {}
  void accumulate(const Tensor& g);

  std::shared_ptr<detail::Node> node_;
};

/// Vector-Jacobian product: maps the output gradient to one gradient per
/// input, in input order. Entries for inputs that do not require a gradient
/// may be left empty.
using VjpFn = std::function<std::vector<Tensor>(const Tensor& upstream)>;

/// Dynamic reverse-mode tape. Ops append entries as they run; backward()
/// visits them once each in reverse order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Wraps `out` in a new Variable. If any input requires a gradient the
  /// result does too, and `vjp` is recorded for backward().
  Variable record(std::string op_name, Tensor out,
                  std::vector<Variable> inputs, VjpFn vjp);

  /// Accumulates d(loss)/d(v) into every reachable Variable that requires a
  /// gradient. `loss` must be a (1,1,1,1) tensor.
  void backward(const Variable& loss);

  std::size_t size() const { return entries_.size(); }
  const std::string& op_name(std::size_t i) const { return entries_[i].name; }

 private:
  struct Entry {
    std::string name;
    std::vector<Variable> inputs;
    Variable output;
    VjpFn vjp;
  };
  std::vector<Entry> entries_;
};

}  // namespace camreid

#endif  // CAMREID_AUTODIFF_HPP_
