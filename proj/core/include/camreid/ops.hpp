#ifndef CAMREID_OPS_HPP_
#define CAMREID_OPS_HPP_

#include <cstddef>

#include "camreid/autodiff.hpp"

namespace camreid::ops {

enum class PoolMode { kAvg, kMax };

/// a ⊗ b. `b` has a's shape, (N,C,1,1) or (N,1,H,W); its gradient is
/// sum-reduced over the broadcast axes.
Variable mul(Tape& tape, const Variable& a, const Variable& b);

Variable add(Tape& tape, const Variable& a, const Variable& b);

/// s·x for a fixed real s.
Variable scale(Tape& tape, const Variable& x, double s);

/// 1 − x, elementwise.
Variable one_minus(Tape& tape, const Variable& x);

/// max(0, x); subgradient at 0 is 0.
Variable relu(Tape& tape, const Variable& x);

Variable sigmoid(Tape& tape, const Variable& x);

/// Reduces H×W to 1×1. Max routes the gradient to the lowest flat index
/// among ties.
Variable pool_global(Tape& tape, const Variable& x, PoolMode mode);

/// Reduces the channel axis to 1. Max ties resolve to the lowest channel.
Variable pool_channel(Tape& tape, const Variable& x, PoolMode mode);

/// Concatenates along the channel axis.
Variable concat_channels(Tape& tape, const Variable& a, const Variable& b);

/// Affine map on (N,C_in,1,1) inputs. weights: (C_out,C_in,1,1);
/// bias: (C_out,1,1,1).
Variable dense(Tape& tape, const Variable& x, const Variable& weights,
               const Variable& bias);

/// Direct 2-D convolution with zero padding (k−1)/2. kernel: (C_out,C_in,k,k)
/// with odd k; bias: (C_out,1,1,1). With stride 1 the output keeps H×W.
Variable conv2d(Tape& tape, const Variable& x, const Variable& kernel,
                const Variable& bias, std::size_t stride = 1);

/// Sum of all elements as a (1,1,1,1) tensor.
Variable sum(Tape& tape, const Variable& x);

/// Identity forward; backward multiplies the upstream gradient by −mu.
/// mu must be positive.
Variable gradient_reversal(Tape& tape, const Variable& x, double mu);

/// Identity forward; backward multiplies the upstream gradient by `factor`.
/// Building block for gradient_reversal and for fault injection in
/// gradient-check harnesses.
Variable gradient_scale(Tape& tape, const Variable& x, double factor);

}  // namespace camreid::ops

#endif  // CAMREID_OPS_HPP_
