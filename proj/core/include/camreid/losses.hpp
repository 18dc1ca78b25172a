#ifndef CAMREID_LOSSES_HPP_
#define CAMREID_LOSSES_HPP_

#include <cstddef>
#include <span>

#include "camreid/autodiff.hpp"

namespace camreid::losses {

/// Lower clamp applied to log-probabilities inside cross_entropy.
inline constexpr double kLogProbFloor = -50.0;

/// Default triplet margin.
inline constexpr double kDefaultMargin = 0.3;

/// Mean negative log-softmax probability of the true class.
/// logits: (N,K,1,1); labels: N ids in [0,K). Rows are stabilized by
/// max-subtraction and log-probabilities clamped at kLogProbFloor (a clamped
/// row contributes no gradient).
Variable cross_entropy(Tape& tape, const Variable& logits,
                       std::span<const std::size_t> labels);

/// [d_ap − d_an + margin]_+ for one triplet.
double triplet_hinge(double d_ap, double d_an, double margin);

/// Batch-hard triplet loss on Euclidean distances. For each anchor that has
/// both a positive and a negative in the batch, takes the farthest positive
/// and the nearest negative (ties to the lowest index) and averages the
/// hinge over those anchors.
///
/// embeddings: (N,D,1,1). Throws std::invalid_argument for a degenerate batch
/// (a single identity, or no identity with two samples).
Variable triplet_loss(Tape& tape, const Variable& embeddings,
                      std::span<const std::size_t> labels,
                      double margin = kDefaultMargin);

/// person_ce + triplet + weight · camera_ce.
Variable combined_loss(Tape& tape, const Variable& person_ce,
                       const Variable& triplet, const Variable& camera_ce,
                       double camera_weight);

}  // namespace camreid::losses

#endif  // CAMREID_LOSSES_HPP_
