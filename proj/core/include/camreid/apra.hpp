#ifndef CAMREID_APRA_HPP_
#define CAMREID_APRA_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "camreid/autodiff.hpp"

namespace camreid::apra {

/// Hyperparameters of the adversarial pairwise reverse attention block.
struct ApraConfig {
  std::size_t channels = 16;
  /// Bottleneck of the shared channel MLP is channels / reduction_ratio,
  /// clamped to at least 1.
  std::size_t reduction_ratio = 16;
  /// Odd side length of the spatial-attention convolution.
  std::size_t spatial_kernel = 7;
  /// Gradient reversal multiplies camera-branch gradients by −reversal_scale.
  double reversal_scale = 1.0;
  /// Weight of the camera loss in the combined objective.
  double camera_loss_weight = 0.01;

  /// Throws std::invalid_argument if any invariant is violated.
  void validate() const;
  std::size_t hidden_channels() const;
};

/// Learnable tensors of the attention sub-networks.
struct ApraParams {
  Variable mlp1_weight;   // (hidden, C, 1, 1)
  Variable mlp1_bias;     // (hidden, 1, 1, 1)
  Variable mlp2_weight;   // (C, hidden, 1, 1)
  Variable mlp2_bias;     // (C, 1, 1, 1)
  Variable spatial_kernel;  // (1, 2, k, k)
  Variable spatial_bias;    // (1, 1, 1, 1)

  /// Weights uniform in ±1/sqrt(fan_in), biases zero.
  static ApraParams init(const ApraConfig& cfg, std::mt19937_64& rng);
  /// All-zero weights and biases; every attention value is then 0.5.
  static ApraParams zeros(const ApraConfig& cfg);

  std::vector<Variable> all() const;
};

/// An attention map M and its complement 1 − M.
struct AttentionPair {
  Variable forward_map;
  Variable inverse_map;
};

struct ApraOutput {
  Variable person_features;  // relu((F ⊗ Mc) ⊗ Ms + F)
  Variable camera_features;  // relu((F ⊗ Mc') ⊗ Ms' + F)
  AttentionPair channel;
  AttentionPair spatial;
};

/// Mc = sigmoid(MLP(avgpool(F)) + MLP(maxpool(F))), shape (N,C,1,1).
AttentionPair channel_attention(Tape& tape, const Variable& features,
                                const ApraParams& params);

/// Ms = sigmoid(conv([avg_c(F'); max_c(F')])), shape (N,1,H,W), where F' is
/// the channel-modulated map F ⊗ Mc.
AttentionPair spatial_attention(Tape& tape, const Variable& modulated,
                                const ApraParams& params);

/// relu((F ⊗ channel_map) ⊗ spatial_map + F).
Variable attended_branch(Tape& tape, const Variable& features,
                         const Variable& channel_map,
                         const Variable& spatial_map);

/// Splits F into person and camera features using the attention maps and
/// their inverses.
ApraOutput apra_forward(Tape& tape, const Variable& features,
                        const ApraParams& params);

/// Global-average-pool then dense layer to one logit per camera.
struct CameraHead {
  Variable weight;  // (num_cameras, C, 1, 1)
  Variable bias;    // (num_cameras, 1, 1, 1)

  static CameraHead init(std::size_t channels, std::size_t num_cameras,
                         std::mt19937_64& rng);
  static CameraHead zeros(std::size_t channels, std::size_t num_cameras);

  std::size_t num_cameras() const { return weight.shape().n; }
  std::vector<Variable> all() const { return {weight, bias}; }
};

/// Camera logits (N, num_cameras, 1, 1) from (already reversed) camera
/// features.
Variable camera_head(Tape& tape, const Variable& camera_features,
                     const CameraHead& head);

/// Runs the camera pathway: gradient reversal on F_kappa, then the head.
/// With `reverse` false the reversal is replaced by the identity.
Variable camera_logits(Tape& tape, const ApraOutput& out,
                       const CameraHead& head, double reversal_scale,
                       bool reverse = true);

}  // namespace camreid::apra

#endif  // CAMREID_APRA_HPP_
