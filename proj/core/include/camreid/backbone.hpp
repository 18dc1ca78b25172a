#ifndef CAMREID_BACKBONE_HPP_
#define CAMREID_BACKBONE_HPP_

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "camreid/apra.hpp"
#include "camreid/autodiff.hpp"

namespace camreid::toy {

struct BackboneConfig {
  std::size_t in_channels = 3;
  std::size_t block1_channels = 16;
  std::size_t block2_channels = 32;
  std::size_t kernel = 3;
  std::size_t embedding_dim = 32;
  std::size_t num_persons = 0;
  std::size_t num_cameras = 0;
  /// Inserts APRA (and the camera branch) between the two conv blocks.
  bool use_apra = true;
  apra::ApraConfig apra;
};

/// conv(3x3)+relu → [APRA] → conv(3x3, stride 2)+relu → global avg pool →
/// dense embedding → person logits. With APRA, the camera features pass
/// through gradient reversal into a pool+dense camera head.
class TinyBackbone {
 public:
  struct Output {
    Variable embedding;      // (N, D, 1, 1)
    Variable person_logits;  // (N, P, 1, 1)
    /// Present only when APRA is enabled.
    std::optional<Variable> camera_logits;
    std::optional<apra::ApraOutput> attention;
  };

  TinyBackbone(const BackboneConfig& config, std::mt19937_64& rng);

  /// `reverse` false swaps the gradient reversal for the identity.
  Output forward(Tape& tape, const Variable& images, bool reverse = true) const;

  /// Person-branch embeddings, inference only, processed in chunks.
  std::vector<std::vector<double>> embed(const std::vector<Tensor>& images,
                                         std::size_t chunk = 32) const;

  const BackboneConfig& config() const { return config_; }

  std::vector<Variable> parameters() const;
  /// Convolution and embedding layers present in both variants.
  std::vector<Variable> shared_parameters() const;
  /// Attention sub-network parameters (empty without APRA).
  std::vector<Variable> attention_parameters() const;
  std::vector<Variable> camera_head_parameters() const;

  const std::optional<apra::ApraParams>& apra_params() const { return apra_; }
  const std::optional<apra::CameraHead>& camera_head() const { return head_; }

 private:
  BackboneConfig config_;
  Variable conv1_w_, conv1_b_;
  Variable conv2_w_, conv2_b_;
  Variable embed_w_, embed_b_;
  Variable person_w_, person_b_;
  std::optional<apra::ApraParams> apra_;
  std::optional<apra::CameraHead> head_;
};

/// Stacks (1,C,H,W) images into one (N,C,H,W) tensor.
Tensor stack_images(const std::vector<const Tensor*>& images);

}  // namespace camreid::toy

#endif  // CAMREID_BACKBONE_HPP_
