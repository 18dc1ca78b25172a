#ifndef CAMREID_TOYWORLD_HPP_
#define CAMREID_TOYWORLD_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "camreid/tensor.hpp"

namespace camreid::toy {

/// Synthetic multi-camera world. A person is a latent vector read out into an
/// upper-garment colour, a lower-garment colour and two stripe amplitudes,
/// painted into a central foreground region. Each camera applies its own
/// channel gain, colour bias, background texture and noise, all scaled by
/// that camera's style strength.
struct ToyWorldConfig {
  std::size_t num_persons = 48;
  /// The last `num_test_persons` identities form query/gallery; the rest
  /// are training identities.
  std::size_t num_test_persons = 24;
  std::size_t num_cameras = 4;
  std::size_t samples_per_pair = 3;
  std::size_t latent_dim = 8;
  std::size_t channels = 3;
  std::size_t height = 16;
  std::size_t width = 16;

  /// Spread of the random per-camera gain around 1.
  double gain_spread = 0.3;
  /// Magnitude of the random per-camera colour bias.
  double bias_scale = 0.5;
  /// Amplitude of the per-camera background texture.
  double background_scale = 0.6;
  /// Per-sample noise standard deviation at strength 1.
  double noise_scale = 0.25;
  /// Per-sample perturbation of the person latent (pose/appearance jitter).
  double latent_jitter = 0.35;
  /// Style-strength multiplier per camera; empty means all 1 except the
  /// last camera, which gets 4.
  std::vector<double> style_strength;

  /// Strengths with the default filled in.
  std::vector<double> strengths() const;
  /// Throws std::invalid_argument if the config is unusable.
  void validate() const;
  /// Camera with the largest style strength (lowest id on ties).
  std::size_t outlier_camera() const;
};

struct ToySample {
  Tensor image;  // (1, C, H, W)
  std::size_t person = 0;
  std::size_t camera = 0;
};

struct ToyWorld {
  ToyWorldConfig config;
  std::vector<ToySample> train;
  std::vector<ToySample> query;
  std::vector<ToySample> gallery;
};

/// Fully determined by (config, seed). Training identities are relabelled
/// 0..num_train-1; test identities keep ids num_train..num_persons-1.
/// For each test (person, camera) the first sample is a query and the rest
/// go to the gallery.
ToyWorld generate_world(const ToyWorldConfig& config, std::uint64_t seed);

/// Per camera, the mean of each image channel over all of that camera's
/// pixels: result[camera][channel].
std::vector<std::vector<double>> channel_means(
    const std::vector<ToySample>& samples, std::size_t num_cameras);

}  // namespace camreid::toy

#endif  // CAMREID_TOYWORLD_HPP_
