#include "camreid/apra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "camreid/ops.hpp"

namespace camreid::apra {
namespace {

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

void ApraConfig::validate() const {
  if (channels == 0) throw std::invalid_argument("ApraConfig: channels must be > 0");
  if (reduction_ratio == 0) {
    throw std::invalid_argument("ApraConfig: reduction_ratio must be > 0");
  }
  if (channels >= reduction_ratio && channels % reduction_ratio != 0) {
    throw std::invalid_argument("ApraConfig: channels (" +
                                std::to_string(channels) +
                                ") not divisible by reduction_ratio (" +
                                std::to_string(reduction_ratio) + ")");
  }
  if (spatial_kernel % 2 == 0) {
    throw std::invalid_argument("ApraConfig: spatial_kernel must be odd");
  }
  if (!(reversal_scale > 0.0) || !std::isfinite(reversal_scale)) {
    throw std::invalid_argument("ApraConfig: reversal_scale must be > 0");
  }
  if (!(camera_loss_weight >= 0.0) || !std::isfinite(camera_loss_weight)) {
    throw std::invalid_argument("ApraConfig: camera_loss_weight must be >= 0");
  }
}

std::size_t ApraConfig::hidden_channels() const {
  return std::max<std::size_t>(1, channels / reduction_ratio);
}

ApraParams ApraParams::init(const ApraConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  const std::size_t hid = cfg.hidden_channels();
  const std::size_t k = cfg.spatial_kernel;
  ApraParams p;
  p.mlp1_weight = Variable::parameter(uniform_fan_in({hid, c, 1, 1}, c, rng));
  p.mlp1_bias = Variable::parameter(Tensor({hid, 1, 1, 1}));
  p.mlp2_weight = Variable::parameter(uniform_fan_in({c, hid, 1, 1}, hid, rng));
  p.mlp2_bias = Variable::parameter(Tensor({c, 1, 1, 1}));
  p.spatial_kernel =
      Variable::parameter(uniform_fan_in({1, 2, k, k}, 2 * k * k, rng));
  p.spatial_bias = Variable::parameter(Tensor({1, 1, 1, 1}));
  return p;
}

ApraParams ApraParams::zeros(const ApraConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  const std::size_t hid = cfg.hidden_channels();
  const std::size_t k = cfg.spatial_kernel;
  ApraParams p;
  p.mlp1_weight = Variable::parameter(Tensor({hid, c, 1, 1}));
  p.mlp1_bias = Variable::parameter(Tensor({hid, 1, 1, 1}));
  p.mlp2_weight = Variable::parameter(Tensor({c, hid, 1, 1}));
  p.mlp2_bias = Variable::parameter(Tensor({c, 1, 1, 1}));
  p.spatial_kernel = Variable::parameter(Tensor({1, 2, k, k}));
  p.spatial_bias = Variable::parameter(Tensor({1, 1, 1, 1}));
  return p;
}

std::vector<Variable> ApraParams::all() const {
  return {mlp1_weight, mlp1_bias, mlp2_weight,
          mlp2_bias,   spatial_kernel, spatial_bias};
}

AttentionPair channel_attention(Tape& tape, const Variable& features,
                                const ApraParams& params) {
  const std::size_t expected = params.mlp1_weight.shape().c;
  if (features.shape().c != expected) {
    throw ShapeError("channel_attention: input " + features.shape().str() +
                     " has " + std::to_string(features.shape().c) +
                     " channels, attention configured for " +
                     std::to_string(expected));
  }
  auto mlp = [&](const Variable& pooled) {
    const Variable hidden = ops::relu(
        tape, ops::dense(tape, pooled, params.mlp1_weight, params.mlp1_bias));
    return ops::dense(tape, hidden, params.mlp2_weight, params.mlp2_bias);
  };
  const Variable avg = mlp(ops::pool_global(tape, features, ops::PoolMode::kAvg));
  const Variable max = mlp(ops::pool_global(tape, features, ops::PoolMode::kMax));
  const Variable map = ops::sigmoid(tape, ops::add(tape, avg, max));
  return {map, ops::one_minus(tape, map)};
}

AttentionPair spatial_attention(Tape& tape, const Variable& modulated,
                                const ApraParams& params) {
  const Variable pooled = ops::concat_channels(
      tape, ops::pool_channel(tape, modulated, ops::PoolMode::kAvg),
      ops::pool_channel(tape, modulated, ops::PoolMode::kMax));
  const Variable logits =
      ops::conv2d(tape, pooled, params.spatial_kernel, params.spatial_bias);
  const Variable map = ops::sigmoid(tape, logits);
  return {map, ops::one_minus(tape, map)};
}

Variable attended_branch(Tape& tape, const Variable& features,
                         const Variable& channel_map,
                         const Variable& spatial_map) {
  const Variable gated =
      ops::mul(tape, ops::mul(tape, features, channel_map), spatial_map);
  return ops::relu(tape, ops::add(tape, gated, features));
}

ApraOutput apra_forward(Tape& tape, const Variable& features,
                        const ApraParams& params) {
  ApraOutput out;
  out.channel = channel_attention(tape, features, params);
  const Variable modulated = ops::mul(tape, features, out.channel.forward_map);
  out.spatial = spatial_attention(tape, modulated, params);
  out.person_features = attended_branch(tape, features, out.channel.forward_map,
                                        out.spatial.forward_map);
  out.camera_features = attended_branch(tape, features, out.channel.inverse_map,
                                        out.spatial.inverse_map);
  return out;
}

CameraHead CameraHead::init(std::size_t channels, std::size_t num_cameras,
                            std::mt19937_64& rng) {
  CameraHead h;
  h.weight = Variable::parameter(
      uniform_fan_in({num_cameras, channels, 1, 1}, channels, rng));
  h.bias = Variable::parameter(Tensor({num_cameras, 1, 1, 1}));
  return h;
}

CameraHead CameraHead::zeros(std::size_t channels, std::size_t num_cameras) {
  CameraHead h;
  h.weight = Variable::parameter(Tensor({num_cameras, channels, 1, 1}));
  h.bias = Variable::parameter(Tensor({num_cameras, 1, 1, 1}));
  return h;
}

Variable camera_head(Tape& tape, const Variable& camera_features,
                     const CameraHead& head) {
  const Variable pooled =
      ops::pool_global(tape, camera_features, ops::PoolMode::kAvg);
  return ops::dense(tape, pooled, head.weight, head.bias);
}

Variable camera_logits(Tape& tape, const ApraOutput& out,
                       const CameraHead& head, double reversal_scale,
                       bool reverse) {
  const Variable routed =
      reverse ? ops::gradient_reversal(tape, out.camera_features, reversal_scale)
              : out.camera_features;
  return camera_head(tape, routed, head);
}

}  // namespace camreid::apra
