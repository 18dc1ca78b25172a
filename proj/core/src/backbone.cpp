#include "camreid/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "camreid/ops.hpp"

namespace camreid::toy {
namespace {

// Uniform in ±gain/√fan_in.
Variable uniform_param(Shape shape, std::size_t fan_in, std::mt19937_64& rng,
                       double gain = 1.0) {
  const double bound = gain / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return Variable::parameter(std::move(t));
}

Variable zero_bias(std::size_t n) {
  return Variable::parameter(Tensor(Shape{n, 1, 1, 1}));
}

}  // namespace

Tensor stack_images(const std::vector<const Tensor*>& images) {
  if (images.empty()) throw std::invalid_argument("stack_images: no images");
  const Shape s = images.front()->shape();
  if (s.n != 1) throw ShapeError("stack_images: expected (1,C,H,W), got " + s.str());
  Tensor out(Shape{images.size(), s.c, s.h, s.w});
  const std::size_t per = s.numel();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->shape() != s) {
      throw ShapeError("stack_images: mixed shapes " + s.str() + " and " +
                       images[i]->shape().str());
    }
    std::copy_n(images[i]->data().begin(), per, out.data().begin() + i * per);
  }
  return out;
}

TinyBackbone::TinyBackbone(const BackboneConfig& config, std::mt19937_64& rng)
    : config_(config) {
  if (config_.num_persons < 2) {
    throw std::invalid_argument("TinyBackbone: need at least 2 person classes");
  }
  const std::size_t k = config_.kernel;
  const std::size_t c0 = config_.in_channels;
  const std::size_t c1 = config_.block1_channels;
  const std::size_t c2 = config_.block2_channels;
  const std::size_t d = config_.embedding_dim;
  // Shared layers are drawn first so both variants start from identical
  // shared weights for the same seed.
  // He gain keeps activation scale through the ReLU convolutions. A small
  // embedding and a wider person classifier let cross-entropy take hold
  // before batch-hard triplet can shrink every embedding towards one point.
  const double he = std::sqrt(6.0);
  const double embed_gain = 0.3;
  const double person_gain = 3.0;
  conv1_w_ = uniform_param({c1, c0, k, k}, c0 * k * k, rng, he);
  conv1_b_ = zero_bias(c1);
  conv2_w_ = uniform_param({c2, c1, k, k}, c1 * k * k, rng, he);
  conv2_b_ = zero_bias(c2);
  embed_w_ = uniform_param({d, c2, 1, 1}, c2, rng, embed_gain);
  embed_b_ = zero_bias(d);
  person_w_ = uniform_param({config_.num_persons, d, 1, 1}, d, rng, person_gain);
  person_b_ = zero_bias(config_.num_persons);
  if (config_.use_apra) {
    if (config_.num_cameras < 2) {
      throw std::invalid_argument("TinyBackbone: camera branch needs >= 2 cameras");
    }
    config_.apra.channels = c1;
    apra_ = apra::ApraParams::init(config_.apra, rng);
    head_ = apra::CameraHead::init(c1, config_.num_cameras, rng);
  }
}

TinyBackbone::Output TinyBackbone::forward(Tape& tape, const Variable& images,
                                           bool reverse) const {
  Output out;
  Variable x = ops::relu(tape, ops::conv2d(tape, images, conv1_w_, conv1_b_));
  if (apra_) {
    apra::ApraOutput a = apra::apra_forward(tape, x, *apra_);
    out.camera_logits = apra::camera_logits(tape, a, *head_,
                                            config_.apra.reversal_scale, reverse);
    x = a.person_features;
    out.attention = std::move(a);
  }
  x = ops::relu(tape, ops::conv2d(tape, x, conv2_w_, conv2_b_, 2));
  x = ops::pool_global(tape, x, ops::PoolMode::kAvg);
  out.embedding = ops::dense(tape, x, embed_w_, embed_b_);
  out.person_logits = ops::dense(tape, out.embedding, person_w_, person_b_);
  return out;
}

std::vector<std::vector<double>> TinyBackbone::embed(
    const std::vector<Tensor>& images, std::size_t chunk) const {
  std::vector<std::vector<double>> result;
  result.reserve(images.size());
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t end = std::min(images.size(), start + chunk);
    std::vector<const Tensor*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&images[i]);
    Tape tape;
    const Output o =
        forward(tape, Variable::constant(stack_images(batch)), true);
    const Tensor& e = o.embedding.value();
    const std::size_t d = e.shape().c;
    for (std::size_t i = 0; i < end - start; ++i)
      result.emplace_back(e.data().begin() + i * d,
                          e.data().begin() + (i + 1) * d);
  }
  return result;
}

std::vector<Variable> TinyBackbone::shared_parameters() const {
  return {conv1_w_, conv1_b_, conv2_w_, conv2_b_,
          embed_w_, embed_b_, person_w_, person_b_};
}

std::vector<Variable> TinyBackbone::attention_parameters() const {
  return apra_ ? apra_->all() : std::vector<Variable>{};
}

std::vector<Variable> TinyBackbone::camera_head_parameters() const {
  return head_ ? head_->all() : std::vector<Variable>{};
}

std::vector<Variable> TinyBackbone::parameters() const {
  std::vector<Variable> all = shared_parameters();
  for (auto& v : attention_parameters()) all.push_back(v);
  for (auto& v : camera_head_parameters()) all.push_back(v);
  return all;
}

}  // namespace camreid::toy
