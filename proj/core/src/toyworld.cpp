#include "camreid/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace camreid::toy {
namespace {

// Independent streams so that changing one knob (say, a style strength)
// never shifts the random draws of another.
enum class Stream : std::uint64_t {
  kBasis = 1,
  kPersons = 2,
  kCameras = 3,
  kSamples = 4,
};

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

constexpr std::size_t kBlock = 4;

// Blocky random texture: Gaussian values on a (H/4, W/4) grid, nearest
// upsampled.
Tensor coarse_texture(const ToyWorldConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t gh = (cfg.height + kBlock - 1) / kBlock;
  const std::size_t gw = (cfg.width + kBlock - 1) / kBlock;
  std::vector<double> grid(cfg.channels * gh * gw);
  for (double& v : grid) v = normal(rng);
  Tensor t(Shape{1, cfg.channels, cfg.height, cfg.width});
  for (std::size_t c = 0; c < cfg.channels; ++c)
    for (std::size_t h = 0; h < cfg.height; ++h)
      for (std::size_t w = 0; w < cfg.width; ++w)
        t.at(0, c, h, w) = grid[(c * gh + h / kBlock) * gw + w / kBlock];
  return t;
}

// Period-4 square wave: +1, +1, -1, -1, ...
double stripe(std::size_t i) { return (i / 2) % 2 == 0 ? 1.0 : -1.0; }

bool in_foreground(const ToyWorldConfig& cfg, std::size_t h, std::size_t w) {
  return h >= cfg.height / 8 && h < cfg.height - cfg.height / 8 &&
         w >= cfg.width / 4 && w < cfg.width - cfg.width / 4;
}

struct CameraStyle {
  std::vector<double> gain;
  std::vector<double> bias;
  Tensor background;
  double noise = 0.0;
};

}  // namespace

std::vector<double> ToyWorldConfig::strengths() const {
  if (!style_strength.empty()) return style_strength;
  std::vector<double> s(num_cameras, 1.0);
  if (!s.empty()) s.back() = 4.0;
  return s;
}

void ToyWorldConfig::validate() const {
  if (num_cameras < 3) {
    throw std::invalid_argument("ToyWorldConfig: need at least 3 cameras");
  }
  if (num_test_persons < 2 || num_test_persons >= num_persons ||
      num_persons - num_test_persons < 2) {
    throw std::invalid_argument(
        "ToyWorldConfig: need >= 2 training and >= 2 test identities");
  }
  if (samples_per_pair < 2) {
    throw std::invalid_argument(
        "ToyWorldConfig: samples_per_pair must be >= 2 (query + gallery)");
  }
  if (latent_dim == 0 || channels == 0 || height < kBlock || width < kBlock) {
    throw std::invalid_argument("ToyWorldConfig: degenerate image or latent size");
  }
  if (!style_strength.empty() && style_strength.size() != num_cameras) {
    throw std::invalid_argument("ToyWorldConfig: style_strength has " +
                                std::to_string(style_strength.size()) +
                                " entries for " + std::to_string(num_cameras) +
                                " cameras");
  }
  for (double v : {gain_spread, bias_scale, background_scale, noise_scale,
                   latent_jitter}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("ToyWorldConfig: scales must be finite and >= 0");
    }
  }
  auto s = strengths();
  for (double v : s) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("ToyWorldConfig: style strengths must be >= 0");
    }
  }
  // At least one camera must stand out: max strength >= 2x the median.
  std::sort(s.begin(), s.end());
  const std::size_t m = s.size() / 2;
  const double median = s.size() % 2 ? s[m] : 0.5 * (s[m - 1] + s[m]);
  if (s.back() < 2.0 * median) {
    throw std::invalid_argument(
        "ToyWorldConfig: no outlier camera (max style strength < 2x median)");
  }
}

std::size_t ToyWorldConfig::outlier_camera() const {
  const auto s = strengths();
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

ToyWorld generate_world(const ToyWorldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto strength = cfg.strengths();

  // Fixed linear read-outs from the person latent to appearance: one colour
  // per garment (upper and lower body) and two stripe amplitudes. All of it
  // is position independent, so it survives global pooling.
  auto basis_rng = make_rng(seed, Stream::kBasis);
  std::normal_distribution<double> basis_normal(0.0, 1.0);
  const std::size_t num_readouts = 2 * cfg.channels + 2;
  std::vector<std::vector<double>> readout(num_readouts,
                                           std::vector<double>(cfg.latent_dim));
  for (auto& row : readout)
    for (double& v : row) v = basis_normal(basis_rng);

  auto person_rng = make_rng(seed, Stream::kPersons);
  std::normal_distribution<double> person_normal(0.0, 1.0);
  std::vector<std::vector<double>> latents(cfg.num_persons,
                                           std::vector<double>(cfg.latent_dim));
  for (auto& z : latents)
    for (double& v : z) v = person_normal(person_rng);

  auto camera_rng = make_rng(seed, Stream::kCameras);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> camera_normal(0.0, 1.0);
  std::vector<CameraStyle> styles(cfg.num_cameras);
  for (std::size_t cam = 0; cam < cfg.num_cameras; ++cam) {
    auto& st = styles[cam];
    const double s = strength[cam];
    st.gain.resize(cfg.channels);
    for (double& g : st.gain) g = 1.0 + s * cfg.gain_spread * unit(camera_rng);
    // Bias has fixed norm bias_scale·s in a random direction.
    st.bias.resize(cfg.channels);
    double norm = 0.0;
    for (double& b : st.bias) {
      b = camera_normal(camera_rng);
      norm += b * b;
    }
    norm = std::sqrt(norm);
    for (double& b : st.bias) b = norm > 0.0 ? s * cfg.bias_scale * b / norm : 0.0;
    // Background texture, zero mean per channel over the pixels where it is
    // visible, so a camera's colour cast comes from its bias alone.
    st.background = coarse_texture(cfg, camera_rng);
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      double mean = 0.0;
      std::size_t count = 0;
      for (std::size_t h = 0; h < cfg.height; ++h)
        for (std::size_t w = 0; w < cfg.width; ++w)
          if (!in_foreground(cfg, h, w)) {
            mean += st.background.at(0, c, h, w);
            ++count;
          }
      mean /= static_cast<double>(std::max<std::size_t>(count, 1));
      for (std::size_t h = 0; h < cfg.height; ++h)
        for (std::size_t w = 0; w < cfg.width; ++w)
          st.background.at(0, c, h, w) =
              s * cfg.background_scale * (st.background.at(0, c, h, w) - mean);
    }
    st.noise = s * cfg.noise_scale;
  }

  ToyWorld world;
  world.config = cfg;
  const std::size_t num_train = cfg.num_persons - cfg.num_test_persons;
  const double latent_norm = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  auto sample_rng = make_rng(seed, Stream::kSamples);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (std::size_t person = 0; person < cfg.num_persons; ++person) {
    for (std::size_t cam = 0; cam < cfg.num_cameras; ++cam) {
      const auto& st = styles[cam];
      for (std::size_t k = 0; k < cfg.samples_per_pair; ++k) {
        std::vector<double> z = latents[person];
        for (double& v : z) v += cfg.latent_jitter * normal(sample_rng);
        std::vector<double> look(num_readouts, 0.0);
        for (std::size_t r = 0; r < num_readouts; ++r) {
          for (std::size_t j = 0; j < cfg.latent_dim; ++j) look[r] += readout[r][j] * z[j];
          look[r] *= latent_norm;
        }
        const double stripe_h = look[2 * cfg.channels];
        const double stripe_v = look[2 * cfg.channels + 1];

        ToySample sample;
        sample.person = person;
        sample.camera = cam;
        sample.image = Tensor(Shape{1, cfg.channels, cfg.height, cfg.width});
        for (std::size_t c = 0; c < cfg.channels; ++c)
          for (std::size_t h = 0; h < cfg.height; ++h)
            for (std::size_t w = 0; w < cfg.width; ++w) {
              double content;
              if (in_foreground(cfg, h, w)) {
                const bool upper = h < cfg.height / 2;
                content = look[upper ? c : cfg.channels + c] +
                          stripe_h * stripe(h) + stripe_v * stripe(w);
              } else {
                content = st.background.at(0, c, h, w);
              }
              // Noise is always drawn so the stream stays aligned.
              const double eps = normal(sample_rng);
              sample.image.at(0, c, h, w) =
                  st.gain[c] * content + st.bias[c] + st.noise * eps;
            }

        if (person < num_train) {
          world.train.push_back(std::move(sample));
        } else if (k == 0) {
          world.query.push_back(std::move(sample));
        } else {
          world.gallery.push_back(std::move(sample));
        }
      }
    }
  }
  return world;
}

std::vector<std::vector<double>> channel_means(
    const std::vector<ToySample>& samples, std::size_t num_cameras) {
  std::vector<std::vector<double>> sums(num_cameras);
  std::vector<std::size_t> counts(num_cameras, 0);
  for (const auto& s : samples) {
    if (s.camera >= num_cameras) {
      throw std::out_of_range("channel_means: camera id out of range");
    }
    const Shape sh = s.image.shape();
    auto& acc = sums[s.camera];
    acc.resize(sh.c, 0.0);
    for (std::size_t c = 0; c < sh.c; ++c)
      for (std::size_t p = 0; p < sh.spatial(); ++p) acc[c] += s.image[c * sh.spatial() + p];
    counts[s.camera] += sh.spatial();
  }
  for (std::size_t cam = 0; cam < num_cameras; ++cam)
    for (double& v : sums[cam])
      v /= static_cast<double>(std::max<std::size_t>(counts[cam], 1));
  return sums;
}

}  // namespace camreid::toy
