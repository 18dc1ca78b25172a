#include "camreid/probe.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace camreid::toy {

double camera_probe(const std::vector<std::vector<double>>& embeddings,
                    const std::vector<std::size_t>& cameras,
                    const ProbeConfig& config) {
  if (embeddings.size() != cameras.size() || embeddings.empty()) {
    throw std::invalid_argument("camera_probe: need one camera label per embedding");
  }
  if (std::set<std::size_t>(cameras.begin(), cameras.end()).size() < 2) {
    throw std::invalid_argument("camera_probe: need at least two cameras");
  }
  const std::size_t n = embeddings.size();
  const std::size_t d = embeddings.front().size();
  const std::size_t k = *std::max_element(cameras.begin(), cameras.end()) + 1;

  // z-score each dimension; constant dimensions become 0.
  std::vector<double> x(n * d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += embeddings[i].at(j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = embeddings[i][j] - mean;
      var += t * t;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      x[i * d + j] = sd > 1e-12 ? (embeddings[i][j] - mean) / sd : 0.0;
  }

  std::vector<double> w(k * d, 0.0);
  std::vector<double> b(k, 0.0);
  std::vector<double> logits(k);
  std::vector<double> gw(k * d);
  std::vector<double> gb(k);

  auto compute_logits = [&](std::size_t i) {
    for (std::size_t c = 0; c < k; ++c) {
      double z = b[c];
      for (std::size_t j = 0; j < d; ++j) z += w[c * d + j] * x[i * d + j];
      logits[c] = z;
    }
  };

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      compute_logits(i);
      const double mx = *std::max_element(logits.begin(), logits.end());
      double denom = 0.0;
      for (double& z : logits) {
        z = std::exp(z - mx);
        denom += z;
      }
      for (std::size_t c = 0; c < k; ++c) {
        const double r = logits[c] / denom - (c == cameras[i] ? 1.0 : 0.0);
        gb[c] += r;
        for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += r * x[i * d + j];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      b[c] -= config.learning_rate * gb[c] * inv_n;
      for (std::size_t j = 0; j < d; ++j)
        w[c * d + j] -= config.learning_rate * gw[c * d + j] * inv_n;
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    compute_logits(i);
    // max_element returns the first maximum: ties go to the lowest camera.
    const auto pred = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (pred == cameras[i]) ++correct;
  }
  return static_cast<double>(correct) * inv_n;
}

}  // namespace camreid::toy
