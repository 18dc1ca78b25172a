#ifndef CAMREID_PROBE_HPP_
#define CAMREID_PROBE_HPP_

#include <cstddef>
#include <vector>

namespace camreid::toy {

struct ProbeConfig {
  std::size_t iterations = 300;
  double learning_rate = 0.5;
};

/// Fits a multinomial logistic regression (zero init, full-batch gradient
/// descent, fixed budget) that predicts the camera from z-scored embeddings,
/// and returns its accuracy on the same set. Uninformative embeddings score
/// the majority-class prior. Throws std::invalid_argument with fewer than two
/// cameras.
double camera_probe(const std::vector<std::vector<double>>& embeddings,
                    const std::vector<std::size_t>& cameras,
                    const ProbeConfig& config = {});

}  // namespace camreid::toy

#endif  // CAMREID_PROBE_HPP_
