#ifndef CAMREID_GRADCHECK_SUITE_HPP_
#define CAMREID_GRADCHECK_SUITE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace camreid {

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t num_seeds = 20;
  double step = 1e-5;
  /// Name of a case whose VJP is deliberately scaled by 2 (empty: none).
  std::string fault_op;
};

struct GradCaseResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t seeds = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Names of every case in run order: tensor ops, the APRA block, losses.
std::vector<std::string> gradcheck_case_names();

/// Finite-difference checks of every differentiable op over seeded random
/// inputs. Smooth ops must reach relative error below 1e-5, ops with kinks
/// (relu, max pooling, the APRA block, triplet) below 1e-4.
/// Throws std::invalid_argument for an unknown fault_op.
std::vector<GradCaseResult> run_gradcheck_suite(const GradSuiteOptions& options);

}  // namespace camreid

#endif  // CAMREID_GRADCHECK_SUITE_HPP_
