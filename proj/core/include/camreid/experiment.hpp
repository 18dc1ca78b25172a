#ifndef CAMREID_EXPERIMENT_HPP_
#define CAMREID_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "camreid/backbone.hpp"
#include "camreid/report.hpp"
#include "camreid/toyworld.hpp"
#include "camreid/trainer.hpp"

namespace camreid::toy {

struct ExperimentConfig {
  ToyWorldConfig world;
  TrainConfig train;
  /// num_persons / num_cameras / use_apra are filled in per run.
  BackboneConfig backbone;
};

struct VariantResult {
  std::string name;  // "baseline" or "apra"
  std::uint64_t seed = 0;
  report::EvaluationReport report;
  double probe_acc = 0.0;
  std::vector<EpochLog> log;
};

/// Builds the backbone for `world`, trains it (`epochs` may be 0) and
/// evaluates person-branch embeddings of the test split.
VariantResult run_variant(const ToyWorld& world, const ExperimentConfig& config,
                          bool use_apra, std::uint64_t seed,
                          const std::function<void(const EpochLog&)>& on_epoch = {});

/// Query/gallery embedding records of the test split under `model`.
std::vector<metrics::EmbeddingRecord> embed_split(
    const TinyBackbone& model, const std::vector<ToySample>& samples,
    metrics::Split split);

struct SeedComparison {
  std::uint64_t seed = 0;
  VariantResult baseline;
  VariantResult apra;
};

struct Comparison {
  std::vector<SeedComparison> runs;

  std::size_t seeds_weakest_q_improved() const;
  std::size_t seeds_probe_reduced() const;
  /// Seeds whose baseline weakest q-mAP camera is the configured outlier.
  std::size_t seeds_outlier_weakest(std::size_t outlier_camera) const;
};

/// Trains baseline and +APRA on the same world for each seed (at least 3).
Comparison compare_variants(const ExperimentConfig& config,
                            const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const VariantResult&)>& on_run = {});

/// One row per (seed, variant) with global and Table-3-style columns.
std::string per_seed_csv(const Comparison& c);

/// Mean and population std over seeds per variant:
/// `variant,seeds,global_map,global_map_std,weakest_q_map,weakest_q_map_std,
/// weakest_g_map,weakest_g_map_std,average_q_map,average_q_map_std,
/// average_g_map,average_g_map_std,probe_acc,probe_acc_std`.
std::string comparison_csv(const Comparison& c);

}  // namespace camreid::toy

#endif  // CAMREID_EXPERIMENT_HPP_
