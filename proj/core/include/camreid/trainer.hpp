#ifndef CAMREID_TRAINER_HPP_
#define CAMREID_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "camreid/autodiff.hpp"
#include "camreid/backbone.hpp"
#include "camreid/toyworld.hpp"

namespace camreid::toy {

/// Plain SGD with heavy-ball momentum: v ← m·v + g;  p ← p − lr·v.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Variable> params, double lr, double momentum);
  void step();
  void zero_grad();
  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<Variable> params_;
  std::vector<Tensor> velocity_;
  double lr_;
  double momentum_;
};

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 0.05;
  double momentum = 0.9;
  /// Step decay: the learning rate is multiplied by `lr_decay` at the start
  /// of each listed epoch (1-based).
  std::vector<std::size_t> lr_milestones = {21};
  double lr_decay = 0.1;
  /// Linear warmup from lr/warmup_steps to lr over this many epochs.
  std::size_t warmup_epochs = 5;
  /// PK batches: P identities × K instances.
  std::size_t p = 4;
  std::size_t k = 4;
  double margin = 0.3;
  /// Camera-loss weight λ.
  double lambda = 0.01;
  /// Reversal scale μ.
  double mu = 1.0;
  /// false replaces the reversal with the identity (ablation).
  bool reversal = true;
  /// Compute the camera probe on test embeddings after every epoch.
  bool probe_each_epoch = true;
  /// A minibatch loss above this (or non-finite) counts as divergence. The
  /// cross-entropy clamp keeps losses finite, so a ceiling is needed too.
  double divergence_loss = 1e6;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss_person_ce = 0.0;
  double loss_triplet = 0.0;
  double loss_camera_ce = 0.0;
  double probe_acc = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Batch index lists for one epoch: ⌊train/(P·K)⌋ batches (at least one),
/// each with P distinct identities drawn from a reshuffled identity queue
/// and K instances per identity (with replacement only when an identity
/// has fewer than K samples).
std::vector<std::vector<std::size_t>> pk_batches(
    const std::vector<ToySample>& train, std::size_t p, std::size_t k,
    std::mt19937_64& rng);

/// Minibatch SGD on person CE + triplet (+ λ·camera CE with APRA).
/// Throws DivergenceError with the 1-based epoch on a non-finite loss or
/// one above `divergence_loss`.
std::vector<EpochLog> train(TinyBackbone& model, const ToyWorld& world,
                            const TrainConfig& config, std::uint64_t seed,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Probe accuracy on the test split (query + gallery) person embeddings.
double test_probe_accuracy(const TinyBackbone& model, const ToyWorld& world);

/// Header `epoch,loss_person_ce,loss_triplet,loss_camera_ce,probe_acc`.
std::string epoch_log_csv(const std::vector<EpochLog>& log);

}  // namespace camreid::toy

#endif  // CAMREID_TRAINER_HPP_
