#include "camreid/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "camreid/losses.hpp"
#include "camreid/ops.hpp"
#include "camreid/probe.hpp"

namespace camreid::toy {

SgdMomentum::SgdMomentum(std::vector<Variable> params, double lr,
                         double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  for (const auto& p : params_) velocity_.emplace_back(p.shape());
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    const Tensor g = params_[i].grad();
    auto v = velocity_[i].data();
    auto p = params_[i].mutable_value().data();
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      p[j] -= lr_ * v[j];
    }
  }
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<std::vector<std::size_t>> pk_batches(
    const std::vector<ToySample>& train, std::size_t p, std::size_t k,
    std::mt19937_64& rng) {
  std::map<std::size_t, std::vector<std::size_t>> by_person;
  for (std::size_t i = 0; i < train.size(); ++i) by_person[train[i].person].push_back(i);
  if (by_person.size() < 2 || p < 2 || k < 1) {
    throw std::invalid_argument("pk_batches: need P >= 2 identities per batch");
  }
  p = std::min(p, by_person.size());

  std::vector<std::size_t> ids;
  for (const auto& [id, idx] : by_person) ids.push_back(id);

  const std::size_t num_batches = std::max<std::size_t>(1, train.size() / (p * k));
  std::vector<std::size_t> queue;
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < num_batches; ++b) {
    std::vector<std::size_t> batch;
    std::vector<std::size_t> chosen;
    while (chosen.size() < p) {
      if (queue.empty()) {
        queue = ids;
        std::shuffle(queue.begin(), queue.end(), rng);
      }
      const std::size_t id = queue.back();
      queue.pop_back();
      if (std::find(chosen.begin(), chosen.end(), id) != chosen.end()) continue;
      chosen.push_back(id);
    }
    for (std::size_t id : chosen) {
      std::vector<std::size_t> pool = by_person[id];
      std::shuffle(pool.begin(), pool.end(), rng);
      for (std::size_t j = 0; j < k; ++j) {
        if (j < pool.size()) {
          batch.push_back(pool[j]);
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          batch.push_back(pool[pick(rng)]);
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

double test_probe_accuracy(const TinyBackbone& model, const ToyWorld& world) {
  std::vector<Tensor> images;
  std::vector<std::size_t> cams;
  for (const auto* split : {&world.query, &world.gallery})
    for (const auto& s : *split) {
      images.push_back(s.image);
      cams.push_back(s.camera);
    }
  return camera_probe(model.embed(images), cams);
}

std::vector<EpochLog> train(TinyBackbone& model, const ToyWorld& world,
                            const TrainConfig& config, std::uint64_t seed,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  SgdMomentum opt(model.parameters(), config.lr, config.momentum);
  std::vector<EpochLog> log;

  double base_lr = config.lr;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (std::find(config.lr_milestones.begin(), config.lr_milestones.end(), epoch) !=
        config.lr_milestones.end()) {
      base_lr *= config.lr_decay;
    }
    EpochLog entry;
    entry.epoch = epoch;
    const auto batches = pk_batches(world.train, config.p, config.k, rng);
    const std::size_t warmup_steps = config.warmup_epochs * batches.size();
    for (const auto& batch : batches) {
      ++step;
      opt.set_learning_rate(step < warmup_steps ? base_lr * static_cast<double>(step) /
                                                      static_cast<double>(warmup_steps)
                                                : base_lr);
      std::vector<const Tensor*> images;
      std::vector<std::size_t> persons;
      std::vector<std::size_t> cameras;
      for (std::size_t i : batch) {
        images.push_back(&world.train[i].image);
        persons.push_back(world.train[i].person);
        cameras.push_back(world.train[i].camera);
      }

      Tape tape;
      const auto out = model.forward(tape, Variable::constant(stack_images(images)),
                                     config.reversal);
      const Variable person_ce = losses::cross_entropy(tape, out.person_logits, persons);
      const Variable triplet =
          losses::triplet_loss(tape, out.embedding, persons, config.margin);
      Variable total;
      double camera_ce_value = 0.0;
      if (out.camera_logits) {
        const Variable camera_ce =
            losses::cross_entropy(tape, *out.camera_logits, cameras);
        camera_ce_value = camera_ce.value().item();
        total = losses::combined_loss(tape, person_ce, triplet, camera_ce,
                                      config.lambda);
      } else {
        total = ops::add(tape, person_ce, triplet);
      }
      const double value = total.value().item();
      if (!std::isfinite(value) || value > config.divergence_loss) {
        throw DivergenceError(epoch, "loss " + std::to_string(value) + " at epoch " +
                                         std::to_string(epoch));
      }
      opt.zero_grad();
      tape.backward(total);
      opt.step();

      entry.loss_person_ce += person_ce.value().item();
      entry.loss_triplet += triplet.value().item();
      entry.loss_camera_ce += camera_ce_value;
    }
    const double nb = static_cast<double>(batches.size());
    entry.loss_person_ce /= nb;
    entry.loss_triplet /= nb;
    entry.loss_camera_ce /= nb;
    if (config.probe_each_epoch) entry.probe_acc = test_probe_accuracy(model, world);
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,loss_person_ce,loss_triplet,loss_camera_ce,probe_acc\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", e.epoch,
                  e.loss_person_ce, e.loss_triplet, e.loss_camera_ce, e.probe_acc);
    os << buf;
  }
  return os.str();
}

}  // namespace camreid::toy
