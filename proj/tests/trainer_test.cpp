#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "camreid/experiment.hpp"
#include "camreid/losses.hpp"
#include "camreid/ops.hpp"
#include "camreid/probe.hpp"
#include "camreid/trainer.hpp"

namespace camreid::toy {
namespace {

ToyWorldConfig tiny_world() {
  ToyWorldConfig cfg;
  cfg.num_persons = 8;
  cfg.num_test_persons = 4;
  return cfg;
}

BackboneConfig backbone_for(const ToyWorldConfig& w, bool apra, double mu = 1.0) {
  BackboneConfig b;
  b.num_persons = w.num_persons - w.num_test_persons;
  b.num_cameras = w.num_cameras;
  b.use_apra = apra;
  b.apra.channels = b.block1_channels;
  b.apra.reversal_scale = mu;
  return b;
}

TEST(SgdMomentumTest, TwoStepsMatchHandComputation) {
  // loss = (a·x + b − y)^2 with x = 2, y = 1 at a = 1, b = 0.5.
  auto a = Variable::parameter(Tensor::scalar(1.0));
  auto b = Variable::parameter(Tensor::scalar(0.5));
  SgdMomentum opt({a, b}, 0.1, 0.9);
  auto step = [&] {
    Tape tape;
    auto r = ops::add(tape, ops::add(tape, ops::scale(tape, a, 2.0), b),
                      Variable::constant(Tensor::scalar(-1.0)));
    opt.zero_grad();
    tape.backward(ops::mul(tape, r, r));
    opt.step();
  };
  // Residual 1.5: grads (2·1.5·2, 2·1.5) = (6, 3); v = g.
  step();
  EXPECT_DOUBLE_EQ(a.value().item(), 1.0 - 0.1 * 6.0);
  EXPECT_DOUBLE_EQ(b.value().item(), 0.5 - 0.1 * 3.0);
  // Residual 2·0.4 + 0.2 − 1 = 0: grads zero, v = 0.9·(6, 3).
  step();
  EXPECT_NEAR(a.value().item(), 0.4 - 0.1 * 5.4, 1e-15);
  EXPECT_NEAR(b.value().item(), 0.2 - 0.1 * 2.7, 1e-15);
}

TEST(PkBatchesTest, EachBatchHasPDistinctIdentitiesWithKSamples) {
  const auto world = generate_world(tiny_world(), 1);
  std::mt19937_64 rng(2);
  const auto batches = pk_batches(world.train, 4, 4, rng);
  EXPECT_EQ(batches.size(), world.train.size() / 16);
  for (const auto& batch : batches) {
    ASSERT_EQ(batch.size(), 16u);
    std::map<std::size_t, int> count;
    for (std::size_t i : batch) ++count[world.train[i].person];
    EXPECT_EQ(count.size(), 4u);
    for (const auto& [p, n] : count) EXPECT_EQ(n, 4);
  }
}

TEST(BackboneTest, VariantsShareLayerShapes) {
  const auto w = tiny_world();
  std::mt19937_64 r1(3), r2(3);
  TinyBackbone with(backbone_for(w, true), r1);
  TinyBackbone without(backbone_for(w, false), r2);
  const auto a = with.shared_parameters();
  const auto b = without.shared_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].shape(), b[i].shape());
  EXPECT_TRUE(without.attention_parameters().empty());
  EXPECT_TRUE(without.camera_head_parameters().empty());
  EXPECT_FALSE(with.attention_parameters().empty());

  const auto world = generate_world(w, 4);
  Tape tape;
  auto out = without.forward(tape, Variable::constant(world.train[0].image));
  EXPECT_FALSE(out.camera_logits.has_value());
  EXPECT_EQ(out.embedding.shape(), (Shape{1, 32, 1, 1}));
  EXPECT_EQ(out.person_logits.shape(), (Shape{1, 4, 1, 1}));
}

struct BatchGradients {
  std::vector<Tensor> shared;
  std::vector<Tensor> attention;
};

// Gradients of one training batch under the combined loss.
BatchGradients batch_gradients(double lambda, double mu, bool camera_only, bool reverse) {
  const auto w = tiny_world();
  const auto world = generate_world(w, 5);
  std::mt19937_64 rng(6);
  TinyBackbone model(backbone_for(w, true, mu), rng);
  std::vector<const Tensor*> images;
  std::vector<std::size_t> persons, cameras;
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& s = world.train[i * 3];
    images.push_back(&s.image);
    persons.push_back(s.person);
    cameras.push_back(s.camera);
  }
  Tape tape;
  auto out = model.forward(tape, Variable::constant(stack_images(images)), reverse);
  auto camera_ce = losses::cross_entropy(tape, *out.camera_logits, cameras);
  if (camera_only) {
    tape.backward(camera_ce);
  } else {
    auto person_ce = losses::cross_entropy(tape, out.person_logits, persons);
    auto triplet = losses::triplet_loss(tape, out.embedding, persons);
    tape.backward(losses::combined_loss(tape, person_ce, triplet, camera_ce, lambda));
  }
  BatchGradients g;
  for (const auto& p : model.shared_parameters()) g.shared.push_back(p.grad());
  for (const auto& p : model.attention_parameters()) g.attention.push_back(p.grad());
  return g;
}

TEST(TrainerGradientTest, ZeroLambdaMakesReversalScaleIrrelevant) {
  const auto a = batch_gradients(0.0, 1.0, false, true);
  const auto b = batch_gradients(0.0, 7.0, false, true);
  const auto c = batch_gradients(0.0, 1.0, false, false);
  EXPECT_EQ(a.shared, b.shared);
  EXPECT_EQ(a.attention, b.attention);
  EXPECT_EQ(a.shared, c.shared);
}

TEST(TrainerGradientTest, CameraLossGradientOnSharedParametersIsMinusMuTimesPlain) {
  for (double mu : {1.0, 0.5, 2.0}) {
    const auto reversed = batch_gradients(0.01, mu, true, true);
    const auto plain = batch_gradients(0.01, mu, true, false);
    for (std::size_t i = 0; i < plain.attention.size(); ++i)
      for (std::size_t j = 0; j < plain.attention[i].size(); ++j)
        EXPECT_EQ(reversed.attention[i][j], -mu * plain.attention[i][j]);
    // conv1 sits upstream of the reversal; layers after APRA get nothing.
    for (std::size_t j = 0; j < plain.shared[0].size(); ++j)
      EXPECT_EQ(reversed.shared[0][j], -mu * plain.shared[0][j]);
  }
}

TEST(TrainTest, LossDecreasesOverFirstFiveEpochsOnDefaultWorld) {
  ExperimentConfig cfg;
  cfg.train.epochs = 5;
  cfg.train.probe_each_epoch = false;
  const auto world = generate_world(cfg.world, 0);
  for (bool apra : {false, true}) {
    const auto result = run_variant(world, cfg, apra, 0);
    ASSERT_EQ(result.log.size(), 5u);
    const auto& first = result.log.front();
    const auto& last = result.log.back();
    EXPECT_LT(last.loss_person_ce + last.loss_triplet, first.loss_person_ce + first.loss_triplet)
        << (apra ? "apra" : "baseline");
    EXPECT_LT(last.loss_person_ce, first.loss_person_ce);
  }
}

TEST(TrainTest, FixedSeedIsReproducible) {
  ExperimentConfig cfg;
  cfg.world = tiny_world();
  cfg.train.epochs = 2;
  const auto world = generate_world(cfg.world, 7);
  const auto a = run_variant(world, cfg, true, 7);
  const auto b = run_variant(world, cfg, true, 7);
  EXPECT_EQ(epoch_log_csv(a.log), epoch_log_csv(b.log));
  EXPECT_EQ(report::to_json(a.report), report::to_json(b.report));
  EXPECT_EQ(a.probe_acc, b.probe_acc);
}

TEST(TrainTest, DivergenceReportsTheEpoch) {
  ExperimentConfig cfg;
  cfg.world = tiny_world();
  cfg.train.epochs = 3;
  cfg.train.lr = 1e12;
  cfg.train.lr_milestones.clear();
  const auto world = generate_world(cfg.world, 8);
  try {
    run_variant(world, cfg, false, 8);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1u);
    EXPECT_LE(e.epoch(), 3u);
  }
}

TEST(TrainTest, EpochLogCsvHeader) {
  std::vector<EpochLog> log{{1, 3.0, 0.25, 1.5, 0.5}};
  EXPECT_EQ(epoch_log_csv(log),
            "epoch,loss_person_ce,loss_triplet,loss_camera_ce,probe_acc\n1,3,0.25,1.5,0.5\n");
}

TEST(ProbeTest, ConstantEmbeddingsScoreTheMajorityPrior) {
  std::vector<std::vector<double>> emb(10, std::vector<double>{0.3, -1.0});
  std::vector<std::size_t> cams{0, 0, 0, 0, 0, 0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(camera_probe(emb, cams), 0.6);
}

TEST(ProbeTest, OneHotCameraEmbeddingsAreFullyLeaky) {
  std::vector<std::vector<double>> emb;
  std::vector<std::size_t> cams;
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t c = i % 4;
    std::vector<double> v(4, 0.0);
    v[c] = 1.0;
    emb.push_back(v);
    cams.push_back(c);
  }
  EXPECT_GE(camera_probe(emb, cams), 0.99);
}

TEST(ProbeTest, SingleCameraIsRejected) {
  std::vector<std::vector<double>> emb(3, std::vector<double>{1.0});
  EXPECT_THROW(camera_probe(emb, {0, 0, 0}), std::invalid_argument);
}

TEST(ExperimentTest, VariantsSeeTheSameSplitsAndCsvMirrorsTableColumns) {
  ExperimentConfig cfg;
  cfg.world = tiny_world();
  cfg.train.epochs = 0;
  std::vector<std::uint64_t> seen;
  const auto c = compare_variants(cfg, {0, 1, 2}, [&](const VariantResult& r) {
    seen.push_back(r.seed);
  });
  ASSERT_EQ(c.runs.size(), 3u);
  EXPECT_EQ(seen.size(), 6u);
  for (const auto& run : c.runs) {
    EXPECT_EQ(run.baseline.report.num_queries, run.apra.report.num_queries);
    for (const auto& [cam, e] : run.baseline.report.per_camera)
      EXPECT_EQ(e.num_queries, run.apra.report.per_camera.at(cam).num_queries);
  }
  const std::string csv = comparison_csv(c);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "variant,seeds,global_map,global_map_std,weakest_q_map,weakest_q_map_std,"
            "weakest_g_map,weakest_g_map_std,average_q_map,average_q_map_std,"
            "average_g_map,average_g_map_std,probe_acc,probe_acc_std");
  EXPECT_NE(per_seed_csv(c).find("baseline"), std::string::npos);
  EXPECT_THROW(compare_variants(cfg, {0, 1}), std::invalid_argument);
}

}  // namespace
}  // namespace camreid::toy
