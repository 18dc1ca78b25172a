#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "camreid/gradcheck.hpp"
#include "camreid/losses.hpp"
#include "camreid/ops.hpp"

namespace camreid::losses {
namespace {

Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

double euclid(const Tensor& e, std::size_t i, std::size_t j) {
  const std::size_t d = e.shape().c;
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += std::pow(e[i * d + k] - e[j * d + k], 2);
  return std::sqrt(s);
}

// Enumerates every (anchor, positive, negative) combination and keeps, per
// anchor, the largest hinge. That equals the batch-hard hinge because the
// hinge is monotone in d(a,p) − d(a,n).
double brute_force_triplet(const Tensor& e, const std::vector<std::size_t>& labels,
                           double margin) {
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    bool any = false;
    double worst = 0.0;
    for (std::size_t p = 0; p < labels.size(); ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] == labels[a]) continue;
        const double h = std::max(0.0, euclid(e, a, p) - euclid(e, a, n) + margin);
        worst = any ? std::max(worst, h) : h;
        any = true;
      }
    }
    if (any) {
      total += worst;
      ++anchors;
    }
  }
  return total / static_cast<double>(anchors);
}

TEST(CrossEntropyTest, UniformLogitsGiveLogK) {
  for (std::size_t k : {2u, 3u, 4u, 10u, 751u}) {
    Tape tape;
    auto logits = Variable::constant(Tensor(Shape{3, k, 1, 1}, 0.37));
    const std::vector<std::size_t> labels{0, k - 1, k / 2};
    EXPECT_NEAR(cross_entropy(tape, logits, labels).value().item(),
                std::log(static_cast<double>(k)), 1e-9)
        << "K=" << k;
  }
}

TEST(CrossEntropyTest, ConfidentCorrectLogitsGiveTinyLoss) {
  Tape tape;
  auto logits = Variable::constant(Tensor(Shape{1, 2, 1, 1}, {10.0, -10.0}));
  const std::vector<std::size_t> labels{0};
  const double expected = std::log1p(std::exp(-20.0));
  const double got = cross_entropy(tape, logits, labels).value().item();
  EXPECT_NEAR(got, 2.06e-9, 0.01e-9);
  EXPECT_NEAR(got, expected, 1e-18);
}

TEST(CrossEntropyTest, IsNonNegativeAndClampedOnPathologicalLogits) {
  Tape tape;
  auto logits = Variable::constant(Tensor(Shape{2, 2, 1, 1}, {0.0, 1e6, 3.0, -2.0}));
  const std::vector<std::size_t> labels{0, 0};
  const double v = cross_entropy(tape, logits, labels).value().item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, (-kLogProbFloor + 1.0) / 2.0);
}

TEST(CrossEntropyTest, GradientMatchesFiniteDifferences) {
  auto logits = Variable::parameter(random_tensor({4, 5, 1, 1}, 1, -2, 2));
  const std::vector<std::size_t> labels{0, 4, 2, 2};
  const std::vector<Variable> wrt{logits};
  auto r = grad_check([&](Tape& t) { return cross_entropy(t, logits, labels); }, wrt, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(CrossEntropyTest, LabelOutOfRangeIsRejected) {
  Tape tape;
  auto logits = Variable::constant(Tensor(Shape{1, 3, 1, 1}));
  const std::vector<std::size_t> labels{3};
  EXPECT_THROW(cross_entropy(tape, logits, labels), std::out_of_range);
}

TEST(TripletHingeTest, HandCases) {
  EXPECT_EQ(triplet_hinge(0.2, 0.9, 0.3), 0.0);
  EXPECT_EQ(triplet_hinge(0.9, 0.2, 0.3), 1.0);
}

TEST(TripletLossTest, FourSampleBatchMatchesExhaustiveSearch) {
  const Tensor e(Shape{4, 2, 1, 1}, {0.0, 0.0, 1.0, 0.0, 0.2, 0.1, 0.9, 0.3});
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  Tape tape;
  const double got = triplet_loss(tape, Variable::constant(e), labels).value().item();
  EXPECT_NEAR(got, brute_force_triplet(e, labels, kDefaultMargin), 1e-15);
  EXPECT_GT(got, 0.0);
}

TEST(TripletLossTest, MatchesExhaustiveSearchOnRandomSmallBatches) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(3, 8)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    labels[0] = labels[1] = 0;
    labels[2] = 1;
    const Tensor e = random_tensor({n, d, 1, 1}, 100 + trial);
    const double margin = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    Tape tape;
    EXPECT_NEAR(triplet_loss(tape, Variable::constant(e), labels, margin).value().item(),
                brute_force_triplet(e, labels, margin), 1e-14);
  }
}

TEST(TripletLossTest, ZeroWhenNegativesAreFarEnough) {
  // Two tight clusters 10 apart.
  const Tensor e(Shape{4, 1, 1, 1}, {0.0, 0.1, 10.0, 10.2});
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  Tape tape;
  EXPECT_EQ(triplet_loss(tape, Variable::constant(e), labels).value().item(), 0.0);
}

TEST(TripletLossTest, DegenerateBatchesAreRejected) {
  Tape tape;
  auto e = Variable::constant(random_tensor({3, 2, 1, 1}, 3));
  const std::vector<std::size_t> one_identity{1, 1, 1};
  const std::vector<std::size_t> all_singletons{0, 1, 2};
  EXPECT_THROW(triplet_loss(tape, e, one_identity), std::invalid_argument);
  EXPECT_THROW(triplet_loss(tape, e, all_singletons), std::invalid_argument);
}

TEST(TripletLossTest, GradientMatchesFiniteDifferencesWithActiveHinges) {
  auto e = Variable::parameter(random_tensor({6, 3, 1, 1}, 4));
  const std::vector<std::size_t> labels{0, 0, 1, 1, 2, 2};
  const std::vector<Variable> wrt{e};
  auto r = grad_check([&](Tape& t) { return triplet_loss(t, e, labels, 5.0); }, wrt, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(CombinedLossTest, WeightedSumOfTerms) {
  Tape tape;
  auto a = Variable::constant(Tensor::scalar(1.0));
  auto b = Variable::constant(Tensor::scalar(0.5));
  auto c = Variable::constant(Tensor::scalar(2.0));
  EXPECT_NEAR(combined_loss(tape, a, b, c, 0.01).value().item(), 1.52, 1e-15);
  EXPECT_EQ(combined_loss(tape, a, b, c, 0.0).value().item(), 1.5);
}

TEST(CombinedLossTest, LinearInLambdaWithSlopeCameraLoss) {
  Tape tape;
  auto a = Variable::constant(Tensor::scalar(0.8));
  auto b = Variable::constant(Tensor::scalar(0.3));
  auto c = Variable::constant(Tensor::scalar(1.7));
  const double base = combined_loss(tape, a, b, c, 0.0).value().item();
  for (double lambda : {0.01, 0.1, 0.5, 1.0})
    EXPECT_NEAR((combined_loss(tape, a, b, c, lambda).value().item() - base) / lambda, 1.7,
                1e-12);
}

TEST(CombinedLossTest, CameraLogitGradientScalesWithLambda) {
  auto logits = Variable::parameter(random_tensor({3, 4, 1, 1}, 5));
  const std::vector<std::size_t> cams{0, 1, 3};
  auto grad_at = [&](double lambda) {
    logits.zero_grad();
    Tape tape;
    auto zero = Variable::constant(Tensor::scalar(0.0));
    tape.backward(combined_loss(tape, zero, zero, cross_entropy(tape, logits, cams), lambda));
    return logits.grad();
  };
  const Tensor g1 = grad_at(1.0);
  const Tensor g01 = grad_at(0.01);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g01[i], 0.01 * g1[i], 1e-17);
}

TEST(CombinedLossTest, NonScalarTermsAreRejected) {
  Tape tape;
  auto s = Variable::constant(Tensor::scalar(1.0));
  auto v = Variable::constant(Tensor(Shape{2, 1, 1, 1}));
  EXPECT_THROW(combined_loss(tape, s, v, s, 0.01), ShapeError);
}

}  // namespace
}  // namespace camreid::losses
