#include "camreid/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

#include "camreid/apra.hpp"
#include "camreid/gradcheck.hpp"
#include "camreid/losses.hpp"
#include "camreid/ops.hpp"

namespace camreid {
namespace {

constexpr double kSmooth = 1e-5;
constexpr double kKinked = 1e-4;

using Rng = std::mt19937_64;

struct Case {
  std::string name;
  double tolerance;
  // Returns the max relative error for one seed. `vjp_scale` != 1 wraps the
  // op under test so its backward pass is wrong by that factor.
  std::function<double(Rng&, double step, double vjp_scale)> run;
};

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Tensor uniform(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

// Values bounded away from zero: kinked-op inputs stay off the kink and
// upstream weights never make a coordinate's gradient vanishingly small.
Tensor away_from_zero(Shape s, Rng& rng) {
  std::uniform_real_distribution<double> mag(0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(s);
  for (double& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

// Shuffled, well-separated values so max-pooling never flips under a step.
Tensor separated(Shape s, Rng& rng) {
  std::vector<std::size_t> perm(s.numel());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor t(s);
  const double span = static_cast<double>(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    t[i] = 2.0 * static_cast<double>(perm[i]) / span - 1.0;
  return t;
}

Shape random_shape(Rng& rng, std::size_t max_n, std::size_t max_c,
                   std::size_t max_hw) {
  return {pick(rng, 1, max_n), pick(rng, 1, max_c), pick(rng, 1, max_hw),
          pick(rng, 1, max_hw)};
}

// sum(out ⊙ weights) with fixed random weights, so every output element
// carries a distinct upstream gradient.
Variable weighted_sum(Tape& tape, const Variable& out, const Tensor& weights) {
  return ops::sum(tape, ops::mul(tape, out, Variable::constant(weights)));
}

Variable maybe_fault(Tape& tape, const Variable& v, double vjp_scale) {
  return vjp_scale == 1.0 ? v : ops::gradient_scale(tape, v, vjp_scale);
}

using UnaryOp = std::function<Variable(Tape&, const Variable&)>;

Case unary_case(std::string name, double tol, UnaryOp op,
                std::function<Tensor(Shape, Rng&)> make_input,
                std::function<Shape(Shape)> out_shape) {
  return {name, tol, [op, make_input, out_shape](Rng& rng, double step, double f) {
            const Shape s = random_shape(rng, 2, 8, 8);
            const Variable x = Variable::parameter(make_input(s, rng));
            const Tensor w = away_from_zero(out_shape(s), rng);
            const Variable vars[] = {x};
            return grad_check(
                       [&](Tape& t) {
                         return weighted_sum(t, maybe_fault(t, op(t, x), f), w);
                       },
                       vars, step)
                .max_rel_error;
          }};
}

std::vector<Case> build_cases() {
  std::vector<Case> cases;
  auto same = [](Shape s) { return s; };
  auto plain = [](Shape s, Rng& r) { return uniform(s, r); };

  for (const char* variant : {"mul", "mul_channel", "mul_pixel"}) {
    const std::string v = variant;
    cases.push_back({v, kSmooth, [v](Rng& rng, double step, double f) {
                       const Shape s = random_shape(rng, 2, 8, 8);
                       Shape sb = s;
                       if (v == "mul_channel") sb = {s.n, s.c, 1, 1};
                       if (v == "mul_pixel") sb = {s.n, 1, s.h, s.w};
                       const Variable a = Variable::parameter(away_from_zero(s, rng));
                       const Variable b = Variable::parameter(away_from_zero(sb, rng));
                       const Tensor w = away_from_zero(s, rng);
                       const Variable vars[] = {a, b};
                       return grad_check(
                                  [&](Tape& t) {
                                    return weighted_sum(
                                        t, maybe_fault(t, ops::mul(t, a, b), f), w);
                                  },
                                  vars, step)
                           .max_rel_error;
                     }});
  }

  cases.push_back({"add", kSmooth, [](Rng& rng, double step, double f) {
                     const Shape s = random_shape(rng, 2, 8, 8);
                     const Variable a = Variable::parameter(uniform(s, rng));
                     const Variable b = Variable::parameter(uniform(s, rng));
                     const Tensor w = away_from_zero(s, rng);
                     const Variable vars[] = {a, b};
                     return grad_check(
                                [&](Tape& t) {
                                  return weighted_sum(
                                      t, maybe_fault(t, ops::add(t, a, b), f), w);
                                },
                                vars, step)
                         .max_rel_error;
                   }});

  cases.push_back(unary_case(
      "scale", kSmooth, [](Tape& t, const Variable& x) { return ops::scale(t, x, -1.7); },
      plain, same));
  cases.push_back(unary_case("one_minus", kSmooth, ops::one_minus, plain, same));
  cases.push_back(unary_case("relu", kKinked, ops::relu, away_from_zero, same));
  cases.push_back(unary_case("sigmoid", kSmooth, ops::sigmoid,
                             [](Shape s, Rng& r) { return uniform(s, r, -3.0, 3.0); },
                             same));

  auto global_shape = [](Shape s) { return Shape{s.n, s.c, 1, 1}; };
  auto channel_shape = [](Shape s) { return Shape{s.n, 1, s.h, s.w}; };
  cases.push_back(unary_case(
      "pool_global_avg", kSmooth,
      [](Tape& t, const Variable& x) { return ops::pool_global(t, x, ops::PoolMode::kAvg); },
      plain, global_shape));
  cases.push_back(unary_case(
      "pool_global_max", kKinked,
      [](Tape& t, const Variable& x) { return ops::pool_global(t, x, ops::PoolMode::kMax); },
      separated, global_shape));
  cases.push_back(unary_case(
      "pool_channel_avg", kSmooth,
      [](Tape& t, const Variable& x) { return ops::pool_channel(t, x, ops::PoolMode::kAvg); },
      plain, channel_shape));
  cases.push_back(unary_case(
      "pool_channel_max", kKinked,
      [](Tape& t, const Variable& x) { return ops::pool_channel(t, x, ops::PoolMode::kMax); },
      separated, channel_shape));

  cases.push_back({"concat_channels", kSmooth, [](Rng& rng, double step, double f) {
                     const Shape sa = random_shape(rng, 2, 4, 6);
                     const Shape sb{sa.n, pick(rng, 1, 4), sa.h, sa.w};
                     const Variable a = Variable::parameter(uniform(sa, rng));
                     const Variable b = Variable::parameter(uniform(sb, rng));
                     const Tensor w = away_from_zero({sa.n, sa.c + sb.c, sa.h, sa.w}, rng);
                     const Variable vars[] = {a, b};
                     return grad_check(
                                [&](Tape& t) {
                                  return weighted_sum(
                                      t, maybe_fault(t, ops::concat_channels(t, a, b), f),
                                      w);
                                },
                                vars, step)
                         .max_rel_error;
                   }});

  cases.push_back({"dense", kSmooth, [](Rng& rng, double step, double f) {
                     const std::size_t n = pick(rng, 1, 4);
                     const std::size_t in = pick(rng, 1, 8);
                     const std::size_t out = pick(rng, 1, 8);
                     const Variable x = Variable::parameter(uniform({n, in, 1, 1}, rng));
                     const Variable wt = Variable::parameter(uniform({out, in, 1, 1}, rng));
                     const Variable b = Variable::parameter(uniform({out, 1, 1, 1}, rng));
                     const Tensor w = away_from_zero({n, out, 1, 1}, rng);
                     const Variable vars[] = {x, wt, b};
                     return grad_check(
                                [&](Tape& t) {
                                  return weighted_sum(
                                      t, maybe_fault(t, ops::dense(t, x, wt, b), f), w);
                                },
                                vars, step)
                         .max_rel_error;
                   }});

  for (const std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
    const std::string name = stride == 1 ? "conv2d" : "conv2d_stride2";
    cases.push_back({name, kSmooth, [stride](Rng& rng, double step, double f) {
                       const Shape s = random_shape(rng, 2, 4, 8);
                       const std::size_t k = 2 * pick(rng, 0, 2) + 1;
                       const std::size_t co = pick(rng, 1, 4);
                       const Variable x = Variable::parameter(uniform(s, rng));
                       const Variable kr =
                           Variable::parameter(uniform({co, s.c, k, k}, rng));
                       const Variable b = Variable::parameter(uniform({co, 1, 1, 1}, rng));
                       Tape probe;
                       const Shape os =
                           ops::conv2d(probe, Variable::constant(x.value()),
                                       Variable::constant(kr.value()),
                                       Variable::constant(b.value()), stride)
                               .shape();
                       const Tensor w = away_from_zero(os, rng);
                       const Variable vars[] = {x, kr, b};
                       return grad_check(
                                  [&](Tape& t) {
                                    return weighted_sum(
                                        t,
                                        maybe_fault(t, ops::conv2d(t, x, kr, b, stride), f),
                                        w);
                                  },
                                  vars, step)
                           .max_rel_error;
                     }});
  }

  // Reversal is the identity forward, so its backward pass is checked
  // against central differences scaled by −μ.
  cases.push_back({"gradient_reversal", kSmooth, [](Rng& rng, double step, double f) {
                     const double mu = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
                     const Shape s = random_shape(rng, 2, 8, 8);
                     const Variable x = Variable::parameter(uniform(s, rng));
                     const Tensor w = away_from_zero(s, rng);
                     const Variable vars[] = {x};
                     return grad_check(
                                [&](Tape& t) {
                                  return weighted_sum(
                                      t, maybe_fault(t, ops::gradient_reversal(t, x, mu), f),
                                      w);
                                },
                                vars, step, -mu)
                         .max_rel_error;
                   }});

  cases.push_back({"apra_block", kKinked, [](Rng& rng, double step, double f) {
                     apra::ApraConfig cfg;
                     cfg.channels = 2 * pick(rng, 1, 4);
                     cfg.reduction_ratio = 2;
                     cfg.spatial_kernel = pick(rng, 0, 1) ? 7 : 3;
                     const Shape s{pick(rng, 1, 2), cfg.channels, pick(rng, 2, 6),
                                   pick(rng, 2, 6)};
                     apra::ApraParams p = apra::ApraParams::init(cfg, rng);
                     // Non-zero biases so every parameter sees a generic point.
                     for (auto* b : {&p.mlp1_bias, &p.mlp2_bias, &p.spatial_bias})
                       b->mutable_value() = uniform(b->shape(), rng, -0.3, 0.3);
                     const Variable x = Variable::parameter(uniform(s, rng));
                     const Tensor wp = away_from_zero(s, rng);
                     const Tensor wc = away_from_zero(s, rng);
                     std::vector<Variable> vars = p.all();
                     vars.push_back(x);
                     return grad_check(
                                [&](Tape& t) {
                                  const auto out = apra::apra_forward(t, x, p);
                                  const Variable person =
                                      maybe_fault(t, out.person_features, f);
                                  return ops::add(
                                      t, weighted_sum(t, person, wp),
                                      weighted_sum(t, out.camera_features, wc));
                                },
                                vars, step)
                         .max_rel_error;
                   }});

  cases.push_back({"cross_entropy", kSmooth, [](Rng& rng, double step, double f) {
                     const std::size_t n = pick(rng, 1, 6);
                     const std::size_t k = pick(rng, 2, 6);
                     std::vector<std::size_t> labels(n);
                     for (auto& l : labels) l = pick(rng, 0, k - 1);
                     const Variable z =
                         Variable::parameter(uniform({n, k, 1, 1}, rng, -3.0, 3.0));
                     const Variable vars[] = {z};
                     return grad_check(
                                [&](Tape& t) {
                                  return maybe_fault(
                                      t, losses::cross_entropy(t, z, labels), f);
                                },
                                vars, step)
                         .max_rel_error;
                   }});

  cases.push_back({"triplet_loss", kKinked, [](Rng& rng, double step, double f) {
                     const std::size_t ids = pick(rng, 2, 3);
                     const std::size_t per = pick(rng, 2, 3);
                     const std::size_t d = pick(rng, 2, 6);
                     std::vector<std::size_t> labels;
                     for (std::size_t i = 0; i < ids; ++i)
                       for (std::size_t j = 0; j < per; ++j) labels.push_back(i);
                     std::shuffle(labels.begin(), labels.end(), rng);
                     // Large margin keeps every hinge active and away from its kink.
                     const Variable e =
                         Variable::parameter(uniform({labels.size(), d, 1, 1}, rng));
                     const Variable vars[] = {e};
                     return grad_check(
                                [&](Tape& t) {
                                  return maybe_fault(
                                      t, losses::triplet_loss(t, e, labels, 5.0), f);
                                },
                                vars, step)
                         .max_rel_error;
                   }});

  cases.push_back({"combined_loss", kSmooth, [](Rng& rng, double step, double f) {
                     const std::size_t n = pick(rng, 2, 5);
                     std::vector<std::size_t> persons(n), cams(n);
                     for (std::size_t i = 0; i < n; ++i) {
                       persons[i] = pick(rng, 0, 3);
                       cams[i] = pick(rng, 0, 2);
                     }
                     const Variable zp = Variable::parameter(uniform({n, 4, 1, 1}, rng));
                     const Variable zc = Variable::parameter(uniform({n, 3, 1, 1}, rng));
                     const Variable tri = Variable::parameter(uniform({1, 1, 1, 1}, rng));
                     const Variable vars[] = {zp, zc, tri};
                     return grad_check(
                                [&](Tape& t) {
                                  return maybe_fault(
                                      t,
                                      losses::combined_loss(
                                          t, losses::cross_entropy(t, zp, persons), tri,
                                          losses::cross_entropy(t, zc, cams), 0.01),
                                      f);
                                },
                                vars, step)
                         .max_rel_error;
                   }});
  return cases;
}

}  // namespace

std::vector<std::string> gradcheck_case_names() {
  std::vector<std::string> names;
  for (const auto& c : build_cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCaseResult> run_gradcheck_suite(const GradSuiteOptions& options) {
  const auto cases = build_cases();
  if (!options.fault_op.empty() &&
      std::none_of(cases.begin(), cases.end(),
                   [&](const Case& c) { return c.name == options.fault_op; })) {
    throw std::invalid_argument("unknown gradcheck op '" + options.fault_op + "'");
  }
  std::vector<GradCaseResult> results;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& c = cases[ci];
    GradCaseResult r{c.name, 0.0, c.tolerance, options.num_seeds};
    const double vjp_scale = c.name == options.fault_op ? 2.0 : 1.0;
    for (std::size_t s = 0; s < options.num_seeds; ++s) {
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                        static_cast<std::uint32_t>(s),
                        static_cast<std::uint32_t>(ci)};
      Rng rng(seq);
      r.max_rel_error = std::max(r.max_rel_error, c.run(rng, options.step, vjp_scale));
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace camreid
