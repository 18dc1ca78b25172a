#include "camreid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "camreid/ops.hpp"

namespace camreid::losses {

Variable cross_entropy(Tape& tape, const Variable& logits,
                       std::span<const std::size_t> labels) {
  const Shape s = logits.shape();
  if (s.h != 1 || s.w != 1) {
    throw ShapeError("cross_entropy: logits must be (N,K,1,1), got " + s.str());
  }
  const std::size_t n = s.n;
  const std::size_t k = s.c;
  if (labels.size() != n) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " rows");
  }
  if (n == 0) throw std::invalid_argument("cross_entropy: empty batch");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) +
                              " at row " + std::to_string(i) +
                              " out of range for " + std::to_string(k) +
                              " classes");
    }
  }

  const Tensor& z = logits.value();
  Tensor probs(s);
  std::vector<bool> clamped(n, false);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data().data() + i * k;
    const std::size_t top = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    const double mx = row[top];
    // The top logit contributes exactly 1 to the shifted sum; log1p keeps the
    // remainder accurate when it is tiny.
    double rest = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != top) rest += std::exp(row[j] - mx);
    const double denom = 1.0 + rest;
    for (std::size_t j = 0; j < k; ++j)
      probs[i * k + j] = std::exp(row[j] - mx) / denom;
    double log_p = row[labels[i]] - mx - std::log1p(rest);
    if (log_p < kLogProbFloor) {
      log_p = kLogProbFloor;
      clamped[i] = true;
    }
    total -= log_p;
  }

  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return tape.record(
      "cross_entropy", Tensor::scalar(total / static_cast<double>(n)), {logits},
      [probs = std::move(probs), lab = std::move(lab),
       clamped = std::move(clamped), s, n, k](const Tensor& g) {
        Tensor gz(s);
        const double scale = g.item() / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          if (clamped[i]) continue;
          for (std::size_t j = 0; j < k; ++j) {
            const double target = j == lab[i] ? 1.0 : 0.0;
            gz[i * k + j] = scale * (probs[i * k + j] - target);
          }
        }
        return std::vector<Tensor>{std::move(gz)};
      });
}

double triplet_hinge(double d_ap, double d_an, double margin) {
  return std::max(0.0, d_ap - d_an + margin);
}

Variable triplet_loss(Tape& tape, const Variable& embeddings,
                      std::span<const std::size_t> labels, double margin) {
  const Shape s = embeddings.shape();
  if (s.h != 1 || s.w != 1) {
    throw ShapeError("triplet_loss: embeddings must be (N,D,1,1), got " +
                     s.str());
  }
  if (!(margin > 0.0)) {
    throw std::invalid_argument("triplet_loss: margin must be positive");
  }
  const std::size_t n = s.n;
  const std::size_t d = s.c;
  if (labels.size() != n) {
    throw std::invalid_argument("triplet_loss: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) +
                                " embeddings");
  }
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t l : labels) ++counts[l];
  const bool has_pair = std::any_of(counts.begin(), counts.end(),
                                    [](const auto& kv) { return kv.second >= 2; });
  if (counts.size() < 2 || !has_pair) {
    throw std::invalid_argument(
        "triplet_loss: degenerate batch (needs >= 2 identities and an identity "
        "with >= 2 samples)");
  }

  const Tensor& x = embeddings.value();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x[i * d + c] - x[j * d + c];
        acc += diff * diff;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(acc);
    }

  struct Active {
    std::size_t anchor, positive, negative;
  };
  std::vector<Active> active;
  std::size_t num_anchors = 0;
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t pos = n;
    std::size_t neg = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (pos == n || dist[a * n + j] > dist[a * n + pos]) pos = j;
      } else {
        if (neg == n || dist[a * n + j] < dist[a * n + neg]) neg = j;
      }
    }
    if (pos == n || neg == n) continue;
    ++num_anchors;
    const double h = triplet_hinge(dist[a * n + pos], dist[a * n + neg], margin);
    if (h > 0.0) {
      total += h;
      active.push_back({a, pos, neg});
    }
  }

  const double loss = total / static_cast<double>(num_anchors);
  return tape.record(
      "triplet_loss", Tensor::scalar(loss), {embeddings},
      [embeddings, dist = std::move(dist), active = std::move(active),
       num_anchors, n, d](const Tensor& g) {
        const Tensor& x = embeddings.value();
        Tensor gx(embeddings.shape());
        const double w = g.item() / static_cast<double>(num_anchors);
        // d|xi − xj| / dxi = (xi − xj) / |xi − xj|; zero at coincident points.
        auto push = [&](std::size_t i, std::size_t j, double coeff) {
          const double r = dist[i * n + j];
          if (r == 0.0) return;
          for (std::size_t c = 0; c < d; ++c) {
            const double u = (x[i * d + c] - x[j * d + c]) / r;
            gx[i * d + c] += coeff * u;
            gx[j * d + c] -= coeff * u;
          }
        };
        for (const auto& t : active) {
          push(t.anchor, t.positive, w);
          push(t.anchor, t.negative, -w);
        }
        return std::vector<Tensor>{std::move(gx)};
      });
}

Variable combined_loss(Tape& tape, const Variable& person_ce,
                       const Variable& triplet, const Variable& camera_ce,
                       double camera_weight) {
  for (const Variable* v : {&person_ce, &triplet, &camera_ce}) {
    if (!v->shape().is_scalar()) {
      throw ShapeError("combined_loss: terms must be scalar, got " +
                       v->shape().str());
    }
  }
  const Variable person = ops::add(tape, person_ce, triplet);
  return ops::add(tape, person, ops::scale(tape, camera_ce, camera_weight));
}

}  // namespace camreid::losses
