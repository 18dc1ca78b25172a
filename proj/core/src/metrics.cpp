#include "camreid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace camreid::metrics {

std::string to_string(Split s) {
  return s == Split::kQuery ? "query" : "gallery";
}

std::string to_string(Distance d) {
  return d == Distance::kEuclidean ? "euclidean" : "cosine";
}

Split parse_split(const std::string& s) {
  if (s == "query") return Split::kQuery;
  if (s == "gallery") return Split::kGallery;
  throw std::invalid_argument("unknown split '" + s +
                              "' (expected query or gallery)");
}

Distance parse_distance(const std::string& s) {
  if (s == "euclidean") return Distance::kEuclidean;
  if (s == "cosine") return Distance::kCosine;
  throw std::invalid_argument("unknown distance '" + s +
                              "' (expected euclidean or cosine)");
}

double distance(const std::vector<double>& a, const std::vector<double>& b,
                Distance metric) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("embedding dimension mismatch: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  if (metric == Distance::kEuclidean) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  // A zero vector has no direction; treat it as orthogonal to everything.
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

bool is_junk(const EmbeddingRecord& query, const EmbeddingRecord& item,
             const RetrievalProtocol& protocol) {
  return protocol.cross_camera_only && item.person_id == query.person_id &&
         item.camera_id == query.camera_id;
}

std::vector<std::size_t> rank_gallery(const EmbeddingRecord& query,
                                      std::span<const EmbeddingRecord> gallery,
                                      const RetrievalProtocol& protocol) {
  std::vector<std::size_t> order;
  std::vector<double> dist(gallery.size());
  order.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    dist[i] = distance(query.vector, gallery[i].vector, protocol.distance);
    if (!is_junk(query, gallery[i], protocol)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

double average_precision(const std::vector<bool>& positives) {
  double acc = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    if (!positives[i]) continue;
    ++hits;
    acc += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  if (hits == 0) throw MetricError("average_precision: no positives in ranking");
  return acc / static_cast<double>(hits);
}

namespace {

struct Accumulator {
  double sum = 0.0;
  std::size_t count = 0;
};

PerCameraMap finish(const std::map<std::size_t, Accumulator>& acc,
                    const std::set<std::size_t>& candidates) {
  PerCameraMap out;
  for (const auto& [cam, a] : acc) {
    if (a.count > 0) {
      out.scores[cam] = {a.sum / static_cast<double>(a.count), a.count};
    }
  }
  for (std::size_t cam : candidates) {
    if (!out.scores.contains(cam)) out.omitted.push_back(cam);
  }
  return out;
}

}  // namespace

Evaluation evaluate(std::span<const EmbeddingRecord> queries,
                    std::span<const EmbeddingRecord> gallery,
                    const RetrievalProtocol& protocol) {
  if (gallery.empty()) throw MetricError("evaluate: empty gallery");

  Accumulator global;
  std::size_t excluded = 0;
  std::size_t rank1_hits = 0;
  std::map<std::size_t, Accumulator> q_acc;
  std::map<std::size_t, Accumulator> g_acc;
  std::set<std::size_t> query_cameras;
  std::set<std::size_t> all_cameras;
  for (const auto& g : gallery) all_cameras.insert(g.camera_id);

  for (const auto& q : queries) {
    query_cameras.insert(q.camera_id);
    all_cameras.insert(q.camera_id);
    const std::vector<std::size_t> ranked = rank_gallery(q, gallery, protocol);
    std::vector<bool> mask(ranked.size());
    std::set<std::size_t> positive_cameras;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const auto& item = gallery[ranked[r]];
      mask[r] = item.person_id == q.person_id;
      if (mask[r]) positive_cameras.insert(item.camera_id);
    }
    if (positive_cameras.empty()) {
      ++excluded;
      continue;
    }
    const double ap = average_precision(mask);
    global.sum += ap;
    ++global.count;
    if (mask[0]) ++rank1_hits;
    auto& qa = q_acc[q.camera_id];
    qa.sum += ap;
    ++qa.count;

    for (std::size_t cam : positive_cameras) {
      std::vector<bool> kept;
      kept.reserve(mask.size());
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        if (mask[r] && gallery[ranked[r]].camera_id != cam) continue;
        kept.push_back(mask[r]);
      }
      auto& ga = g_acc[cam];
      ga.sum += average_precision(kept);
      ++ga.count;
    }
  }

  if (global.count == 0) {
    throw MetricError("evaluate: no query has a valid positive (" +
                      std::to_string(excluded) + " excluded)");
  }

  Evaluation ev;
  ev.global = {global.sum / static_cast<double>(global.count), global.count,
               excluded};
  ev.rank1 =
      static_cast<double>(rank1_hits) / static_cast<double>(global.count);
  ev.query_map = finish(q_acc, query_cameras);
  ev.gallery_map = finish(g_acc, all_cameras);
  return ev;
}

MapResult mean_ap(std::span<const EmbeddingRecord> queries,
                  std::span<const EmbeddingRecord> gallery,
                  const RetrievalProtocol& protocol) {
  return evaluate(queries, gallery, protocol).global;
}

double cmc_rank_k(std::span<const EmbeddingRecord> queries,
                  std::span<const EmbeddingRecord> gallery,
                  const RetrievalProtocol& protocol, std::size_t k) {
  if (k == 0) throw std::invalid_argument("cmc_rank_k: k must be >= 1");
  if (gallery.empty()) throw MetricError("cmc_rank_k: empty gallery");
  std::size_t scored = 0;
  std::size_t hits = 0;
  for (const auto& q : queries) {
    const std::vector<std::size_t> ranked = rank_gallery(q, gallery, protocol);
    const auto first = std::find_if(ranked.begin(), ranked.end(), [&](std::size_t i) {
      return gallery[i].person_id == q.person_id;
    });
    if (first == ranked.end()) continue;
    ++scored;
    if (static_cast<std::size_t>(first - ranked.begin()) < k) ++hits;
  }
  if (scored == 0) throw MetricError("cmc_rank_k: no query has a valid positive");
  return static_cast<double>(hits) / static_cast<double>(scored);
}

PerCameraMap query_map_per_camera(std::span<const EmbeddingRecord> queries,
                                  std::span<const EmbeddingRecord> gallery,
                                  const RetrievalProtocol& protocol) {
  return evaluate(queries, gallery, protocol).query_map;
}

PerCameraMap gallery_map_per_camera(std::span<const EmbeddingRecord> queries,
                                    std::span<const EmbeddingRecord> gallery,
                                    const RetrievalProtocol& protocol) {
  return evaluate(queries, gallery, protocol).gallery_map;
}

MetricSummary summarize(const std::map<std::size_t, double>& per_camera) {
  if (per_camera.empty()) throw MetricError("summarize: empty per-camera map");
  MetricSummary s;
  s.weakest = {per_camera.begin()->first, per_camera.begin()->second};
  double total = 0.0;
  for (const auto& [cam, v] : per_camera) {
    // Strict comparison keeps the lowest camera id on ties (map is ordered).
    if (v < s.weakest.value) s.weakest = {cam, v};
    total += v;
  }
  const double n = static_cast<double>(per_camera.size());
  s.mean = total / n;
  double var = 0.0;
  for (const auto& [cam, v] : per_camera) var += (v - s.mean) * (v - s.mean);
  s.spread = std::sqrt(var / n);
  return s;
}

PerCameraReport imbalance_report(const std::map<std::size_t, double>& q_map,
                                 const std::map<std::size_t, double>& g_map) {
  PerCameraReport r;
  r.q_map = q_map;
  r.g_map = g_map;
  r.q = summarize(q_map);
  r.g = summarize(g_map);
  return r;
}

std::map<std::size_t, double> values_of(const PerCameraMap& m) {
  std::map<std::size_t, double> out;
  for (const auto& [cam, s] : m.scores) out[cam] = s.value;
  return out;
}

}  // namespace camreid::metrics
