#ifndef CAMREID_METRICS_HPP_
#define CAMREID_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace camreid::metrics {

enum class Split { kQuery, kGallery };
enum class Distance { kEuclidean, kCosine };

std::string to_string(Split s);
std::string to_string(Distance d);
/// Accepts "query"/"gallery"; throws std::invalid_argument otherwise.
Split parse_split(const std::string& s);
/// Accepts "euclidean"/"cosine"; throws std::invalid_argument otherwise.
Distance parse_distance(const std::string& s);

/// One query or gallery item.
struct EmbeddingRecord {
  std::int64_t person_id = 0;
  std::size_t camera_id = 0;
  Split split = Split::kGallery;
  std::vector<double> vector;
};

struct RetrievalProtocol {
  Distance distance = Distance::kEuclidean;
  /// Gallery items sharing both identity and camera with the query are junk:
  /// removed from the ranked list and never counted as positives.
  bool cross_camera_only = true;
};

/// Raised when a metric is undefined for its input (no positives, nothing
/// left to score, empty report).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double distance(const std::vector<double>& a, const std::vector<double>& b,
                Distance metric);

bool is_junk(const EmbeddingRecord& query, const EmbeddingRecord& item,
             const RetrievalProtocol& protocol);

/// Gallery indices sorted by ascending distance (cosine: descending
/// similarity), junk removed, ties kept in input order.
std::vector<std::size_t> rank_gallery(const EmbeddingRecord& query,
                                      std::span<const EmbeddingRecord> gallery,
                                      const RetrievalProtocol& protocol);

/// Mean over positives of (positives so far / rank). `positives[i]` flags
/// rank i+1. Throws MetricError if there are no positives.
double average_precision(const std::vector<bool>& positives);

struct MapResult {
  double value = 0.0;
  std::size_t num_scored = 0;
  /// Queries dropped for having no valid positive in the gallery.
  std::size_t num_excluded = 0;
};

MapResult mean_ap(std::span<const EmbeddingRecord> queries,
                  std::span<const EmbeddingRecord> gallery,
                  const RetrievalProtocol& protocol);

/// Fraction of scored queries whose first valid positive is within the top k.
double cmc_rank_k(std::span<const EmbeddingRecord> queries,
                  std::span<const EmbeddingRecord> gallery,
                  const RetrievalProtocol& protocol, std::size_t k);

struct CameraScore {
  double value = 0.0;
  std::size_t num_queries = 0;
};

struct PerCameraMap {
  std::map<std::size_t, CameraScore> scores;
  /// Cameras that had candidate queries but none left to score.
  std::vector<std::size_t> omitted;
};

/// Per camera c: mean AP over scored queries captured by c, each against the
/// full gallery.
PerCameraMap query_map_per_camera(std::span<const EmbeddingRecord> queries,
                                  std::span<const EmbeddingRecord> gallery,
                                  const RetrievalProtocol& protocol);

/// Per camera c: mean AP over queries with at least one valid positive from
/// c, where each query's gallery drops its positives captured elsewhere.
PerCameraMap gallery_map_per_camera(std::span<const EmbeddingRecord> queries,
                                    std::span<const EmbeddingRecord> gallery,
                                    const RetrievalProtocol& protocol);

/// Everything an evaluation report needs, computed from a single ranking
/// pass over the queries.
struct Evaluation {
  MapResult global;
  double rank1 = 0.0;
  PerCameraMap query_map;
  PerCameraMap gallery_map;
};

Evaluation evaluate(std::span<const EmbeddingRecord> queries,
                    std::span<const EmbeddingRecord> gallery,
                    const RetrievalProtocol& protocol);

struct CameraValue {
  std::size_t camera = 0;
  double value = 0.0;
};

struct MetricSummary {
  CameraValue weakest;
  double mean = 0.0;
  /// Population standard deviation across cameras.
  double spread = 0.0;
};

/// Weakest/average/spread view over per-camera q-mAP and g-mAP.
struct PerCameraReport {
  std::map<std::size_t, double> q_map;
  std::map<std::size_t, double> g_map;
  MetricSummary q;
  MetricSummary g;
};

/// Unweighted summary of one per-camera metric; argmin ties resolve to the
/// lowest camera id. Throws MetricError on an empty map.
MetricSummary summarize(const std::map<std::size_t, double>& per_camera);

PerCameraReport imbalance_report(const std::map<std::size_t, double>& q_map,
                                 const std::map<std::size_t, double>& g_map);

std::map<std::size_t, double> values_of(const PerCameraMap& m);

}  // namespace camreid::metrics

#endif  // CAMREID_METRICS_HPP_
