#ifndef CAMREID_REPORT_HPP_
#define CAMREID_REPORT_HPP_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "camreid/metrics.hpp"

namespace camreid::report {

/// Per-camera entry of an evaluation report. Either metric may be missing
/// for a camera (no scorable queries for it).
struct CameraEntry {
  std::optional<double> q_map;
  std::optional<double> g_map;
  std::size_t num_queries = 0;    // queries scored for q-mAP
  std::size_t num_g_queries = 0;  // queries scored for g-mAP
};

struct EvaluationReport {
  std::string dataset;
  std::string method;
  double global_map = 0.0;
  double rank1 = 0.0;
  std::size_t num_queries = 0;
  std::size_t num_excluded = 0;
  std::map<std::size_t, CameraEntry> per_camera;
  metrics::PerCameraReport summary;
};

/// Assembles a report from an evaluation pass.
EvaluationReport make_report(std::string dataset, std::string method,
                             const metrics::Evaluation& ev);

/// Recomputes `summary` from the per-camera entries.
void refresh_summary(EvaluationReport& r);

/// JSON document: dataset, method, global {map, rank1, num_queries,
/// num_excluded}, per_camera {id: {q_map, g_map, num_queries,
/// num_g_queries}}, weakest, average, spread. Two-space indent, trailing
/// newline.
std::string to_json(const EvaluationReport& r);

/// Inverse of to_json. Summary fields in the input are ignored and
/// recomputed from per_camera.
EvaluationReport from_json(const std::string& text);

/// Table-style CSV: header
/// `dataset,method,weakest_q_map,weakest_g_map,average_q_map,average_g_map`
/// and one row; values in percent with one decimal.
std::string summary_csv(const std::vector<EvaluationReport>& rows);

/// `camera,q_map,g_map,num_queries,num_g_queries`, one row per camera,
/// values with 9 significant digits, empty cell for a missing metric.
std::string per_camera_csv(const EvaluationReport& r);

/// Percent with one decimal, e.g. 0.787 -> "78.7".
std::string percent1(double fraction);

}  // namespace camreid::report

#endif  // CAMREID_REPORT_HPP_
