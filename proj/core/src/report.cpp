#include "camreid/report.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace camreid::report {

using ordered_json = nlohmann::ordered_json;

std::string percent1(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

namespace {

std::string sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

void refresh_summary(EvaluationReport& r) {
  std::map<std::size_t, double> q;
  std::map<std::size_t, double> g;
  for (const auto& [cam, e] : r.per_camera) {
    if (e.q_map) q[cam] = *e.q_map;
    if (e.g_map) g[cam] = *e.g_map;
  }
  r.summary = metrics::imbalance_report(q, g);
}

EvaluationReport make_report(std::string dataset, std::string method,
                             const metrics::Evaluation& ev) {
  EvaluationReport r;
  r.dataset = std::move(dataset);
  r.method = std::move(method);
  r.global_map = ev.global.value;
  r.rank1 = ev.rank1;
  r.num_queries = ev.global.num_scored;
  r.num_excluded = ev.global.num_excluded;
  for (const auto& [cam, s] : ev.query_map.scores) {
    r.per_camera[cam].q_map = s.value;
    r.per_camera[cam].num_queries = s.num_queries;
  }
  for (const auto& [cam, s] : ev.gallery_map.scores) {
    r.per_camera[cam].g_map = s.value;
    r.per_camera[cam].num_g_queries = s.num_queries;
  }
  refresh_summary(r);
  return r;
}

std::string to_json(const EvaluationReport& r) {
  ordered_json doc;
  doc["dataset"] = r.dataset;
  doc["method"] = r.method;
  doc["global"] = {{"map", r.global_map},
                   {"rank1", r.rank1},
                   {"num_queries", r.num_queries},
                   {"num_excluded", r.num_excluded}};
  ordered_json cams = ordered_json::object();
  for (const auto& [cam, e] : r.per_camera) {
    cams[std::to_string(cam)] = {{"q_map", optional_number(e.q_map)},
                                 {"g_map", optional_number(e.g_map)},
                                 {"num_queries", e.num_queries},
                                 {"num_g_queries", e.num_g_queries}};
  }
  doc["per_camera"] = cams;
  const auto& s = r.summary;
  doc["weakest"] = {
      {"q_map", {{"camera", s.q.weakest.camera}, {"value", s.q.weakest.value}}},
      {"g_map", {{"camera", s.g.weakest.camera}, {"value", s.g.weakest.value}}}};
  doc["average"] = {{"q_map", s.q.mean}, {"g_map", s.g.mean}};
  doc["spread"] = {{"q_map", s.q.spread}, {"g_map", s.g.spread}};
  return doc.dump(2) + "\n";
}

EvaluationReport from_json(const std::string& text) {
  EvaluationReport r;
  try {
    const auto doc = ordered_json::parse(text);
    r.dataset = doc.value("dataset", std::string());
    r.method = doc.value("method", std::string());
    if (doc.contains("global")) {
      const auto& g = doc.at("global");
      r.global_map = g.value("map", 0.0);
      r.rank1 = g.value("rank1", 0.0);
      r.num_queries = g.value("num_queries", std::size_t{0});
      r.num_excluded = g.value("num_excluded", std::size_t{0});
    }
    for (const auto& [key, e] : doc.at("per_camera").items()) {
      CameraEntry entry;
      if (e.contains("q_map") && !e.at("q_map").is_null())
        entry.q_map = e.at("q_map").get<double>();
      if (e.contains("g_map") && !e.at("g_map").is_null())
        entry.g_map = e.at("g_map").get<double>();
      entry.num_queries = e.value("num_queries", std::size_t{0});
      entry.num_g_queries = e.value("num_g_queries", std::size_t{0});
      r.per_camera[std::stoul(key)] = entry;
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("report JSON: ") + e.what());
  }
  refresh_summary(r);
  return r;
}

std::string summary_csv(const std::vector<EvaluationReport>& rows) {
  std::ostringstream os;
  os << "dataset,method,weakest_q_map,weakest_g_map,average_q_map,average_g_map\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    os << r.dataset << ',' << r.method << ',' << percent1(s.q.weakest.value)
       << ',' << percent1(s.g.weakest.value) << ',' << percent1(s.q.mean) << ','
       << percent1(s.g.mean) << '\n';
  }
  return os.str();
}

std::string per_camera_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "camera,q_map,g_map,num_queries,num_g_queries\n";
  for (const auto& [cam, e] : r.per_camera) {
    os << cam << ',' << (e.q_map ? sig9(*e.q_map) : "") << ','
       << (e.g_map ? sig9(*e.g_map) : "") << ',' << e.num_queries << ','
       << e.num_g_queries << '\n';
  }
  return os.str();
}

}  // namespace camreid::report
