#include <gtest/gtest.h>

#include "camreid/dataio.hpp"
#include "camreid/report.hpp"

namespace camreid::report {
namespace {

EvaluationReport sample_report() {
  EvaluationReport r;
  r.dataset = "toy";
  r.method = "baseline";
  r.global_map = 0.5;
  r.rank1 = 0.625;
  r.num_queries = 8;
  r.num_excluded = 1;
  r.per_camera[0] = {0.9, 0.8, 3, 2};
  r.per_camera[1] = {0.3, std::nullopt, 5, 0};
  r.per_camera[2] = {std::nullopt, 0.6, 0, 4};
  refresh_summary(r);
  return r;
}

TEST(ReportTest, PercentHasOneDecimal) {
  EXPECT_EQ(percent1(0.787), "78.7");
  EXPECT_EQ(percent1(1.0), "100.0");
  EXPECT_EQ(percent1(0.0), "0.0");
  EXPECT_EQ(percent1(0.74479), "74.5");
}

TEST(ReportTest, SummarySkipsMissingMetrics) {
  const auto r = sample_report();
  EXPECT_EQ(r.summary.q.weakest.camera, 1u);
  EXPECT_DOUBLE_EQ(r.summary.q.mean, 0.6);
  EXPECT_EQ(r.summary.g.weakest.camera, 2u);
  EXPECT_DOUBLE_EQ(r.summary.g.mean, 0.7);
}

TEST(ReportTest, SummaryCsvMirrorsTableColumns) {
  EXPECT_EQ(summary_csv({sample_report()}),
            "dataset,method,weakest_q_map,weakest_g_map,average_q_map,average_g_map\n"
            "toy,baseline,30.0,60.0,60.0,70.0\n");
}

TEST(ReportTest, PerCameraCsvLeavesMissingCellsEmpty) {
  EXPECT_EQ(per_camera_csv(sample_report()),
            "camera,q_map,g_map,num_queries,num_g_queries\n"
            "0,0.9,0.8,3,2\n"
            "1,0.3,,5,0\n"
            "2,,0.6,0,4\n");
}

TEST(ReportTest, JsonRoundTripPreservesEverything) {
  const auto r = sample_report();
  const std::string text = to_json(r);
  EXPECT_EQ(text.back(), '\n');
  EXPECT_NE(text.find("\"weakest\""), std::string::npos);
  EXPECT_NE(text.find("\"average\""), std::string::npos);
  const auto back = from_json(text);
  EXPECT_EQ(back.dataset, r.dataset);
  EXPECT_EQ(back.method, r.method);
  EXPECT_EQ(back.global_map, r.global_map);
  EXPECT_EQ(back.rank1, r.rank1);
  EXPECT_EQ(back.num_queries, r.num_queries);
  EXPECT_EQ(back.num_excluded, r.num_excluded);
  ASSERT_EQ(back.per_camera.size(), 3u);
  for (const auto& [cam, e] : r.per_camera) {
    EXPECT_EQ(back.per_camera.at(cam).q_map, e.q_map);
    EXPECT_EQ(back.per_camera.at(cam).g_map, e.g_map);
    EXPECT_EQ(back.per_camera.at(cam).num_queries, e.num_queries);
    EXPECT_EQ(back.per_camera.at(cam).num_g_queries, e.num_g_queries);
  }
  EXPECT_EQ(to_json(back), text);
}

TEST(ReportTest, MalformedJsonIsRejected) {
  EXPECT_THROW(from_json("{not json"), std::invalid_argument);
  EXPECT_THROW(from_json("{\"dataset\": \"x\"}"), std::invalid_argument);
}

TEST(ReportTest, MakeReportCopiesEvaluation) {
  metrics::Evaluation ev;
  ev.global = {0.75, 4, 2};
  ev.rank1 = 0.5;
  ev.query_map.scores[0] = {0.7, 2};
  ev.query_map.scores[1] = {0.8, 2};
  ev.gallery_map.scores[1] = {0.9, 3};
  const auto r = make_report("d", "m", ev);
  EXPECT_EQ(r.num_queries, 4u);
  EXPECT_EQ(r.num_excluded, 2u);
  EXPECT_FALSE(r.per_camera.at(0).g_map.has_value());
  EXPECT_EQ(r.per_camera.at(1).num_g_queries, 3u);
  EXPECT_EQ(r.summary.q.weakest.camera, 0u);
  EXPECT_EQ(r.summary.g.weakest.value, 0.9);
}

}  // namespace
}  // namespace camreid::report
