#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "camreid/metrics.hpp"
#include "oracles/naive_metrics.hpp"
#include "oracles/random_datasets.hpp"

namespace camreid::metrics {
namespace {

constexpr double kOracleTol = 1e-12;
constexpr int kRandomDatasets = 20;

EmbeddingRecord rec(std::int64_t pid, std::size_t cam, std::vector<double> v,
                    Split split = Split::kGallery) {
  return {pid, cam, split, std::move(v)};
}

EmbeddingRecord query(std::int64_t pid, std::size_t cam, std::vector<double> v) {
  return rec(pid, cam, std::move(v), Split::kQuery);
}

oracle::NaiveProtocol naive(const RetrievalProtocol& p) {
  return {p.distance == Distance::kCosine, p.cross_camera_only};
}

TEST(RankGalleryTest, SingletonGalleryRanksFirst) {
  std::vector<EmbeddingRecord> g{rec(1, 1, {5.0, 5.0})};
  EXPECT_EQ(rank_gallery(query(2, 0, {0, 0}), g, {}), (std::vector<std::size_t>{0}));
}

TEST(RankGalleryTest, SortsByEuclideanDistance) {
  std::vector<EmbeddingRecord> g{rec(1, 1, {1, 0}), rec(1, 1, {3, 0}), rec(1, 1, {2, 0})};
  EXPECT_EQ(rank_gallery(query(2, 0, {0, 0}), g, {}), (std::vector<std::size_t>{0, 2, 1}));
}

TEST(RankGalleryTest, CosineSortsByDescendingSimilarity) {
  RetrievalProtocol p;
  p.distance = Distance::kCosine;
  std::vector<EmbeddingRecord> g{rec(1, 1, {0, 1}), rec(1, 1, {10, 1}), rec(1, 1, {-1, 0})};
  EXPECT_EQ(rank_gallery(query(2, 0, {1, 0}), g, p), (std::vector<std::size_t>{1, 0, 2}));
}

TEST(RankGalleryTest, TiesKeepInputOrder) {
  std::vector<EmbeddingRecord> g{rec(1, 1, {0, 1}), rec(2, 1, {1, 0}), rec(3, 1, {0, -1})};
  EXPECT_EQ(rank_gallery(query(9, 0, {0, 0}), g, {}), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(RankGalleryTest, SameIdentitySameCameraIsJunk) {
  std::vector<EmbeddingRecord> g{rec(7, 0, {1, 0}), rec(7, 1, {2, 0}), rec(8, 0, {3, 0})};
  EXPECT_EQ(rank_gallery(query(7, 0, {0, 0}), g, {}), (std::vector<std::size_t>{1, 2}));
  RetrievalProtocol keep_all;
  keep_all.cross_camera_only = false;
  EXPECT_EQ(rank_gallery(query(7, 0, {0, 0}), g, keep_all),
            (std::vector<std::size_t>{0, 1, 2}));
}

TEST(RankGalleryTest, DimensionMismatchIsRejected) {
  std::vector<EmbeddingRecord> g{rec(1, 1, {1, 0, 0})};
  EXPECT_THROW(rank_gallery(query(1, 0, {0, 0}), g, {}), std::invalid_argument);
}

TEST(DistanceTest, CosineWithZeroVectorIsOrthogonal) {
  EXPECT_EQ(distance({0, 0}, {1, 2}, Distance::kCosine), 1.0);
}

TEST(AveragePrecisionTest, HandCases) {
  EXPECT_EQ(average_precision({true}), 1.0);
  EXPECT_NEAR(average_precision({true, false, true, false, false}), (1.0 + 2.0 / 3.0) / 2.0,
              1e-15);
  EXPECT_NEAR(average_precision({false, false, false, true, true}), 0.325, 1e-15);
}

TEST(AveragePrecisionTest, NoPositivesIsAnError) {
  EXPECT_THROW(average_precision({false, false}), MetricError);
  EXPECT_THROW(average_precision({}), MetricError);
}

TEST(AveragePrecisionTest, OneExactlyWhenPositivesLead) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng() % 2;
    mask[rng() % n] = true;
    const double ap = average_precision(mask);
    const auto first_neg = std::find(mask.begin(), mask.end(), false);
    const bool leading = std::find(first_neg, mask.end(), true) == mask.end();
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0);
    EXPECT_EQ(ap == 1.0, leading);
  }
}

// Two queries: q1 finds its positive first (AP 1), q2 at rank 2 (AP 0.5).
struct TwoQueryFixture {
  std::vector<EmbeddingRecord> queries{query(1, 0, {0, 0}), query(2, 1, {10, 0})};
  std::vector<EmbeddingRecord> gallery{rec(1, 1, {0, 1}), rec(3, 2, {10, 1}),
                                       rec(2, 2, {10, 2}), rec(4, 2, {50, 50})};
};

TEST(MeanApTest, PerfectRetrievalIsOne) {
  std::vector<EmbeddingRecord> q{query(1, 0, {0, 0})};
  std::vector<EmbeddingRecord> g{rec(1, 1, {0, 0.1}), rec(2, 1, {5, 5})};
  auto r = mean_ap(q, g, {});
  EXPECT_EQ(r.value, 1.0);
  EXPECT_EQ(r.num_scored, 1u);
}

TEST(MeanApTest, AveragesQueryAps) {
  TwoQueryFixture f;
  EXPECT_EQ(mean_ap(f.queries, f.gallery, {}).value, 0.75);
}

TEST(MeanApTest, QueriesWithoutPositivesAreExcludedAndCounted) {
  TwoQueryFixture f;
  f.queries.push_back(query(99, 0, {1, 1}));
  auto r = mean_ap(f.queries, f.gallery, {});
  EXPECT_EQ(r.value, 0.75);
  EXPECT_EQ(r.num_scored, 2u);
  EXPECT_EQ(r.num_excluded, 1u);
}

TEST(MeanApTest, NothingToScoreIsAnError) {
  std::vector<EmbeddingRecord> q{query(1, 0, {0, 0})};
  std::vector<EmbeddingRecord> g{rec(1, 0, {0, 0}), rec(2, 1, {1, 1})};
  EXPECT_THROW(mean_ap(q, g, {}), MetricError);
  EXPECT_THROW(mean_ap(q, std::vector<EmbeddingRecord>{}, {}), MetricError);
}

TEST(CmcTest, RankOneAndTwo) {
  TwoQueryFixture f;
  EXPECT_EQ(cmc_rank_k(f.queries, f.gallery, {}, 1), 0.5);
  EXPECT_EQ(cmc_rank_k(f.queries, f.gallery, {}, 2), 1.0);
}

TEST(CmcTest, NonDecreasingInK) {
  for (std::uint64_t seed = 0; seed < kRandomDatasets; ++seed) {
    const auto d = oracle::random_dataset(seed);
    double prev = 0.0;
    for (std::size_t k = 1; k <= 10; ++k) {
      const double v = cmc_rank_k(d.queries, d.gallery, d.protocol, k);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(QueryMapTest, SingleCameraEqualsGlobal) {
  TwoQueryFixture f;
  for (auto& q : f.queries) q.camera_id = 3;
  auto m = query_map_per_camera(f.queries, f.gallery, {});
  ASSERT_EQ(m.scores.size(), 1u);
  EXPECT_EQ(m.scores.at(3).value, mean_ap(f.queries, f.gallery, {}).value);
}

TEST(QueryMapTest, GroupsByQueryCamera) {
  // Camera 1 query: AP 1.0. Camera 2 queries: positive at rank 2 (AP 0.5),
  // positives at ranks 1 and 5 (AP (1 + 2/5)/2 = 0.7).
  std::vector<EmbeddingRecord> q{query(1, 1, {0, 0}), query(2, 2, {100, 0}),
                                 query(3, 2, {200, 0})};
  std::vector<EmbeddingRecord> g{rec(1, 0, {0, 1}),
                                 rec(8, 0, {100, 1}), rec(2, 0, {100, 2}),
                                 rec(3, 0, {200, 1}), rec(8, 0, {200, 2}), rec(8, 0, {200, 3}),
                                 rec(8, 0, {200, 4}), rec(3, 0, {200, 5})};
  auto m = query_map_per_camera(q, g, {});
  EXPECT_EQ(m.scores.at(1).value, 1.0);
  EXPECT_NEAR(m.scores.at(2).value, 0.6, 1e-15);
  EXPECT_EQ(m.scores.at(2).num_queries, 2u);
}

TEST(QueryMapTest, CameraWithoutScorableQueriesIsListedAsOmitted) {
  TwoQueryFixture f;
  f.queries.push_back(query(99, 5, {1, 1}));
  auto m = query_map_per_camera(f.queries, f.gallery, {});
  EXPECT_FALSE(m.scores.contains(5));
  EXPECT_EQ(m.omitted, (std::vector<std::size_t>{5}));
}

TEST(GalleryMapTest, PositivesFromOneCameraEqualGlobal) {
  TwoQueryFixture f;
  for (auto& g : f.gallery) g.camera_id = 4;
  auto m = gallery_map_per_camera(f.queries, f.gallery, {});
  ASSERT_EQ(m.scores.size(), 1u);
  EXPECT_EQ(m.scores.at(4).value, mean_ap(f.queries, f.gallery, {}).value);
}

TEST(GalleryMapTest, RemovingOtherCameraPositivesLiftsTheRest) {
  // Positives at rank 1 (camera A = 1) and rank 2 (camera B = 2), one negative.
  std::vector<EmbeddingRecord> q{query(5, 0, {0, 0})};
  std::vector<EmbeddingRecord> g{rec(5, 1, {1, 0}), rec(5, 2, {2, 0}), rec(6, 1, {3, 0})};
  auto m = gallery_map_per_camera(q, g, {});
  EXPECT_EQ(m.scores.at(1).value, 1.0);
  EXPECT_EQ(m.scores.at(2).value, 1.0);
  EXPECT_EQ(m.scores.at(1).num_queries, 1u);
}

TEST(GalleryMapTest, JunkRuleKeepsQueryOutOfItsOwnCamera) {
  std::vector<EmbeddingRecord> q{query(5, 0, {0, 0})};
  std::vector<EmbeddingRecord> g{rec(5, 0, {1, 0}), rec(5, 2, {2, 0}), rec(6, 0, {3, 0})};
  auto m = gallery_map_per_camera(q, g, {});
  EXPECT_FALSE(m.scores.contains(0));
  EXPECT_TRUE(m.scores.contains(2));
}

class OracleEquivalenceTest : public ::testing::TestWithParam<int> {};

TEST_P(OracleEquivalenceTest, AllMetricsMatchNaiveImplementation) {
  const auto d = oracle::random_dataset(static_cast<std::uint64_t>(GetParam()));
  ASSERT_LE(d.queries.size() + d.gallery.size(), 200u);
  const auto p = naive(d.protocol);

  const auto expected_map = oracle::naive_map(d.queries, d.gallery, p);
  ASSERT_TRUE(expected_map.has_value());
  EXPECT_NEAR(mean_ap(d.queries, d.gallery, d.protocol).value, *expected_map, kOracleTol);

  for (std::size_t k : {1u, 5u, 10u})
    EXPECT_NEAR(cmc_rank_k(d.queries, d.gallery, d.protocol, k),
                *oracle::naive_rank_k(d.queries, d.gallery, p, k), kOracleTol);

  const auto qm = query_map_per_camera(d.queries, d.gallery, d.protocol);
  const auto nqm = oracle::naive_query_map(d.queries, d.gallery, p);
  ASSERT_EQ(qm.scores.size(), nqm.size());
  for (const auto& [cam, s] : nqm) {
    EXPECT_NEAR(qm.scores.at(cam).value, s.value, kOracleTol) << "camera " << cam;
    EXPECT_EQ(qm.scores.at(cam).num_queries, s.count);
  }

  const auto gm = gallery_map_per_camera(d.queries, d.gallery, d.protocol);
  const auto ngm = oracle::naive_gallery_map(d.queries, d.gallery, p);
  ASSERT_EQ(gm.scores.size(), ngm.size());
  for (const auto& [cam, s] : ngm) {
    EXPECT_NEAR(gm.scores.at(cam).value, s.value, kOracleTol) << "camera " << cam;
    EXPECT_EQ(gm.scores.at(cam).num_queries, s.count);
  }
}

TEST_P(OracleEquivalenceTest, QueryCountWeightedQmapEqualsGlobal) {
  const auto d = oracle::random_dataset(static_cast<std::uint64_t>(GetParam()));
  const auto ev = evaluate(d.queries, d.gallery, d.protocol);
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& [cam, s] : ev.query_map.scores) {
    weighted += static_cast<double>(s.num_queries) * s.value;
    total += s.num_queries;
  }
  EXPECT_EQ(total, ev.global.num_scored);
  EXPECT_NEAR(weighted / static_cast<double>(total), ev.global.value, 1e-12);
}

TEST_P(OracleEquivalenceTest, RemovingOutOfCameraPositivesNeverHurts) {
  const auto d = oracle::random_dataset(static_cast<std::uint64_t>(GetParam()));
  for (const auto& q : d.queries) {
    const auto ranked = rank_gallery(q, d.gallery, d.protocol);
    for (std::size_t cam = 0; cam < 6; ++cam) {
      std::vector<bool> kept_as_negatives;
      std::vector<bool> removed;
      bool any = false;
      for (std::size_t i : ranked) {
        const auto& g = d.gallery[i];
        const bool positive = g.person_id == q.person_id;
        const bool in_camera = positive && g.camera_id == cam;
        any = any || in_camera;
        kept_as_negatives.push_back(in_camera);
        if (!positive || in_camera) removed.push_back(in_camera);
      }
      if (!any) continue;
      EXPECT_GE(average_precision(removed), average_precision(kept_as_negatives));
    }
  }
}

TEST_P(OracleEquivalenceTest, GalleryOrderDoesNotMatter) {
  auto d = oracle::random_dataset(static_cast<std::uint64_t>(GetParam()));
  const auto before = evaluate(d.queries, d.gallery, d.protocol);
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) + 1000);
  std::shuffle(d.gallery.begin(), d.gallery.end(), rng);
  const auto after = evaluate(d.queries, d.gallery, d.protocol);
  EXPECT_NEAR(after.global.value, before.global.value, 1e-12);
  EXPECT_EQ(after.rank1, before.rank1);
  for (const auto& [cam, s] : before.query_map.scores)
    EXPECT_NEAR(after.query_map.scores.at(cam).value, s.value, 1e-12);
  for (const auto& [cam, s] : before.gallery_map.scores)
    EXPECT_NEAR(after.gallery_map.scores.at(cam).value, s.value, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(RandomDatasets, OracleEquivalenceTest,
                         ::testing::Range(0, kRandomDatasets));

TEST(SummaryTest, ConstantValues) {
  auto s = summarize({{0, 0.4}, {1, 0.4}, {2, 0.4}});
  EXPECT_EQ(s.weakest.value, 0.4);
  EXPECT_EQ(s.weakest.camera, 0u);
  EXPECT_NEAR(s.mean, 0.4, 1e-15);
  EXPECT_NEAR(s.spread, 0.0, 1e-15);
}

TEST(SummaryTest, HandStatistics) {
  auto s = summarize({{3, 0.6}, {1, 0.4}, {2, 0.2}});
  EXPECT_EQ(s.weakest.camera, 2u);
  EXPECT_EQ(s.weakest.value, 0.2);
  EXPECT_NEAR(s.mean, 0.4, 1e-15);
  EXPECT_NEAR(s.spread, std::sqrt(0.08 / 3.0), 1e-15);
  EXPECT_NEAR(s.spread, 0.1633, 1e-4);
}

TEST(SummaryTest, TiesResolveToLowestCamera) {
  EXPECT_EQ(summarize({{4, 0.3}, {2, 0.3}, {7, 0.9}}).weakest.camera, 2u);
}

TEST(SummaryTest, EmptyMapIsAnError) {
  EXPECT_THROW(summarize({}), MetricError);
  EXPECT_THROW(imbalance_report({}, {{0, 1.0}}), MetricError);
}

TEST(SummaryTest, MeanLiesBetweenExtremes) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::size_t, double> m;
    for (std::size_t c = 0; c < 1 + trial % 6; ++c) m[c] = u(rng);
    auto s = summarize(m);
    double hi = 0.0;
    for (const auto& [c, v] : m) hi = std::max(hi, v);
    EXPECT_GE(s.mean, s.weakest.value - 1e-15);
    EXPECT_LE(s.mean, hi + 1e-15);
  }
}

TEST(ParseTest, SplitAndDistanceNames) {
  EXPECT_EQ(parse_split("query"), Split::kQuery);
  EXPECT_EQ(parse_distance("cosine"), Distance::kCosine);
  EXPECT_EQ(to_string(Distance::kEuclidean), "euclidean");
  EXPECT_THROW(parse_split("train"), std::invalid_argument);
  EXPECT_THROW(parse_distance("manhattan"), std::invalid_argument);
}

}  // namespace
}  // namespace camreid::metrics
