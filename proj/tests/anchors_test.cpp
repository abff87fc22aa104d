#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "detkit/anchors.hpp"
#include "detkit/error.hpp"
#include "detkit/random.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace detkit {
namespace {

std::vector<AnchorPrior> two_clusters() {
  std::vector<AnchorPrior> boxes;
  for (int i = 0; i < 50; ++i) {
    boxes.push_back({1, 1});
    boxes.push_back({8, 8});
  }
  return boxes;
}

std::vector<AnchorPrior> random_boxes(Rng& rng, std::size_t n) {
  std::vector<AnchorPrior> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({0.02 + rng.uniform(), 0.02 + rng.uniform()});
  return out;
}

TEST(ClusterDistance, Examples) {
  EXPECT_EQ(cluster_distance({0.3, 0.4}, {0.3, 0.4}), 0.0);
  EXPECT_DOUBLE_EQ(cluster_distance({1, 1}, {2, 2}), 0.75);
  EXPECT_DOUBLE_EQ(metric_distance(ClusterMetric::kSse, {1, 1}, {2, 3}), 5.0);
}

TEST(Kmeans, RecoversTwoClusters) {
  ClusterConfig cfg;
  cfg.k = 2;
  const ClusterResult r = kmeans(two_clusters(), cfg);
  ASSERT_EQ(r.centroids.size(), 2u);
  EXPECT_EQ(r.centroids[0], (AnchorPrior{1, 1}));
  EXPECT_EQ(r.centroids[1], (AnchorPrior{8, 8}));
  EXPECT_EQ(r.avg_iou, 1.0);
  EXPECT_EQ(r.assignment_counts, (std::vector<std::size_t>{50, 50}));
}

TEST(Kmeans, SseSingleClusterIsMean) {
  ClusterConfig cfg;
  cfg.k = 1;
  cfg.metric = ClusterMetric::kSse;
  const std::vector<AnchorPrior> boxes{{1, 1}, {3, 3}};
  const ClusterResult r = kmeans(boxes, cfg);
  EXPECT_EQ(r.centroids[0], (AnchorPrior{2, 2}));
}

TEST(Kmeans, IouSingleClusterIsMedian) {
  ClusterConfig cfg;
  cfg.k = 1;
  const std::vector<AnchorPrior> boxes{{1, 5}, {2, 1}, {9, 3}};
  EXPECT_EQ(kmeans(boxes, cfg).centroids[0], (AnchorPrior{2, 3}));
}

TEST(Kmeans, Errors) {
  ClusterConfig cfg;
  cfg.k = 3;
  EXPECT_THROW(kmeans(std::vector<AnchorPrior>{}, cfg), InvalidArgument);
  const std::vector<AnchorPrior> dup{{1, 1}, {1, 1}, {2, 2}};
  EXPECT_THROW(kmeans(dup, cfg), InvalidArgument);
  const std::vector<AnchorPrior> bad{{1, 1}, {0, 2}, {2, 2}};
  EXPECT_THROW(kmeans(bad, cfg), InvalidArgument);
}

TEST(Kmeans, DeterministicForSeed) {
  Rng rng(1);
  const auto boxes = random_boxes(rng, 200);
  ClusterConfig cfg;
  cfg.seed = 77;
  cfg.restarts = 3;
  const ClusterResult a = kmeans(boxes, cfg), b = kmeans(boxes, cfg);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.avg_iou, b.avg_iou);
}

TEST(Kmeans, ResultInvariants) {
  Rng rng(2);
  for (auto metric : {ClusterMetric::kIou, ClusterMetric::kSse}) {
    const auto boxes = random_boxes(rng, 150);
    ClusterConfig cfg;
    cfg.metric = metric;
    cfg.k = 4;
    cfg.seed = 9;
    const ClusterResult r = kmeans(boxes, cfg);
    ASSERT_EQ(r.centroids.size(), 4u);
    for (std::size_t i = 1; i < r.centroids.size(); ++i) {
      EXPECT_LE(r.centroids[i - 1].area(), r.centroids[i].area());
    }
    EXPECT_EQ(std::accumulate(r.assignment_counts.begin(), r.assignment_counts.end(), std::size_t{0}),
              boxes.size());
    EXPECT_DOUBLE_EQ(r.avg_iou, avg_iou(boxes, r.centroids));
    // Every box sits with its nearest centroid (lowest index on ties).
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const double mine = metric_distance(metric, boxes[i], r.centroids[r.assignment[i]]);
      for (std::size_t c = 0; c < r.centroids.size(); ++c) {
        EXPECT_LE(mine, metric_distance(metric, boxes[i], r.centroids[c]));
      }
    }
  }
}

TEST(Kmeans, KEqualsDistinctGivesPerfectFit) {
  const std::vector<AnchorPrior> boxes{{0.1, 0.2}, {0.3, 0.3}, {0.1, 0.2}, {0.5, 0.9}, {0.7, 0.1}};
  ClusterConfig cfg;
  cfg.k = 4;
  EXPECT_EQ(kmeans(boxes, cfg).avg_iou, 1.0);
}

TEST(Kmeans, NeverBeatsExhaustiveOptimum) {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const auto boxes = random_boxes(rng, 3 + rng.below(6));
    for (auto metric : {ClusterMetric::kIou, ClusterMetric::kSse}) {
      ClusterConfig cfg;
      cfg.metric = metric;
      cfg.k = 1 + static_cast<int>(rng.below(3));
      cfg.seed = trial;
      const double opt = oracle::partition_optimum(boxes, cfg.k, metric);
      EXPECT_GE(kmeans(boxes, cfg).mean_distance, opt - 1e-12);
    }
  }
}

TEST(Kmeans, SseRestartsReachExhaustiveOptimum) {
  Rng rng(45);
  for (int trial = 0; trial < 30; ++trial) {
    const auto boxes = random_boxes(rng, 3 + rng.below(6));
    ClusterConfig cfg;
    cfg.metric = ClusterMetric::kSse;
    cfg.k = 1 + static_cast<int>(rng.below(3));
    cfg.seed = trial;
    cfg.restarts = 64;
    EXPECT_NEAR(kmeans(boxes, cfg).mean_distance,
                oracle::partition_optimum(boxes, cfg.k, cfg.metric), 1e-9);
  }
}

TEST(AvgIou, Examples) {
  const std::vector<AnchorPrior> p{{0.1, 0.2}, {0.4, 0.3}};
  EXPECT_EQ(avg_iou(p, p), 1.0);
  EXPECT_DOUBLE_EQ(avg_iou(std::vector<AnchorPrior>{{1, 1}}, std::vector<AnchorPrior>{{2, 2}}), 0.25);
  EXPECT_THROW(avg_iou(std::vector<AnchorPrior>{}, p), InvalidArgument);
}

TEST(SweepK, Examples) {
  ClusterConfig cfg;
  const std::vector<int> one{1};
  const std::vector<AnchorPrior> same(5, AnchorPrior{0.2, 0.4});
  const auto s1 = sweep_k(same, one, cfg);
  ASSERT_EQ(s1.size(), 1u);
  EXPECT_EQ(s1[0], (std::pair<int, double>{1, 1.0}));

  const std::vector<int> ks{1, 2};
  const auto s2 = sweep_k(two_clusters(), ks, cfg);
  // k=1: the median of a 50/50 split is the upper box, giving (1/64 + 1) / 2.
  EXPECT_DOUBLE_EQ(s2[0].second, avg_iou(two_clusters(), kmeans(two_clusters(), {1}).centroids));
  EXPECT_EQ(s2[1].second, 1.0);
  EXPECT_GT(s2[1].second, s2[0].second);
}

TEST(PlainBoxes, ParseAndFormat) {
  const auto boxes = parse_plain_boxes("# comment\n0.5 0.25\n\n1 2  \n", "mem");
  ASSERT_EQ(boxes.size(), 2u);
  EXPECT_EQ(boxes[1], (AnchorPrior{1, 2}));
  EXPECT_EQ(format_priors(boxes), "0.500000 0.250000\n1.000000 2.000000\n");
  EXPECT_THROW(parse_plain_boxes("0.5\n", "mem"), DataError);
  EXPECT_THROW(parse_plain_boxes("0.5 x\n", "mem"), DataError);
  EXPECT_THROW(parse_plain_boxes("0.5 -1\n", "mem"), DataError);
  try {
    parse_plain_boxes("1 1\n2 2 2\n", "boxes.txt");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.where(), "boxes.txt:2");
  }
}

TEST(PlainBoxes, FixtureClusters) {
  const auto boxes = parse_plain_boxes(test::slurp(test::data_path("two_clusters.txt")));
  ASSERT_EQ(boxes.size(), 100u);
  ClusterConfig cfg;
  cfg.k = 2;
  const auto r = kmeans(boxes, cfg);
  EXPECT_EQ(r.centroids[0], (AnchorPrior{0.1, 0.1}));
  EXPECT_EQ(r.centroids[1], (AnchorPrior{0.8, 0.8}));
  EXPECT_EQ(r.avg_iou, 1.0);
}

TEST(ReferenceAnchors, NineDistinctBoxes) {
  const auto a = reference_anchor_boxes(1000.0);
  ASSERT_EQ(a.size(), 9u);
  std::set<std::pair<double, double>> distinct;
  for (const auto& p : a) distinct.insert({p.pw, p.ph});
  EXPECT_EQ(distinct.size(), 9u);
}

TEST(Metric, ParseNames) {
  EXPECT_EQ(parse_cluster_metric("iou"), ClusterMetric::kIou);
  EXPECT_EQ(parse_cluster_metric("sse"), ClusterMetric::kSse);
  EXPECT_EQ(to_string(ClusterMetric::kSse), "sse");
  EXPECT_THROW(parse_cluster_metric("l1"), InvalidArgument);
}

}  // namespace
}  // namespace detkit
