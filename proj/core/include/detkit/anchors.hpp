#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "detkit/geometry.hpp"

namespace detkit {

enum class ClusterMetric {
  kIou,  // d = 1 - iou_wh, centroid = componentwise median
  kSse,  // d = squared Euclidean distance, centroid = mean
};

std::string_view to_string(ClusterMetric m);
ClusterMetric parse_cluster_metric(std::string_view s);

struct ClusterConfig {
  int k = 5;
  ClusterMetric metric = ClusterMetric::kIou;
  int max_iters = 300;
  uint64_t seed = 0;
  int restarts = 1;
};

struct ClusterResult {
  std::vector<AnchorPrior> centroids;      // ascending by area
  double avg_iou = 0.0;                    // mean best iou_wh of boxes to centroids
  double mean_distance = 0.0;              // objective of the returned run
  int iterations_run = 0;
  std::vector<std::size_t> assignment_counts;  // aligned with centroids
  std::vector<std::size_t> assignment;     // per input box, index into centroids
};

// 1 - iou_wh(box, centroid).
double cluster_distance(const AnchorPrior& box, const AnchorPrior& centroid);

// Distance under the configured metric.
double metric_distance(ClusterMetric m, const AnchorPrior& box, const AnchorPrior& centroid);

// Centroid update rule for one cluster under the metric (median or mean).
AnchorPrior update_centroid(ClusterMetric m, std::span<const AnchorPrior> members);

// Lloyd iteration with k-means++ seeding. Best of cfg.restarts runs by mean
// distance; deterministic in (boxes, cfg).
ClusterResult kmeans(std::span<const AnchorPrior> boxes, const ClusterConfig& cfg);

// Mean over boxes of the best iou_wh against any prior.
double avg_iou(std::span<const AnchorPrior> boxes, std::span<const AnchorPrior> priors);

std::vector<std::pair<int, double>> sweep_k(std::span<const AnchorPrior> boxes,
                                            std::span<const int> ks,
                                            const ClusterConfig& cfg);

// The nine hand-picked Faster R-CNN anchors (scales 128/256/512 at ratios
// 1:2, 1:1, 2:1) normalized by a `image_size`-pixel image.
std::vector<AnchorPrior> reference_anchor_boxes(double image_size);

// "w h" per line; blank lines and '#' comments skipped.
std::vector<AnchorPrior> parse_plain_boxes(std::string_view text,
                                           const std::string& source = "<input>");
// "w h" per line with 6 decimals, in the given order.
std::string format_priors(std::span<const AnchorPrior> priors);

}  // namespace detkit
