#pragma once

// Slow reference implementations used as test oracles. They share no code
// with the library beyond the primitive distance and IOU functions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "detkit/anchors.hpp"
#include "detkit/evalmap.hpp"
#include "detkit/geometry.hpp"

namespace detkit::oracle {

// Minimum over every assignment of boxes to k non-empty groups of the mean
// distance to each group's centroid under the metric's update rule.
inline double partition_optimum(const std::vector<AnchorPrior>& boxes, int k, ClusterMetric m) {
  const std::size_t n = boxes.size();
  std::vector<int> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<std::vector<AnchorPrior>> groups(k);
    for (std::size_t i = 0; i < n; ++i) groups[label[i]].push_back(boxes[i]);
    const bool all_used =
        std::all_of(groups.begin(), groups.end(), [](const auto& g) { return !g.empty(); });
    if (all_used) {
      double sum = 0.0;
      for (const auto& g : groups) {
        const AnchorPrior c = update_centroid(m, g);
        for (const auto& b : g) sum += metric_distance(m, b, c);
      }
      best = std::min(best, sum / static_cast<double>(n));
    }
    std::size_t pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

// Brute-force NMS: repeatedly take the best remaining box of each
// (image, class) and drop everything overlapping it above the threshold.
inline std::vector<std::size_t> nms_survivors(const std::vector<Detection>& dets, double thr) {
  std::vector<bool> alive(dets.size(), true), kept(dets.size(), false);
  auto better = [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].box.area() != dets[b].box.area()) return dets[a].box.area() > dets[b].box.area();
    return a < b;
  };
  while (true) {
    std::size_t pick = dets.size();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (alive[i] && (pick == dets.size() || better(i, pick))) pick = i;
    }
    if (pick == dets.size()) break;
    kept[pick] = true;
    alive[pick] = false;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!alive[i] || dets[i].image_id != dets[pick].image_id || dets[i].class_ != dets[pick].class_) continue;
      double v = 0.0;
      if (dets[i].box.area() > 0 || dets[pick].box.area() > 0) v = iou(dets[i].box, dets[pick].box);
      if (v > thr) alive[i] = false;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (kept[i]) out.push_back(i);
  }
  return out;
}

// Reference AP. Precision is interpolated by taking, for every recall level
// r, the maximum precision at any point with recall >= r; the area is summed
// over the distinct recall values reached.
inline double reference_ap(const std::vector<Detection>& dets, const std::vector<GtBox>& gts,
                           const std::string& cls, double thr, ApMethod method) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].class_ == cls) order.push_back(i);
  }
  // Insertion sort keeps equal scores in input order.
  for (std::size_t i = 1; i < order.size(); ++i) {
    for (std::size_t j = i; j > 0 && dets[order[j]].score > dets[order[j - 1]].score; --j) {
      std::swap(order[j], order[j - 1]);
    }
  }
  double positives = 0;
  for (const auto& g : gts) positives += (g.class_ == cls && !g.difficult) ? 1 : 0;

  std::vector<bool> used(gts.size(), false);
  std::vector<double> rec, prec;
  double tp = 0, fp = 0;
  for (std::size_t di : order) {
    const Detection& d = dets[di];
    double best = -1.0;
    std::size_t arg = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].class_ != cls || gts[g].image_id != d.image_id) continue;
      double v = 0.0;
      if (d.box.area() > 0 || gts[g].box.area() > 0) v = iou(d.box, gts[g].box);
      if (v > best) {
        best = v;
        arg = g;
      }
    }
    if (arg < gts.size() && best >= thr) {
      if (gts[arg].difficult) continue;
      used[arg] = true;
      tp += 1;
    } else {
      fp += 1;
    }
    rec.push_back(tp / positives);
    prec.push_back(tp / (tp + fp));
  }

  auto interpolated = [&](double r) {
    double p = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      if (rec[i] >= r) p = std::max(p, prec[i]);
    }
    return p;
  };
  if (method == ApMethod::kVoc2007ElevenPoint) {
    double s = 0.0;
    for (int i = 0; i <= 10; ++i) s += interpolated(i / 10.0);
    return s / 11.0;
  }
  std::vector<double> levels(rec.begin(), rec.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double area = 0.0, prev = 0.0;
  for (double r : levels) {
    area += (r - prev) * interpolated(r);
    prev = r;
  }
  return area;
}

}  // namespace detkit::oracle
