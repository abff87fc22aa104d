#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detkit/datasets.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

struct Detection {
  std::string image_id;
  Box box;  // normalized
  std::string class_;
  double score = 0.0;
};

struct GtBox {
  std::string image_id;
  Box box;  // normalized
  std::string class_;
  bool difficult = false;
};

enum class ApMethod {
  kVoc2007ElevenPoint,
  kAreaUnderCurve,
};

std::string_view to_string(ApMethod m);
ApMethod parse_ap_method(std::string_view s);  // "voc2007" | "auc" | "voc2012"

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PrPoint> points;  // one per scored (non-ignored) detection, rank order
  double ap = 0.0;
  ApMethod method = ApMethod::kVoc2007ElevenPoint;
  std::size_t positives = 0;
};

// AP from an already-built list of (recall, precision) points.
double ap_from_points(std::span<const PrPoint> points, ApMethod method);

// Greedy per-class, per-image suppression: keep the highest scoring box,
// drop others with IOU > threshold. Order: score desc, area desc, input
// order. Survivors are returned in input order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

// VOC-style AP for one class. Detections are ranked by score (stable); each
// matches the highest-IOU unmatched GT of its class and image when that IOU
// reaches the threshold, else it is a false positive. A detection whose best
// candidate is a difficult GT is ignored. Throws NoPositives when the class
// has no non-difficult GT.
PRCurve average_precision(std::span<const Detection> dets, std::span<const GtBox> gts,
                          std::string_view class_, double iou_threshold = 0.5,
                          ApMethod method = ApMethod::kVoc2007ElevenPoint);

struct MapReport {
  std::map<std::string, PRCurve> per_class;  // classes with at least one positive
  std::vector<std::string> skipped;          // requested classes without positives
  double map = 0.0;
};

// Mean AP over `classes` (all GT classes when empty) that have positives.
// Throws NoPositives when none do.
MapReport mean_ap(std::span<const Detection> dets, std::span<const GtBox> gts,
                  std::span<const std::string> classes = {}, double iou_threshold = 0.5,
                  ApMethod method = ApMethod::kVoc2007ElevenPoint);

// Fraction of non-difficult GT boxes overlapped at >= iou_threshold by any
// of the top `max_dets` detections of the same image, regardless of class.
double recall_at(std::span<const Detection> dets, std::span<const GtBox> gts,
                 double iou_threshold, std::size_t max_dets);

// GT boxes from detection samples.
std::vector<GtBox> ground_truth_from_samples(std::span<const Sample> samples);

// `{"image_id":..,"class":..,"score":..,"box":[cx,cy,w,h]}` per line.
std::vector<Detection> parse_detections_jsonl(std::string_view text,
                                              const std::string& source = "<dets>");
std::string to_jsonl(std::span<const Detection> dets);

}  // namespace detkit
