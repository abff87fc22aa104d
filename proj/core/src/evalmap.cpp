#include "detkit/evalmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "detkit/error.hpp"

namespace detkit {

namespace {

double overlap(const Box& a, const Box& b) {
  try {
    return iou(a, b);
  } catch (const DegenerateBoxes&) {
    return 0.0;
  }
}

// Indices of `dets` sorted by score descending; ties keep input order.
std::vector<std::size_t> rank_by_score(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

void check_threshold(double t, const char* what) {
  if (!(t > 0.0 && t <= 1.0)) throw InvalidArgument(std::string(what) + ": IOU threshold must lie in (0,1]");
}

}  // namespace

std::string_view to_string(ApMethod m) {
  return m == ApMethod::kVoc2007ElevenPoint ? "voc2007" : "auc";
}

ApMethod parse_ap_method(std::string_view s) {
  if (s == "voc2007" || s == "11pt") return ApMethod::kVoc2007ElevenPoint;
  if (s == "auc" || s == "voc2012" || s == "area") return ApMethod::kAreaUnderCurve;
  throw InvalidArgument("unknown AP method '" + std::string(s) + "' (expected voc2007|auc)");
}

double ap_from_points(std::span<const PrPoint> points, ApMethod method) {
  if (method == ApMethod::kVoc2007ElevenPoint) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0.0;
      for (const auto& pt : points) {
        if (pt.recall >= t) p = std::max(p, pt.precision);
      }
      sum += p;
    }
    return sum / 11.0;
  }
  std::vector<double> mrec{0.0}, mpre{0.0};
  for (const auto& pt : points) {
    mrec.push_back(pt.recall);
    mpre.push_back(pt.precision);
  }
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 0; i + 1 < mrec.size(); ++i) {
    if (mrec[i + 1] != mrec[i]) ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
  }
  return ap;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw InvalidArgument("nms: threshold must lie in (0,1)");
  }
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    groups[{dets[i].image_id, dets[i].class_}].push_back(i);
  }
  std::vector<bool> keep(dets.size(), false);
  for (auto& [key, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
      return dets[a].box.area() > dets[b].box.area();
    });
    std::vector<std::size_t> kept;
    for (std::size_t i : idx) {
      const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
        return overlap(dets[k].box, dets[i].box) > iou_threshold;
      });
      if (!suppressed) {
        kept.push_back(i);
        keep[i] = true;
      }
    }
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (keep[i]) out.push_back(dets[i]);
  }
  return out;
}

PRCurve average_precision(std::span<const Detection> dets, std::span<const GtBox> gts,
                          std::string_view class_, double iou_threshold, ApMethod method) {
  check_threshold(iou_threshold, "average_precision");
  std::unordered_map<std::string, std::vector<std::size_t>> gt_by_image;
  PRCurve curve;
  curve.method = method;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].class_ != class_) continue;
    gt_by_image[gts[i].image_id].push_back(i);
    if (!gts[i].difficult) ++curve.positives;
  }
  if (curve.positives == 0) {
    throw NoPositives("class '" + std::string(class_) + "' has no ground truth");
  }

  std::vector<Detection> cls;
  for (const auto& d : dets) {
    if (d.class_ == class_) cls.push_back(d);
  }
  std::vector<bool> matched(gts.size(), false);
  std::size_t tp = 0, fp = 0;
  for (std::size_t di : rank_by_score(cls)) {
    const Detection& d = cls[di];
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    if (auto it = gt_by_image.find(d.image_id); it != gt_by_image.end()) {
      for (std::size_t gi : it->second) {
        if (matched[gi]) continue;
        const double v = overlap(d.box, gts[gi].box);
        if (v > best_iou) {
          best_iou = v;
          best = gi;
        }
      }
    }
    if (best && best_iou >= iou_threshold) {
      if (gts[*best].difficult) continue;
      matched[*best] = true;
      ++tp;
    } else {
      ++fp;
    }
    curve.points.push_back({static_cast<double>(tp) / static_cast<double>(curve.positives),
                            static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  curve.ap = ap_from_points(curve.points, method);
  return curve;
}

MapReport mean_ap(std::span<const Detection> dets, std::span<const GtBox> gts,
                  std::span<const std::string> classes, double iou_threshold, ApMethod method) {
  std::vector<std::string> wanted(classes.begin(), classes.end());
  if (wanted.empty()) {
    std::set<std::string> all;
    for (const auto& g : gts) all.insert(g.class_);
    wanted.assign(all.begin(), all.end());
  }
  MapReport rep;
  double sum = 0.0;
  for (const auto& c : wanted) {
    try {
      auto curve = average_precision(dets, gts, c, iou_threshold, method);
      sum += curve.ap;
      rep.per_class.emplace(c, std::move(curve));
    } catch (const NoPositives&) {
      rep.skipped.push_back(c);
    }
  }
  if (rep.per_class.empty()) throw NoPositives("mean_ap: no class has ground truth");
  rep.map = sum / static_cast<double>(rep.per_class.size());
  return rep;
}

double recall_at(std::span<const Detection> dets, std::span<const GtBox> gts,
                 double iou_threshold, std::size_t max_dets) {
  check_threshold(iou_threshold, "recall_at");
  std::unordered_map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t di : rank_by_score(dets)) {
    auto& v = by_image[dets[di].image_id];
    if (v.size() < max_dets) v.push_back(di);
  }
  std::size_t positives = 0, hit = 0;
  for (const auto& g : gts) {
    if (g.difficult) continue;
    ++positives;
    auto it = by_image.find(g.image_id);
    if (it == by_image.end()) continue;
    const bool found = std::any_of(it->second.begin(), it->second.end(), [&](std::size_t di) {
      return overlap(dets[di].box, g.box) >= iou_threshold;
    });
    if (found) ++hit;
  }
  if (positives == 0) throw NoPositives("recall_at: no ground truth");
  return static_cast<double>(hit) / static_cast<double>(positives);
}

std::vector<GtBox> ground_truth_from_samples(std::span<const Sample> samples) {
  std::vector<GtBox> out;
  for (const auto& s : samples) {
    if (!s.is_detection()) continue;
    for (const auto& lb : s.detection().boxes) {
      out.push_back({s.image_id, lb.box, lb.class_, lb.difficult});
    }
  }
  return out;
}

std::vector<Detection> parse_detections_jsonl(std::string_view text, const std::string& source) {
  using nlohmann::json;
  std::vector<Detection> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      Detection d;
      d.image_id = j.at("image_id").get<std::string>();
      d.class_ = j.at("class").get<std::string>();
      d.score = j.at("score").get<double>();
      const auto box = j.at("box").get<std::vector<double>>();
      if (box.size() != 4) throw DataError("box must be [cx,cy,w,h]", where);
      d.box = {box[0], box[1], box[2], box[3]};
      if (!(d.score >= 0.0 && d.score <= 1.0)) throw DataError("score must lie in [0,1]", where);
      validate(d.box);
      out.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw DataError(std::string("bad detection record: ") + e.what(), where);
    } catch (const InvalidArgument& e) {
      throw DataError(e.what(), where);
    }
  }
  return out;
}

std::string to_jsonl(std::span<const Detection> dets) {
  using nlohmann::json;
  std::string out;
  for (const auto& d : dets) {
    json j;
    j["image_id"] = d.image_id;
    j["class"] = d.class_;
    j["score"] = d.score;
    j["box"] = json::array({d.box.cx, d.box.cy, d.box.w, d.box.h});
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace detkit
