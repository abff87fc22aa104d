#include "detkit/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "detkit/error.hpp"
#include "detkit/random.hpp"

namespace detkit {

namespace {

std::size_t count_distinct(std::span<const AnchorPrior> boxes) {
  std::vector<std::pair<double, double>> dims;
  dims.reserve(boxes.size());
  for (const auto& b : boxes) dims.emplace_back(b.pw, b.ph);
  std::sort(dims.begin(), dims.end());
  return static_cast<std::size_t>(std::unique(dims.begin(), dims.end()) - dims.begin());
}

// Nearest centroid; ties go to the lowest index.
std::size_t nearest(ClusterMetric m, const AnchorPrior& box,
                    const std::vector<AnchorPrior>& centroids) {
  std::size_t best = 0;
  double best_d = metric_distance(m, box, centroids[0]);
  for (std::size_t j = 1; j < centroids.size(); ++j) {
    const double d = metric_distance(m, box, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

std::vector<std::size_t> assign_all(ClusterMetric m, std::span<const AnchorPrior> boxes,
                                    const std::vector<AnchorPrior>& centroids) {
  std::vector<std::size_t> out(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) out[i] = nearest(m, boxes[i], centroids);
  return out;
}

std::vector<AnchorPrior> seed_plus_plus(ClusterMetric m, std::span<const AnchorPrior> boxes,
                                        int k, Rng& rng) {
  std::vector<AnchorPrior> centroids;
  centroids.reserve(k);
  centroids.push_back(boxes[rng.below(boxes.size())]);
  std::vector<double> closest(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    closest[i] = metric_distance(m, boxes[i], centroids[0]);
  }
  while (static_cast<int>(centroids.size()) < k) {
    // SSE is already a squared distance; 1-IOU is squared as in D^2 seeding.
    std::vector<double> weight(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      weight[i] = m == ClusterMetric::kSse ? closest[i] : closest[i] * closest[i];
    }
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    if (!(total > 0.0)) throw InvariantViolation("kmeans++: no box left to seed from");
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (weight[i] <= 0.0) continue;
      acc += weight[i];
      pick = i;
      if (target < acc) break;
    }
    centroids.push_back(boxes[pick]);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      closest[i] = std::min(closest[i], metric_distance(m, boxes[i], centroids.back()));
    }
  }
  return centroids;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct Run {
  std::vector<AnchorPrior> centroids;
  std::vector<std::size_t> assignment;
  double mean_distance = 0.0;
  int iterations = 0;
};

Run lloyd(std::span<const AnchorPrior> boxes, const ClusterConfig& cfg, Rng& rng) {
  const auto m = cfg.metric;
  Run run;
  run.centroids = seed_plus_plus(m, boxes, cfg.k, rng);
  run.assignment = assign_all(m, boxes, run.centroids);

  std::vector<std::vector<AnchorPrior>> members(cfg.k);
  while (run.iterations < cfg.max_iters) {
    for (auto& mem : members) mem.clear();
    for (std::size_t i = 0; i < boxes.size(); ++i) members[run.assignment[i]].push_back(boxes[i]);

    for (int j = 0; j < cfg.k; ++j) {
      if (!members[j].empty()) run.centroids[j] = update_centroid(m, members[j]);
    }
    // Empty clusters are reseeded from the worst-served box.
    for (int j = 0; j < cfg.k; ++j) {
      if (!members[j].empty()) continue;
      std::size_t worst = 0;
      double worst_d = -1.0;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const double d = metric_distance(m, boxes[i], run.centroids[run.assignment[i]]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      run.centroids[j] = boxes[worst];
      run.assignment[worst] = static_cast<std::size_t>(j);
      members[j].push_back(boxes[worst]);
    }
    ++run.iterations;

    auto next = assign_all(m, boxes, run.centroids);
    if (next == run.assignment) break;
    run.assignment = std::move(next);
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    sum += metric_distance(m, boxes[i], run.centroids[run.assignment[i]]);
  }
  run.mean_distance = sum / static_cast<double>(boxes.size());
  return run;
}

}  // namespace

std::string_view to_string(ClusterMetric m) {
  return m == ClusterMetric::kIou ? "iou" : "sse";
}

ClusterMetric parse_cluster_metric(std::string_view s) {
  if (s == "iou") return ClusterMetric::kIou;
  if (s == "sse") return ClusterMetric::kSse;
  throw InvalidArgument("unknown cluster metric '" + std::string(s) + "' (expected iou|sse)");
}

double cluster_distance(const AnchorPrior& box, const AnchorPrior& centroid) {
  return 1.0 - iou_wh(box, centroid);
}

double metric_distance(ClusterMetric m, const AnchorPrior& box, const AnchorPrior& centroid) {
  if (m == ClusterMetric::kIou) return cluster_distance(box, centroid);
  const double dw = box.pw - centroid.pw;
  const double dh = box.ph - centroid.ph;
  return dw * dw + dh * dh;
}

AnchorPrior update_centroid(ClusterMetric m, std::span<const AnchorPrior> members) {
  if (members.empty()) throw InvalidArgument("update_centroid: empty cluster");
  if (m == ClusterMetric::kSse) {
    double sw = 0.0, sh = 0.0;
    for (const auto& b : members) {
      sw += b.pw;
      sh += b.ph;
    }
    const auto n = static_cast<double>(members.size());
    return {sw / n, sh / n};
  }
  std::vector<double> ws, hs;
  ws.reserve(members.size());
  hs.reserve(members.size());
  for (const auto& b : members) {
    ws.push_back(b.pw);
    hs.push_back(b.ph);
  }
  return {median(std::move(ws)), median(std::move(hs))};
}

ClusterResult kmeans(std::span<const AnchorPrior> boxes, const ClusterConfig& cfg) {
  if (boxes.empty()) throw InvalidArgument("kmeans: no boxes");
  if (cfg.k < 1) throw InvalidArgument("kmeans: k must be >= 1");
  if (cfg.max_iters < 1 || cfg.restarts < 1) {
    throw InvalidArgument("kmeans: max_iters and restarts must be >= 1");
  }
  for (const auto& b : boxes) {
    if (!(b.pw > 0.0) || !(b.ph > 0.0) || !std::isfinite(b.pw) || !std::isfinite(b.ph)) {
      throw InvalidArgument("kmeans: box dimensions must be positive and finite");
    }
  }
  const std::size_t distinct = count_distinct(boxes);
  if (static_cast<std::size_t>(cfg.k) > distinct) {
    throw InvalidArgument("kmeans: k=" + std::to_string(cfg.k) + " exceeds " +
                          std::to_string(distinct) + " distinct boxes");
  }

  Run best;
  bool have_best = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(cfg.seed ^ mix64(static_cast<uint64_t>(r) + 1));
    Run run = lloyd(boxes, cfg, rng);
    if (!have_best || run.mean_distance < best.mean_distance) {
      best = std::move(run);
      have_best = true;
    }
  }

  std::vector<std::size_t> order(cfg.k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = best.centroids[a];
    const auto& cb = best.centroids[b];
    if (ca.area() != cb.area()) return ca.area() < cb.area();
    return ca.pw < cb.pw;
  });
  std::vector<std::size_t> rank(cfg.k);
  for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos;

  ClusterResult out;
  out.centroids.reserve(cfg.k);
  for (auto idx : order) out.centroids.push_back(best.centroids[idx]);
  out.assignment.resize(boxes.size());
  out.assignment_counts.assign(cfg.k, 0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    out.assignment[i] = rank[best.assignment[i]];
    ++out.assignment_counts[out.assignment[i]];
  }
  out.iterations_run = best.iterations;
  out.mean_distance = best.mean_distance;
  out.avg_iou = avg_iou(boxes, out.centroids);
  return out;
}

double avg_iou(std::span<const AnchorPrior> boxes, std::span<const AnchorPrior> priors) {
  if (boxes.empty() || priors.empty()) throw InvalidArgument("avg_iou: empty input");
  double sum = 0.0;
  for (const auto& b : boxes) {
    double best = 0.0;
    for (const auto& p : priors) best = std::max(best, iou_wh(b, p));
    sum += best;
  }
  return sum / static_cast<double>(boxes.size());
}

std::vector<std::pair<int, double>> sweep_k(std::span<const AnchorPrior> boxes,
                                            std::span<const int> ks,
                                            const ClusterConfig& cfg) {
  std::vector<std::pair<int, double>> out;
  out.reserve(ks.size());
  for (int k : ks) {
    ClusterConfig c = cfg;
    c.k = k;
    out.emplace_back(k, kmeans(boxes, c).avg_iou);
  }
  return out;
}

std::vector<AnchorPrior> reference_anchor_boxes(double image_size) {
  if (!(image_size > 0.0)) throw InvalidArgument("reference_anchor_boxes: bad image size");
  std::vector<AnchorPrior> out;
  for (double scale : {128.0, 256.0, 512.0}) {
    for (double ratio : {0.5, 1.0, 2.0}) {  // height / width
      const double w = scale / std::sqrt(ratio);
      const double h = scale * std::sqrt(ratio);
      out.push_back({std::min(w / image_size, 1.0), std::min(h / image_size, 1.0)});
    }
  }
  return out;
}

std::vector<AnchorPrior> parse_plain_boxes(std::string_view text, const std::string& source) {
  std::vector<AnchorPrior> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double w, h;
    if (!(ls >> w)) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (!(ls >> h)) throw DataError("expected 'w h'", where);
    std::string extra;
    if (ls >> extra) throw DataError("trailing text '" + extra + "'", where);
    if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(w) || !std::isfinite(h)) {
      throw DataError("box dimensions must be positive", where);
    }
    out.push_back({w, h});
  }
  return out;
}

std::string format_priors(std::span<const AnchorPrior> priors) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  for (const auto& p : priors) os << p.pw << ' ' << p.ph << '\n';
  return os.str();
}

}  // namespace detkit
