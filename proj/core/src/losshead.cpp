#include "detkit/losshead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "detkit/error.hpp"

namespace detkit {

namespace {

double dsigmoid_from(double s) { return s * (1.0 - s); }

// IOU of two grid-unit boxes and its partial derivatives with respect to the
// first box's (cx, cy, w, h). Derivatives are one-sided at coincident edges.
struct IouGrad {
  double iou = 0.0;
  double d_cx = 0.0;
  double d_cy = 0.0;
  double d_w = 0.0;
  double d_h = 0.0;
};

IouGrad iou_with_grad(const Box& p, const Box& g) {
  IouGrad out;
  const double iw = std::min(p.right(), g.right()) - std::max(p.left(), g.left());
  const double ih = std::min(p.bottom(), g.bottom()) - std::max(p.top(), g.top());
  if (iw <= 0.0 || ih <= 0.0) return out;

  const double inter = iw * ih;
  const double area_p = p.area();
  const double uni = area_p + g.area() - inter;
  out.iou = inter / uni;

  const double r_in = p.right() < g.right() ? 1.0 : 0.0;   // p's right edge bounds overlap
  const double l_in = p.left() > g.left() ? 1.0 : 0.0;     // p's left edge bounds overlap
  const double b_in = p.bottom() < g.bottom() ? 1.0 : 0.0;
  const double t_in = p.top() > g.top() ? 1.0 : 0.0;
  const double diw_dcx = r_in - l_in;
  const double diw_dw = 0.5 * (r_in + l_in);
  const double dih_dcy = b_in - t_in;
  const double dih_dh = 0.5 * (b_in + t_in);

  // d(I/U) = (dI * (U + I) - I * dA) / U^2 with U = A + G - I.
  auto d = [&](double d_inter, double d_area) {
    return (d_inter * (uni + inter) - inter * d_area) / (uni * uni);
  };
  out.d_cx = d(ih * diw_dcx, 0.0);
  out.d_cy = d(iw * dih_dcy, 0.0);
  out.d_w = d(ih * diw_dw, p.h);
  out.d_h = d(iw * dih_dh, p.w);
  return out;
}

void require_finite(const FeatureMap& pred) {
  for (double v : pred.data()) {
    if (!std::isfinite(v)) throw InvalidArgument("loss: prediction contains NaN or infinity");
  }
}

void require_shape(const FeatureMap& pred, const HeadConfig& cfg) {
  if (pred.width() != cfg.grid.cells_x || pred.height() != cfg.grid.cells_y ||
      pred.channels() != cfg.channels()) {
    throw InvalidArgument("loss: prediction is " + std::to_string(pred.width()) + "x" +
                          std::to_string(pred.height()) + "x" +
                          std::to_string(pred.channels()) + ", head expects " +
                          std::to_string(cfg.grid.cells_x) + "x" +
                          std::to_string(cfg.grid.cells_y) + "x" +
                          std::to_string(cfg.channels()));
  }
}

int cell_of(double normalized, int cells) {
  const double v = normalized * cells;
  auto i = static_cast<int>(std::floor(v));
  if (v == static_cast<double>(i) && i > 0) --i;
  return std::clamp(i, 0, cells - 1);
}

ClassLoss class_loss(std::span<const double> logits, std::size_t label, const HeadConfig& cfg) {
  if (cfg.tree) return hierarchical_class_loss(logits, label, *cfg.tree);
  return softmax_cross_entropy(logits, label);
}

double class_probability(std::span<const double> logits, std::size_t label,
                         const HeadConfig& cfg, double p_object) {
  if (cfg.tree) return absolute_prob(grouped_softmax(logits, *cfg.tree), label, *cfg.tree, p_object);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return p_object * std::exp(logits[label] - mx) / sum;
}

void finish_total(LossBreakdown& l, const LossWeights& w) {
  l.total = w.coord * l.coord + w.object * l.objectness + w.noobject * l.noobject +
            w.class_ * l.class_;
}

}  // namespace

int HeadConfig::class_count() const {
  return tree ? static_cast<int>(tree->size()) : flat_classes;
}

void HeadConfig::validate() const {
  if (priors.empty()) throw InvalidArgument("head config needs at least one prior");
  for (const auto& p : priors) {
    if (!(p.pw > 0.0) || !(p.ph > 0.0)) throw InvalidArgument("head priors must be positive");
  }
  if (grid.cells_x <= 0 || grid.cells_y <= 0 || grid.stride <= 0) {
    throw InvalidArgument("head grid must be positive");
  }
  if (tree && flat_classes != 0) {
    throw InvalidArgument("head config sets both a flat class count and a word tree");
  }
  if (class_count() <= 0) throw InvalidArgument("head config needs at least one class");
}

int head_channels(int num_priors, int class_count) {
  if (num_priors <= 0 || class_count < 0) throw InvalidArgument("head_channels: bad arguments");
  return num_priors * (5 + class_count);
}

std::size_t slot_index(const HeadConfig& cfg, SlotRef s) {
  return (static_cast<std::size_t>(s.cell.y) * cfg.grid.cells_x + s.cell.x) * cfg.num_priors() +
         s.prior;
}

Assignment assign(std::span<const Box> gt, const HeadConfig& cfg) {
  cfg.validate();
  Assignment out;
  out.owner.assign(static_cast<std::size_t>(cfg.grid.cells_x) * cfg.grid.cells_y * cfg.num_priors(),
                   std::nullopt);
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const Box& b = gt[g];
    validate(b);
    if (b.cx < 0.0 || b.cx > 1.0 || b.cy < 0.0 || b.cy > 1.0) {
      throw InvalidArgument("assign: ground truth center outside the image");
    }
    if (!(b.w > 0.0) || !(b.h > 0.0)) throw InvalidArgument("assign: empty ground truth box");
    SlotRef slot{{cell_of(b.cx, cfg.grid.cells_x), cell_of(b.cy, cfg.grid.cells_y)}, 0};
    const AnchorPrior dims{b.w * cfg.grid.cells_x, b.h * cfg.grid.cells_y};
    double best = -1.0;
    for (int a = 0; a < cfg.num_priors(); ++a) {
      const double v = iou_wh(dims, cfg.priors[a]);
      if (v > best) {
        best = v;
        slot.prior = a;
      }
    }
    out.gt_slots.push_back(slot);
    auto& owner = out.owner[slot_index(cfg, slot)];
    if (owner) {
      out.collisions.push_back(g);
    } else {
      owner = g;
    }
  }
  return out;
}

ClassLoss softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw InvalidArgument("softmax_cross_entropy: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);
  ClassLoss out;
  out.value = log_z - logits[label];
  out.gradient.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.gradient[i] = std::exp(logits[i] - log_z) - (i == label ? 1.0 : 0.0);
  }
  return out;
}

ClassLoss hierarchical_class_loss(std::span<const double> logits, std::size_t label,
                                  const WordTree& tree) {
  if (logits.size() != tree.size()) {
    throw InvalidArgument("hierarchical_class_loss: logit count does not match tree");
  }
  if (label >= tree.size()) throw InvalidArgument("hierarchical_class_loss: unknown label");
  ClassLoss out;
  out.gradient.assign(logits.size(), 0.0);
  for (int cur = static_cast<int>(label); cur > 0; cur = tree.node(cur).parent) {
    const auto& grp = tree.groups()[tree.group_of(cur)];
    double mx = -INFINITY;
    for (std::size_t i = grp.begin; i < grp.end; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = grp.begin; i < grp.end; ++i) sum += std::exp(logits[i] - mx);
    const double log_z = mx + std::log(sum);
    out.value += log_z - logits[cur];
    for (std::size_t i = grp.begin; i < grp.end; ++i) {
      out.gradient[i] = std::exp(logits[i] - log_z) - (static_cast<int>(i) == cur ? 1.0 : 0.0);
    }
  }
  return out;
}

ScalarGrad classification_objectness_loss(double to) {
  const double s = sigmoid(to);
  if (s >= kAssumedClassificationIou) return {};
  const double diff = kAssumedClassificationIou - s;
  return {diff * diff, -2.0 * diff * dsigmoid_from(s)};
}

LossResult detection_loss(const FeatureMap& pred, std::span<const GroundTruth> gt,
                          const HeadConfig& cfg, const LossWeights& w) {
  cfg.validate();
  require_shape(pred, cfg);
  require_finite(pred);

  std::vector<Box> gt_norm;
  std::vector<Box> gt_grid;
  for (const auto& t : gt) {
    if (t.label >= static_cast<std::size_t>(cfg.class_count())) {
      throw InvalidArgument("detection_loss: ground truth label out of range");
    }
    gt_norm.push_back(t.box);
    gt_grid.push_back(normalized_to_grid(t.box, cfg.grid));
  }
  const Assignment asg = assign(gt_norm, cfg);

  LossResult res{{}, FeatureMap(pred.width(), pred.height(), pred.channels())};
  LossBreakdown& loss = res.loss;
  const int sc = cfg.slot_channels();
  const int ncls = cfg.class_count();

  for (int y = 0; y < cfg.grid.cells_y; ++y) {
    for (int x = 0; x < cfg.grid.cells_x; ++x) {
      for (int a = 0; a < cfg.num_priors(); ++a) {
        const int base = a * sc;
        RawPrediction raw{pred.at(x, y, base + kTx), pred.at(x, y, base + kTy),
                          pred.at(x, y, base + kTw), pred.at(x, y, base + kTh),
                          pred.at(x, y, base + kTo), {}};
        const DecodedBox dec = decode(raw, {x, y}, cfg.priors[a], cfg.grid);
        const double sx = sigmoid(raw.tx), sy = sigmoid(raw.ty), so = dec.objectness;
        auto grad = [&](int c) -> double& { return res.gradient.at(x, y, base + c); };

        const auto owner = asg.owner[slot_index(cfg, {{x, y}, a})];
        if (!owner) {
          double best = 0.0;
          for (const auto& g : gt_grid) best = std::max(best, iou_with_grad(dec.box, g).iou);
          if (best < w.ignore_iou) {
            loss.noobject += so * so;
            grad(kTo) += w.noobject * 2.0 * so * dsigmoid_from(so);
            ++loss.masks.noobject;
          } else {
            ++loss.masks.ignored;
          }
          continue;
        }

        ++loss.masks.responsible;
        const Box& g = gt_grid[*owner];
        const double ox = g.cx - x, oy = g.cy - y;
        const double tw_t = std::log(g.w / cfg.priors[a].pw);
        const double th_t = std::log(g.h / cfg.priors[a].ph);
        loss.coord += (sx - ox) * (sx - ox) + (sy - oy) * (sy - oy) +
                      (raw.tw - tw_t) * (raw.tw - tw_t) + (raw.th - th_t) * (raw.th - th_t);
        grad(kTx) += w.coord * 2.0 * (sx - ox) * dsigmoid_from(sx);
        grad(kTy) += w.coord * 2.0 * (sy - oy) * dsigmoid_from(sy);
        grad(kTw) += w.coord * 2.0 * (raw.tw - tw_t);
        grad(kTh) += w.coord * 2.0 * (raw.th - th_t);

        // The objectness target depends on the decoded box, so it feeds back
        // into the coordinate channels.
        const IouGrad ig = iou_with_grad(dec.box, g);
        const double diff = so - ig.iou;
        loss.objectness += diff * diff;
        grad(kTo) += w.object * 2.0 * diff * dsigmoid_from(so);
        const double k = -w.object * 2.0 * diff;
        grad(kTx) += k * ig.d_cx * dsigmoid_from(sx);
        grad(kTy) += k * ig.d_cy * dsigmoid_from(sy);
        grad(kTw) += k * ig.d_w * dec.box.w;
        grad(kTh) += k * ig.d_h * dec.box.h;

        std::vector<double> logits(ncls);
        for (int c = 0; c < ncls; ++c) logits[c] = pred.at(x, y, base + kFirstClass + c);
        const ClassLoss cl = class_loss(logits, gt[*owner].label, cfg);
        loss.class_ += cl.value;
        for (int c = 0; c < ncls; ++c) grad(kFirstClass + c) += w.class_ * cl.gradient[c];
        ++loss.masks.class_terms;
      }
    }
  }
  finish_total(loss, w);
  return res;
}

ClassificationResult classification_loss(const FeatureMap& pred, std::size_t label,
                                         const HeadConfig& cfg, const LossWeights& w) {
  cfg.validate();
  require_shape(pred, cfg);
  require_finite(pred);
  if (label >= static_cast<std::size_t>(cfg.class_count())) {
    throw InvalidArgument("classification_loss: unknown label");
  }
  const int sc = cfg.slot_channels();
  const int ncls = cfg.class_count();
  auto logits_at = [&](int x, int y, int a) {
    std::vector<double> logits(ncls);
    for (int c = 0; c < ncls; ++c) logits[c] = pred.at(x, y, a * sc + kFirstClass + c);
    return logits;
  };

  ClassificationResult out{{{}, FeatureMap(pred.width(), pred.height(), pred.channels())}, {}};
  double best = -1.0;
  for (int y = 0; y < cfg.grid.cells_y; ++y) {
    for (int x = 0; x < cfg.grid.cells_x; ++x) {
      for (int a = 0; a < cfg.num_priors(); ++a) {
        const double p = class_probability(logits_at(x, y, a), label, cfg,
                                           sigmoid(pred.at(x, y, a * sc + kTo)));
        if (p > best) {
          best = p;
          out.selected = {{x, y}, a};
        }
      }
    }
  }

  const auto [cell, a] = out.selected;
  LossBreakdown& loss = out.result.loss;
  FeatureMap& grad = out.result.gradient;
  const ClassLoss cl = class_loss(logits_at(cell.x, cell.y, a), label, cfg);
  loss.class_ = cl.value;
  for (int c = 0; c < ncls; ++c) grad.at(cell.x, cell.y, a * sc + kFirstClass + c) = w.class_ * cl.gradient[c];
  loss.masks.class_terms = 1;

  const ScalarGrad obj = classification_objectness_loss(pred.at(cell.x, cell.y, a * sc + kTo));
  loss.objectness = obj.value;
  grad.at(cell.x, cell.y, a * sc + kTo) = w.object * obj.grad;
  finish_total(loss, w);
  return out;
}

GradCheckReport check_gradient(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, std::span<const double> analytic,
                               const GradCheckOptions& opt) {
  if (x.size() != analytic.size()) throw InvalidArgument("check_gradient: size mismatch");
  GradCheckReport rep;
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + opt.step;
    const double up = f(probe);
    probe[i] = orig - opt.step;
    const double down = f(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
    ++rep.checked;
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    if (abs_err <= opt.abs_floor) continue;
    const double rel = abs_err / scale;
    rep.max_rel_error = std::max(rep.max_rel_error, rel);
    if (rel > opt.rel_tol) ++rep.failures;
  }
  return rep;
}

}  // namespace detkit
