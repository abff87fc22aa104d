#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "detkit/geometry.hpp"
#include "detkit/wordtree.hpp"

namespace detkit {

// Class head: either a flat softmax over `flat_classes` or grouped softmax
// over a WordTree (one logit per tree node).
struct HeadConfig {
  std::vector<AnchorPrior> priors;  // grid units
  GridGeometry grid;
  int flat_classes = 0;
  std::shared_ptr<const WordTree> tree;

  int num_priors() const { return static_cast<int>(priors.size()); }
  int class_count() const;
  int slot_channels() const { return 5 + class_count(); }
  int channels() const { return num_priors() * slot_channels(); }
  // Throws InvalidArgument on inconsistent configuration.
  void validate() const;
};

// Channels of the head: num_priors * (5 + classes).
int head_channels(int num_priors, int class_count);

// Channel offsets inside one prior's block of the prediction map.
enum SlotChannel : int { kTx = 0, kTy = 1, kTw = 2, kTh = 3, kTo = 4, kFirstClass = 5 };

// Loss weights. Defaults are reimplementation conventions, not published
// values.
struct LossWeights {
  double coord = 1.0;
  double object = 5.0;
  double noobject = 1.0;
  double class_ = 1.0;
  double ignore_iou = 0.6;
};

struct MaskSummary {
  std::size_t responsible = 0;   // slots regressing a ground truth
  std::size_t noobject = 0;      // slots penalized toward objectness 0
  std::size_t ignored = 0;       // slots above the ignore IOU, unpenalized
  std::size_t class_terms = 0;   // slots contributing class loss
};

// Unweighted parts; total = coord*w.coord + objectness*w.object
// + noobject*w.noobject + class_*w.class_.
struct LossBreakdown {
  double coord = 0.0;
  double objectness = 0.0;
  double noobject = 0.0;
  double class_ = 0.0;
  double total = 0.0;
  MaskSummary masks;
};

struct LossResult {
  LossBreakdown loss;
  FeatureMap gradient;  // d total / d prediction, same shape as the input
};

struct SlotRef {
  Cell cell;
  int prior = 0;
  bool operator==(const SlotRef&) const = default;
};

struct Assignment {
  std::vector<SlotRef> gt_slots;                 // per ground truth
  std::vector<std::optional<std::size_t>> owner;  // per slot: responsible gt
  std::vector<std::size_t> collisions;           // gts whose slot was already taken
};

// Flattened slot index: (y * cells_x + x) * num_priors + prior.
std::size_t slot_index(const HeadConfig& cfg, SlotRef s);

// Each normalized GT goes to the cell containing its center (a center on an
// interior cell boundary goes to the lower cell) and the prior with the
// highest iou_wh to its size (ties: lowest prior). The first GT to claim a
// slot owns it; later ones are recorded as collisions.
Assignment assign(std::span<const Box> gt, const HeadConfig& cfg);

struct GroundTruth {
  Box box;             // normalized
  std::size_t label;   // flat class index or tree node index
};

// Full detection loss and its analytic gradient. Responsible slots pay
// squared error on (sigmoid(tx), sigmoid(ty), tw, th), squared error of
// sigmoid(to) toward IOU(decoded, gt) and the class loss; other slots whose
// best IOU to any GT is below weights.ignore_iou pay sigmoid(to)^2.
LossResult detection_loss(const FeatureMap& pred, std::span<const GroundTruth> gt,
                          const HeadConfig& cfg, const LossWeights& weights = {});

// Classification-only image: the slot with the highest absolute probability
// for `label` receives the hierarchical class loss and the objectness term
// of classification_objectness_loss(); everything else is masked.
struct ClassificationResult {
  LossResult result;
  SlotRef selected;
};
ClassificationResult classification_loss(const FeatureMap& pred, std::size_t label,
                                         const HeadConfig& cfg, const LossWeights& weights = {});

// Objectness penalty for the selected box of a classification image, which
// is assumed to overlap the unseen ground truth by at least 0.3 IOU: the
// target is max(current objectness, 0.3), so only objectness below 0.3 is
// pushed up. Returns the unweighted loss and d loss / d to.
struct ScalarGrad {
  double value = 0.0;
  double grad = 0.0;
};
inline constexpr double kAssumedClassificationIou = 0.3;
ScalarGrad classification_objectness_loss(double to);

// -log of the product of conditionals on the root->label path. Only groups
// on that path carry gradient; groups below the label are untouched.
struct ClassLoss {
  double value = 0.0;
  std::vector<double> gradient;  // over logits
};
ClassLoss hierarchical_class_loss(std::span<const double> logits, std::size_t label,
                                  const WordTree& tree);

// Standard softmax cross-entropy; reference for the flat head.
ClassLoss softmax_cross_entropy(std::span<const double> logits, std::size_t label);

// Finite-difference check of an analytic gradient.
struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;  // over entries above the absolute floor
  bool passed() const { return failures == 0; }
};

// An entry passes when |analytic - numeric| <= abs_floor or the relative
// error |a - n| / max(|a|, |n|) <= rel_tol.
struct GradCheckOptions {
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_floor = 1e-7;
};

GradCheckReport check_gradient(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x, std::span<const double> analytic,
                               const GradCheckOptions& opt = {});

}  // namespace detkit
