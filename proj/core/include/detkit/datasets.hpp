#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "detkit/anchors.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

struct LabeledBox {
  Box box;  // normalized to [0,1] by image size
  std::string class_;
  bool difficult = false;
  // Tree node / synset assigned by a label merge, when one was applied.
  std::optional<std::string> synset;

  bool operator==(const LabeledBox&) const = default;
};

struct DetectionLabels {
  std::vector<LabeledBox> boxes;
  bool operator==(const DetectionLabels&) const = default;
};

struct ClassLabel {
  std::string class_;
  std::optional<std::string> synset;
  bool operator==(const ClassLabel&) const = default;
};

struct Sample {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::variant<DetectionLabels, ClassLabel> labels;

  bool is_detection() const { return std::holds_alternative<DetectionLabels>(labels); }
  const DetectionLabels& detection() const { return std::get<DetectionLabels>(labels); }
  const ClassLabel& classification() const { return std::get<ClassLabel>(labels); }

  bool operator==(const Sample&) const = default;
};

// Throws DataError if dimensions are non-positive or any box leaves [0,1].
void validate(const Sample& s);

// Pascal VOC annotation XML. Pixel corners are 1-based inclusive; a box
// spanning the full image maps to (0.5, 0.5, 1, 1).
Sample parse_voc(std::string_view xml, const std::string& source = "<voc>");

// COCO instances JSON. Crowd annotations are kept with difficult = true.
std::vector<Sample> parse_coco(std::string_view json, const std::string& source = "<coco>");

// One compact JSON object per Sample:
//   {"height":H,"image_id":"...","kind":"detection","objects":[
//     {"box":[cx,cy,w,h],"class":"dog","difficult":false,"synset":"n..."}],
//    "width":W}
//   {"class":"...","height":H,"image_id":"...","kind":"classification",
//    "synset":"n...","width":W}
// Keys are sorted and doubles use shortest round-trip formatting.
std::string to_json_line(const Sample& s);
Sample sample_from_json_line(std::string_view line, const std::string& source = "<jsonl>");
std::string to_jsonl(std::span<const Sample> samples);
std::vector<Sample> parse_jsonl(std::string_view text, const std::string& source = "<jsonl>");

// ImageNet-style classification list: `<image_id> <synset> <width> <height>`.
std::vector<Sample> parse_classification_list(std::string_view text,
                                              const std::string& source = "<labels>");

// Box dimensions for clustering. Difficult objects are skipped unless asked.
std::vector<AnchorPrior> box_dimensions(std::span<const Sample> samples,
                                        bool include_difficult = false);

struct MixConfig {
  double ratio_cls_to_det = 4.0;
  uint64_t seed = 0;
  std::size_t epoch_size = 0;
};

enum class SampleSource { kDetection, kClassification };

struct Draw {
  SampleSource source;
  std::size_t index;  // into the matching input list
  bool operator==(const Draw&) const = default;
};

// Number of detection draws in an epoch: round(epoch_size / (1 + ratio)).
std::size_t detection_draws(const MixConfig& cfg);

// One epoch of draws. Detection samples are drawn with replacement; the
// classification list is walked in shuffled passes. Order is shuffled.
std::vector<Draw> mix_stream(std::span<const Sample> det, std::span<const Sample> cls,
                             const MixConfig& cfg);

struct ScaleSchedule {
  int min_size = 320;
  int max_size = 608;
  int step = 32;
  int period_batches = 10;
  uint64_t seed = 0;

  std::vector<int> sizes() const;
};

void validate(const ScaleSchedule& s);

// Input resolution for a batch. Pure in (schedule, batch_index); constant
// within each window of period_batches.
int next_size(const ScaleSchedule& s, uint64_t batch_index);

}  // namespace detkit
