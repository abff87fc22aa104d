#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace detkit {

// Center-format rectangle. Units depend on context: normalized [0,1] image
// coordinates for annotations, grid-cell units for decoded predictions.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double left() const { return cx - w / 2.0; }
  double right() const { return cx + w / 2.0; }
  double top() const { return cy - h / 2.0; }
  double bottom() const { return cy + h / 2.0; }

  bool operator==(const Box&) const = default;
};

struct Corners {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
};

Corners to_corners(const Box& b);
Box from_corners(const Corners& c);

// Throws InvalidArgument unless all fields are finite and w, h >= 0.
void validate(const Box& b);

struct GridGeometry {
  int cells_x = 13;
  int cells_y = 13;
  int stride = 32;

  int input_width() const { return cells_x * stride; }
  int input_height() const { return cells_y * stride; }

  bool operator==(const GridGeometry&) const = default;
};

// Square grid for a square input of `input_size` pixels.
GridGeometry grid_for_input(int input_size, int stride = 32);

struct Cell {
  int x = 0;
  int y = 0;

  bool operator==(const Cell&) const = default;
};

// Width/height template refined by the network. Strictly positive.
struct AnchorPrior {
  double pw = 1.0;
  double ph = 1.0;

  double area() const { return pw * ph; }
  bool operator==(const AnchorPrior&) const = default;
};

// Per-anchor raw outputs of the detection head.
struct RawPrediction {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
  double to = 0.0;
  std::vector<double> class_logits;
};

struct DecodedBox {
  Box box;  // grid units
  double objectness = 0.0;
};

// Dense H x W x C tensor, channel-fastest:
// index = (y * width + x) * channels + c.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int width, int height, int channels, double fill = 0.0);
  FeatureMap(int width, int height, int channels, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Little-endian IEEE-754 binary64 dump of the data vector (no header).
std::string to_bytes(std::span<const double> values);
std::vector<double> doubles_from_bytes(std::string_view bytes);
FeatureMap feature_map_from_bytes(std::string_view bytes, int width, int height,
                                  int channels);

double sigmoid(double x);
// Inverse of sigmoid; throws InvalidArgument unless p is in (0, 1).
double logit(double p);

// Intersection over union. One zero-area box against a non-degenerate one
// yields 0; two zero-area boxes throw DegenerateBoxes.
double iou(const Box& a, const Box& b);

// IOU of two boxes sharing a center. Throws on non-positive dimensions.
double iou_wh(const AnchorPrior& a, const AnchorPrior& b);

// b = (sigmoid(tx) + cx, sigmoid(ty) + cy, pw e^tw, ph e^th), objectness
// sigmoid(to). The center is kept strictly inside the source cell even when
// sigmoid saturates in floating point.
DecodedBox decode(const RawPrediction& p, Cell cell, const AnchorPrior& prior,
                  const GridGeometry& g);

// Inverse of decode() for the four coordinates; `to` and logits are left 0.
RawPrediction encode(const Box& target, Cell cell, const AnchorPrior& prior,
                     const GridGeometry& g);

Box grid_to_normalized(const Box& b, const GridGeometry& g);
Box normalized_to_grid(const Box& b, const GridGeometry& g);

// Space-to-depth. Output channel = in_channel * block^2 + dy * block + dx.
FeatureMap reorg(const FeatureMap& f, int block);
FeatureMap reorg_inverse(const FeatureMap& f, int block);

}  // namespace detkit
