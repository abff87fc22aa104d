#include "detkit/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "detkit/error.hpp"

namespace detkit {

namespace {

bool finite(double v) { return std::isfinite(v); }

void require_positive_dims(const AnchorPrior& p, const char* what) {
  if (!(p.pw > 0.0) || !(p.ph > 0.0) || !finite(p.pw) || !finite(p.ph)) {
    throw InvalidArgument(std::string(what) + ": dimensions must be positive and finite");
  }
}

void require_grid(const GridGeometry& g) {
  if (g.cells_x <= 0 || g.cells_y <= 0 || g.stride <= 0) {
    throw InvalidArgument("grid geometry must have positive cells and stride");
  }
}

void require_cell(Cell cell, const GridGeometry& g) {
  if (cell.x < 0 || cell.y < 0 || cell.x >= g.cells_x || cell.y >= g.cells_y) {
    throw InvalidArgument("cell (" + std::to_string(cell.x) + "," +
                          std::to_string(cell.y) + ") outside grid");
  }
}

// Places `offset` in (0,1) relative to `origin` so that origin + offset is
// strictly inside (origin, origin + 1) after rounding.
double inside_cell(double origin, double offset) {
  const double v = origin + offset;
  const double lo = std::nextafter(origin, origin + 1.0);
  const double hi = std::nextafter(origin + 1.0, origin);
  return std::clamp(v, lo, hi);
}

uint64_t byteswap64(uint64_t v) {
  v = ((v & 0x00000000FFFFFFFFull) << 32) | ((v & 0xFFFFFFFF00000000ull) >> 32);
  v = ((v & 0x0000FFFF0000FFFFull) << 16) | ((v & 0xFFFF0000FFFF0000ull) >> 16);
  v = ((v & 0x00FF00FF00FF00FFull) << 8) | ((v & 0xFF00FF00FF00FF00ull) >> 8);
  return v;
}

}  // namespace

Corners to_corners(const Box& b) {
  return {b.left(), b.top(), b.right(), b.bottom()};
}

Box from_corners(const Corners& c) {
  return {(c.x0 + c.x1) / 2.0, (c.y0 + c.y1) / 2.0, c.x1 - c.x0, c.y1 - c.y0};
}

void validate(const Box& b) {
  if (!finite(b.cx) || !finite(b.cy) || !finite(b.w) || !finite(b.h)) {
    throw InvalidArgument("box has non-finite field");
  }
  if (b.w < 0.0 || b.h < 0.0) {
    throw InvalidArgument("box has negative width or height");
  }
}

GridGeometry grid_for_input(int input_size, int stride) {
  if (stride <= 0 || input_size <= 0 || input_size % stride != 0) {
    throw InvalidArgument("input size " + std::to_string(input_size) +
                          " is not a positive multiple of stride " +
                          std::to_string(stride));
  }
  return {input_size / stride, input_size / stride, stride};
}

FeatureMap::FeatureMap(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw InvalidArgument("feature map dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

FeatureMap::FeatureMap(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw InvalidArgument("feature map dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw InvalidArgument("feature map data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(width) + "x" +
                          std::to_string(height) + "x" + std::to_string(channels));
  }
}

std::string to_bytes(std::span<const double> values) {
  std::string out(values.size() * sizeof(double), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    uint64_t bits = std::bit_cast<uint64_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    std::memcpy(out.data() + i * sizeof(double), &bits, sizeof(bits));
  }
  return out;
}

std::vector<double> doubles_from_bytes(std::string_view bytes) {
  if (bytes.size() % sizeof(double) != 0) {
    throw DataError("binary length " + std::to_string(bytes.size()) +
                    " is not a multiple of 8");
  }
  std::vector<double> out(bytes.size() / sizeof(double));
  for (std::size_t i = 0; i < out.size(); ++i) {
    uint64_t bits;
    std::memcpy(&bits, bytes.data() + i * sizeof(double), sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

FeatureMap feature_map_from_bytes(std::string_view bytes, int width, int height,
                                  int channels) {
  auto values = doubles_from_bytes(bytes);
  const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
  if (values.size() != expected) {
    throw DataError("feature map holds " + std::to_string(values.size()) +
                    " values, expected " + std::to_string(expected));
  }
  return FeatureMap(width, height, channels, std::move(values));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidArgument("logit: argument must lie strictly inside (0,1)");
  }
  return std::log(p) - std::log1p(-p);
}

double iou(const Box& a, const Box& b) {
  validate(a);
  validate(b);
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a == 0.0 && area_b == 0.0) throw DegenerateBoxes();

  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  // Areas from the same corners as the intersection, so identical boxes give exactly 1.
  const double inter = iw * ih;
  const double uni = (a.right() - a.left()) * (a.bottom() - a.top()) +
                     (b.right() - b.left()) * (b.bottom() - b.top()) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_wh(const AnchorPrior& a, const AnchorPrior& b) {
  require_positive_dims(a, "iou_wh");
  require_positive_dims(b, "iou_wh");
  const double inter = std::min(a.pw, b.pw) * std::min(a.ph, b.ph);
  return inter / (a.area() + b.area() - inter);
}

DecodedBox decode(const RawPrediction& p, Cell cell, const AnchorPrior& prior,
                  const GridGeometry& g) {
  require_grid(g);
  require_cell(cell, g);
  require_positive_dims(prior, "decode");
  if (!finite(p.tx) || !finite(p.ty) || !finite(p.tw) || !finite(p.th) || !finite(p.to)) {
    throw InvalidArgument("decode: non-finite raw prediction");
  }
  DecodedBox out;
  out.box.cx = inside_cell(cell.x, sigmoid(p.tx));
  out.box.cy = inside_cell(cell.y, sigmoid(p.ty));
  out.box.w = prior.pw * std::exp(p.tw);
  out.box.h = prior.ph * std::exp(p.th);
  out.objectness = sigmoid(p.to);
  return out;
}

RawPrediction encode(const Box& target, Cell cell, const AnchorPrior& prior,
                     const GridGeometry& g) {
  require_grid(g);
  require_cell(cell, g);
  require_positive_dims(prior, "encode");
  validate(target);
  if (!(target.w > 0.0) || !(target.h > 0.0)) {
    throw InvalidArgument("encode: target width and height must be positive");
  }
  const double ox = target.cx - cell.x;
  const double oy = target.cy - cell.y;
  if (!(ox > 0.0 && ox < 1.0) || !(oy > 0.0 && oy < 1.0)) {
    throw TargetOutsideCell("encode: target center (" + std::to_string(target.cx) + "," +
                            std::to_string(target.cy) + ") not strictly inside cell (" +
                            std::to_string(cell.x) + "," + std::to_string(cell.y) + ")");
  }
  RawPrediction t;
  t.tx = logit(ox);
  t.ty = logit(oy);
  t.tw = std::log(target.w / prior.pw);
  t.th = std::log(target.h / prior.ph);
  return t;
}

Box grid_to_normalized(const Box& b, const GridGeometry& g) {
  require_grid(g);
  return {b.cx / g.cells_x, b.cy / g.cells_y, b.w / g.cells_x, b.h / g.cells_y};
}

Box normalized_to_grid(const Box& b, const GridGeometry& g) {
  require_grid(g);
  return {b.cx * g.cells_x, b.cy * g.cells_y, b.w * g.cells_x, b.h * g.cells_y};
}

FeatureMap reorg(const FeatureMap& f, int block) {
  if (block <= 0) throw InvalidArgument("reorg: block must be positive");
  if (f.width() % block != 0 || f.height() % block != 0) {
    throw InvalidArgument("reorg: " + std::to_string(f.width()) + "x" +
                          std::to_string(f.height()) + " not divisible by block " +
                          std::to_string(block));
  }
  const int ow = f.width() / block;
  const int oh = f.height() / block;
  const int oc = f.channels() * block * block;
  FeatureMap out(ow, oh, oc);
  for (int y = 0; y < f.height(); ++y) {
    const int oy = y / block, dy = y % block;
    for (int x = 0; x < f.width(); ++x) {
      const int ox = x / block, dx = x % block;
      for (int c = 0; c < f.channels(); ++c) {
        out.at(ox, oy, c * block * block + dy * block + dx) = f.at(x, y, c);
      }
    }
  }
  return out;
}

FeatureMap reorg_inverse(const FeatureMap& f, int block) {
  if (block <= 0) throw InvalidArgument("reorg_inverse: block must be positive");
  const int bb = block * block;
  if (f.channels() % bb != 0) {
    throw InvalidArgument("reorg_inverse: channels not divisible by block^2");
  }
  const int c_in = f.channels() / bb;
  FeatureMap out(f.width() * block, f.height() * block, c_in);
  for (int oy = 0; oy < f.height(); ++oy) {
    for (int ox = 0; ox < f.width(); ++ox) {
      for (int c = 0; c < c_in; ++c) {
        for (int dy = 0; dy < block; ++dy) {
          for (int dx = 0; dx < block; ++dx) {
            out.at(ox * block + dx, oy * block + dy, c) = f.at(ox, oy, c * bb + dy * block + dx);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace detkit
