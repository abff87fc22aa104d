#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace detkit {

// One row of a Darknet-style architecture listing.
struct LayerSpec {
  enum class Kind { kConv, kMaxPool, kAvgPool, kReorg, kRoute, kSoftmax };
  Kind kind = Kind::kConv;
  int filters = 0;  // conv
  int size = 0;     // conv, maxpool
  int stride = 1;   // conv, maxpool, reorg
  std::vector<int> sources;  // route: negative = relative to this layer
};

struct TensorShape {
  int width = 0;
  int height = 0;
  int channels = 0;
  bool operator==(const TensorShape&) const = default;
};

// Text format, one layer per line, '#' comments:
//   conv <filters> <size> <stride>
//   maxpool <size> <stride>
//   avgpool            (global)
//   reorg <stride>
//   route <layer> [<layer> ...]   (channel concat; negative = relative)
//   softmax
std::vector<LayerSpec> parse_layer_spec(std::string_view text,
                                        const std::string& source = "<spec>");

// Output shape of every layer. Convolutions use pad = size / 2, so 3x3 and
// 1x1 stride-1 convolutions keep the spatial size; strided pooling must
// divide the input exactly.
std::vector<TensorShape> shape_infer(const std::vector<LayerSpec>& layers, TensorShape input);

std::string_view kind_name(LayerSpec::Kind k);

}  // namespace detkit
