#include "detkit/shapes.hpp"

#include <sstream>

#include "detkit/error.hpp"

namespace detkit {

namespace {

int read_int(std::istringstream& ls, const char* what, const std::string& where) {
  int v;
  if (!(ls >> v)) throw DataError(std::string("expected ") + what, where);
  return v;
}

}  // namespace

std::string_view kind_name(LayerSpec::Kind k) {
  switch (k) {
    case LayerSpec::Kind::kConv: return "conv";
    case LayerSpec::Kind::kMaxPool: return "maxpool";
    case LayerSpec::Kind::kAvgPool: return "avgpool";
    case LayerSpec::Kind::kReorg: return "reorg";
    case LayerSpec::Kind::kRoute: return "route";
    case LayerSpec::Kind::kSoftmax: return "softmax";
  }
  return "?";
}

std::vector<LayerSpec> parse_layer_spec(std::string_view text, const std::string& source) {
  std::vector<LayerSpec> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    LayerSpec l;
    if (kind == "conv") {
      l.kind = LayerSpec::Kind::kConv;
      l.filters = read_int(ls, "filters", where);
      l.size = read_int(ls, "size", where);
      l.stride = read_int(ls, "stride", where);
      if (l.filters <= 0 || l.size <= 0 || l.stride <= 0) {
        throw DataError("conv parameters must be positive", where);
      }
    } else if (kind == "maxpool") {
      l.kind = LayerSpec::Kind::kMaxPool;
      l.size = read_int(ls, "size", where);
      l.stride = read_int(ls, "stride", where);
      if (l.size <= 0 || l.stride <= 0) throw DataError("maxpool parameters must be positive", where);
    } else if (kind == "avgpool") {
      l.kind = LayerSpec::Kind::kAvgPool;
    } else if (kind == "reorg") {
      l.kind = LayerSpec::Kind::kReorg;
      l.stride = read_int(ls, "stride", where);
      if (l.stride <= 0) throw DataError("reorg stride must be positive", where);
    } else if (kind == "route") {
      l.kind = LayerSpec::Kind::kRoute;
      int v;
      while (ls >> v) l.sources.push_back(v);
      if (l.sources.empty()) throw DataError("route needs at least one layer", where);
    } else if (kind == "softmax") {
      l.kind = LayerSpec::Kind::kSoftmax;
    } else {
      throw DataError("unknown layer type '" + kind + "'", where);
    }
    std::string extra;
    ls.clear();
    if (ls >> extra) throw DataError("trailing text '" + extra + "'", where);
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<TensorShape> shape_infer(const std::vector<LayerSpec>& layers, TensorShape input) {
  if (input.width <= 0 || input.height <= 0 || input.channels <= 0) {
    throw InvalidArgument("shape_infer: input shape must be positive");
  }
  std::vector<TensorShape> out;
  out.reserve(layers.size());
  TensorShape cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(kind_name(l.kind)) + ")";
    switch (l.kind) {
      case LayerSpec::Kind::kConv: {
        const int pad = l.size / 2;
        cur.width = (cur.width + 2 * pad - l.size) / l.stride + 1;
        cur.height = (cur.height + 2 * pad - l.size) / l.stride + 1;
        cur.channels = l.filters;
        break;
      }
      case LayerSpec::Kind::kMaxPool:
        if (l.stride > 1) {
          if (cur.width % l.stride != 0 || cur.height % l.stride != 0) {
            throw InvalidArgument(where + ": " + std::to_string(cur.width) + "x" +
                                  std::to_string(cur.height) + " not divisible by stride " +
                                  std::to_string(l.stride));
          }
          cur.width /= l.stride;
          cur.height /= l.stride;
        }
        break;
      case LayerSpec::Kind::kAvgPool:
        cur.width = 1;
        cur.height = 1;
        break;
      case LayerSpec::Kind::kReorg:
        if (cur.width % l.stride != 0 || cur.height % l.stride != 0) {
          throw InvalidArgument(where + ": spatial size not divisible by stride");
        }
        cur.width /= l.stride;
        cur.height /= l.stride;
        cur.channels *= l.stride * l.stride;
        break;
      case LayerSpec::Kind::kRoute: {
        TensorShape acc;
        for (int src : l.sources) {
          const long idx = src < 0 ? static_cast<long>(i) + src : src;
          if (idx < 0 || idx >= static_cast<long>(i)) {
            throw InvalidArgument(where + ": route source " + std::to_string(src) + " out of range");
          }
          const TensorShape& s = out[idx];
          if (acc.channels == 0) {
            acc = s;
          } else {
            if (s.width != acc.width || s.height != acc.height) {
              throw InvalidArgument(where + ": route inputs differ in spatial size");
            }
            acc.channels += s.channels;
          }
        }
        cur = acc;
        break;
      }
      case LayerSpec::Kind::kSoftmax:
        break;
    }
    if (cur.width <= 0 || cur.height <= 0) throw InvalidArgument(where + ": empty output");
    out.push_back(cur);
  }
  return out;
}

}  // namespace detkit
