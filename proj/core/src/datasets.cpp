#include "detkit/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "detkit/error.hpp"
#include "detkit/random.hpp"

namespace detkit {

namespace {

using nlohmann::json;
namespace pt = boost::property_tree;

// Slack for representation error when normalizing exact pixel boxes.
constexpr double kUnitSlack = 1e-12;

std::string stem(const std::string& file_name) {
  auto slash = file_name.find_last_of("/\\");
  std::string base = slash == std::string::npos ? file_name : file_name.substr(slash + 1);
  auto dot = base.find_last_of('.');
  return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

void check_unit_box(const Box& b, const std::string& where) {
  const bool ok = std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
                  std::isfinite(b.h) && b.w > 0.0 && b.h > 0.0 && b.w <= 1.0 &&
                  b.h <= 1.0 && b.left() >= -kUnitSlack && b.top() >= -kUnitSlack &&
                  b.right() <= 1.0 + kUnitSlack && b.bottom() <= 1.0 + kUnitSlack;
  if (!ok) throw DataError("normalized box leaves the unit square or is empty", where);
}

double voc_coord(const pt::ptree& bndbox, const char* key, const std::string& where) {
  auto v = bndbox.get_optional<std::string>(key);
  if (!v) throw DataError(std::string("missing bndbox/") + key, where);
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used == 0 || !std::isfinite(d)) throw std::invalid_argument("");
    return d;
  } catch (const std::exception&) {
    throw DataError(std::string("bad number in bndbox/") + key + ": '" + *v + "'", where);
  }
}

json box_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

Box box_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must be [cx,cy,w,h]", where);
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError("box entries must be numbers", where);
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'", where);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + key + "' has the wrong type", where);
  }
}

}  // namespace

void validate(const Sample& s) {
  if (s.width <= 0 || s.height <= 0) {
    throw DataError("image dimensions must be positive", s.image_id);
  }
  if (s.is_detection()) {
    const auto& boxes = s.detection().boxes;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      check_unit_box(boxes[i].box, s.image_id + " object " + std::to_string(i));
    }
  } else if (s.classification().class_.empty()) {
    throw DataError("classification sample has an empty label", s.image_id);
  }
}

Sample parse_voc(std::string_view xml, const std::string& source) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw DataError(std::string("malformed XML: ") + e.message(), source);
  }
  auto ann = tree.get_child_optional("annotation");
  if (!ann) throw DataError("missing <annotation> root", source);

  Sample s;
  s.image_id = stem(ann->get<std::string>("filename", ""));
  if (s.image_id.empty()) s.image_id = stem(source);
  try {
    s.width = ann->get<int>("size.width");
    s.height = ann->get<int>("size.height");
  } catch (const pt::ptree_error&) {
    throw DataError("missing or invalid <size>", source);
  }
  if (s.width <= 0 || s.height <= 0) throw DataError("image size must be positive", source);

  DetectionLabels det;
  int index = 0;
  for (const auto& [tag, obj] : *ann) {
    if (tag != "object") continue;
    const std::string where = source + " object " + std::to_string(index++);
    LabeledBox lb;
    lb.class_ = obj.get<std::string>("name", "");
    if (lb.class_.empty()) throw DataError("object has no <name>", where);
    lb.difficult = obj.get<int>("difficult", 0) != 0;
    auto bnd = obj.get_child_optional("bndbox");
    if (!bnd) throw DataError("object has no <bndbox>", where);
    const double xmin = voc_coord(*bnd, "xmin", where);
    const double ymin = voc_coord(*bnd, "ymin", where);
    const double xmax = voc_coord(*bnd, "xmax", where);
    const double ymax = voc_coord(*bnd, "ymax", where);
    if (xmax <= xmin || ymax <= ymin) throw DataError("box has xmax<=xmin or ymax<=ymin", where);
    if (xmin < 1.0 || ymin < 1.0 || xmax > s.width || ymax > s.height) {
      throw DataError("box exceeds image bounds", where);
    }
    const Corners px{xmin - 1.0, ymin - 1.0, xmax, ymax};
    lb.box = {(px.x0 + px.x1) / 2.0 / s.width, (px.y0 + px.y1) / 2.0 / s.height,
              (px.x1 - px.x0) / s.width, (px.y1 - px.y0) / s.height};
    check_unit_box(lb.box, where);
    det.boxes.push_back(std::move(lb));
  }
  s.labels = std::move(det);
  return s;
}

std::vector<Sample> parse_coco(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), source);
  }
  if (!doc.is_object()) throw DataError("COCO document must be an object", source);
  for (const char* key : {"images", "annotations", "categories"}) {
    if (!doc.contains(key) || !doc[key].is_array()) {
      throw DataError(std::string("missing array '") + key + "'", source);
    }
  }

  std::map<int64_t, std::string> categories;
  for (const auto& c : doc["categories"]) {
    categories[required<int64_t>(c, "id", source)] = required<std::string>(c, "name", source);
  }

  std::vector<Sample> samples;
  std::map<int64_t, std::size_t> by_id;
  for (const auto& im : doc["images"]) {
    const auto id = required<int64_t>(im, "id", source);
    Sample s;
    auto fn = im.find("file_name");
    s.image_id = fn != im.end() && fn->is_string() ? stem(fn->get<std::string>())
                                                   : std::to_string(id);
    s.width = required<int>(im, "width", source);
    s.height = required<int>(im, "height", source);
    if (s.width <= 0 || s.height <= 0) {
      throw DataError("image " + std::to_string(id) + " has non-positive size", source);
    }
    s.labels = DetectionLabels{};
    if (!by_id.emplace(id, samples.size()).second) {
      throw DataError("duplicate image id " + std::to_string(id), source);
    }
    samples.push_back(std::move(s));
  }

  std::size_t index = 0;
  for (const auto& a : doc["annotations"]) {
    const std::string where = source + " annotation " + std::to_string(index++);
    const auto image_id = required<int64_t>(a, "image_id", where);
    const auto cat_id = required<int64_t>(a, "category_id", where);
    auto im = by_id.find(image_id);
    if (im == by_id.end()) throw DataError("unknown image id " + std::to_string(image_id), where);
    auto cat = categories.find(cat_id);
    if (cat == categories.end()) {
      throw DataError("unknown category id " + std::to_string(cat_id), where);
    }
    const auto bbox = required<std::vector<double>>(a, "bbox", where);
    if (bbox.size() != 4) throw DataError("bbox must have 4 entries", where);
    Sample& s = samples[im->second];
    const double x = bbox[0], y = bbox[1], w = bbox[2], h = bbox[3];
    if (!(w > 0.0) || !(h > 0.0)) throw DataError("bbox has non-positive size", where);
    if (x < 0.0 || y < 0.0 || x + w > s.width || y + h > s.height) {
      throw DataError("bbox exceeds image bounds", where);
    }
    LabeledBox lb;
    lb.class_ = cat->second;
    lb.difficult = a.value("iscrowd", 0) != 0;
    lb.box = {(x + w / 2.0) / s.width, (y + h / 2.0) / s.height, w / s.width, h / s.height};
    check_unit_box(lb.box, where);
    std::get<DetectionLabels>(s.labels).boxes.push_back(std::move(lb));
  }
  return samples;
}

std::string to_json_line(const Sample& s) {
  json j;
  j["image_id"] = s.image_id;
  j["width"] = s.width;
  j["height"] = s.height;
  if (s.is_detection()) {
    j["kind"] = "detection";
    json objects = json::array();
    for (const auto& lb : s.detection().boxes) {
      json o;
      o["box"] = box_json(lb.box);
      o["class"] = lb.class_;
      o["difficult"] = lb.difficult;
      if (lb.synset) o["synset"] = *lb.synset;
      objects.push_back(std::move(o));
    }
    j["objects"] = std::move(objects);
  } else {
    j["kind"] = "classification";
    j["class"] = s.classification().class_;
    if (s.classification().synset) j["synset"] = *s.classification().synset;
  }
  return j.dump();
}

Sample sample_from_json_line(std::string_view line, const std::string& source) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what(), source);
  }
  if (!j.is_object()) throw DataError("sample must be a JSON object", source);
  Sample s;
  s.image_id = required<std::string>(j, "image_id", source);
  s.width = required<int>(j, "width", source);
  s.height = required<int>(j, "height", source);
  const auto kind = required<std::string>(j, "kind", source);
  if (kind == "detection") {
    DetectionLabels det;
    auto objs = j.find("objects");
    if (objs == j.end() || !objs->is_array()) throw DataError("missing 'objects' array", source);
    for (const auto& o : *objs) {
      LabeledBox lb;
      lb.box = box_from_json(o.value("box", json()), source);
      lb.class_ = required<std::string>(o, "class", source);
      lb.difficult = o.value("difficult", false);
      if (o.contains("synset")) lb.synset = required<std::string>(o, "synset", source);
      det.boxes.push_back(std::move(lb));
    }
    s.labels = std::move(det);
  } else if (kind == "classification") {
    ClassLabel c;
    c.class_ = required<std::string>(j, "class", source);
    if (j.contains("synset")) c.synset = required<std::string>(j, "synset", source);
    s.labels = std::move(c);
  } else {
    throw DataError("unknown sample kind '" + kind + "'", source);
  }
  validate(s);
  return s;
}

std::string to_jsonl(std::span<const Sample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json_line(s);
    out += '\n';
  }
  return out;
}

std::vector<Sample> parse_jsonl(std::string_view text, const std::string& source) {
  std::vector<Sample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(sample_from_json_line(line, source + ":" + std::to_string(lineno)));
  }
  return out;
}

std::vector<Sample> parse_classification_list(std::string_view text, const std::string& source) {
  std::vector<Sample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    Sample s;
    std::string label, extra;
    if (!(ls >> s.image_id)) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (!(ls >> label >> s.width >> s.height)) {
      throw DataError("expected '<image_id> <synset> <width> <height>'", where);
    }
    if (ls >> extra) throw DataError("trailing text '" + extra + "'", where);
    s.labels = ClassLabel{label, std::nullopt};
    try {
      validate(s);
    } catch (const DataError& e) {
      throw DataError(e.what(), where);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AnchorPrior> box_dimensions(std::span<const Sample> samples, bool include_difficult) {
  std::vector<AnchorPrior> out;
  for (const auto& s : samples) {
    if (!s.is_detection()) continue;
    for (const auto& lb : s.detection().boxes) {
      if (lb.difficult && !include_difficult) continue;
      out.push_back({lb.box.w, lb.box.h});
    }
  }
  return out;
}

std::size_t detection_draws(const MixConfig& cfg) {
  if (!(cfg.ratio_cls_to_det > 0.0) || !std::isfinite(cfg.ratio_cls_to_det)) {
    throw InvalidArgument("mix ratio must be positive");
  }
  const double det = static_cast<double>(cfg.epoch_size) / (1.0 + cfg.ratio_cls_to_det);
  return static_cast<std::size_t>(std::llround(det));
}

std::vector<Draw> mix_stream(std::span<const Sample> det, std::span<const Sample> cls,
                             const MixConfig& cfg) {
  if (det.empty() || cls.empty()) throw InvalidArgument("mix_stream: empty sample source");
  if (cfg.epoch_size == 0) throw InvalidArgument("mix_stream: epoch_size must be positive");
  const std::size_t n_det = detection_draws(cfg);
  const std::size_t n_cls = cfg.epoch_size - n_det;

  Rng rng(cfg.seed);
  std::vector<Draw> out;
  out.reserve(cfg.epoch_size);
  for (std::size_t i = 0; i < n_det; ++i) {
    out.push_back({SampleSource::kDetection, static_cast<std::size_t>(rng.below(det.size()))});
  }
  std::vector<std::size_t> pass(cls.size());
  std::size_t pos = pass.size();
  for (std::size_t i = 0; i < n_cls; ++i) {
    if (pos == pass.size()) {
      for (std::size_t j = 0; j < pass.size(); ++j) pass[j] = j;
      rng.shuffle(pass.begin(), pass.end());
      pos = 0;
    }
    out.push_back({SampleSource::kClassification, pass[pos++]});
  }
  rng.shuffle(out.begin(), out.end());
  return out;
}

std::vector<int> ScaleSchedule::sizes() const {
  validate(*this);
  std::vector<int> out;
  for (int v = min_size; v <= max_size; v += step) out.push_back(v);
  return out;
}

void validate(const ScaleSchedule& s) {
  if (s.min_size <= 0 || s.step <= 0 || s.max_size < s.min_size || s.period_batches <= 0) {
    throw InvalidArgument("scale schedule needs 0 < min <= max, step > 0, period > 0");
  }
  if ((s.max_size - s.min_size) % s.step != 0) {
    throw InvalidArgument("scale schedule: (max - min) must be divisible by step");
  }
}

int next_size(const ScaleSchedule& s, uint64_t batch_index) {
  validate(s);
  const uint64_t window = batch_index / static_cast<uint64_t>(s.period_batches);
  const auto choices = static_cast<uint64_t>((s.max_size - s.min_size) / s.step + 1);
  Rng rng(mix64(s.seed) ^ window);
  return s.min_size + static_cast<int>(rng.below(choices)) * s.step;
}

}  // namespace detkit
