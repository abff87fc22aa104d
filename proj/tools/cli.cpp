#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "detkit/detkit.hpp"
#include "manifest.hpp"

namespace detkit::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Reads a whole file, recording its digest in the manifest.
class Inputs {
 public:
  explicit Inputs(RunManifest& m) : manifest_(m) {}

  std::string read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    manifest_.input_digests[path] = sha256_hex(bytes);
    return bytes;
  }

 private:
  RunManifest& manifest_;
};

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing", path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed", path);
}

void emit(const json& doc, const std::string& out_path, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> parse_reals(const std::string& s, std::size_t n, const char* what) {
  std::vector<double> out;
  for (const auto& tok : split_csv(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string(what) + ": '" + tok + "' is not a number");
    }
  }
  if (out.size() != n) {
    throw InvalidArgument(std::string(what) + " expects " + std::to_string(n) + " comma-separated values");
  }
  return out;
}

json report_json(const GradCheckReport& r) {
  return {{"checked", r.checked},
          {"failures", r.failures},
          {"max_abs_error", r.max_abs_error},
          {"max_rel_error", r.max_rel_error},
          {"passed", r.passed()}};
}

// ---------------------------------------------------------------- cluster

struct ClusterOpts {
  std::string input;
  std::string format = "plain";
  int k = 5;
  std::string metric = "iou";
  uint64_t seed = 0;
  int restarts = 10;
  int max_iters = 300;
  bool include_difficult = false;
  std::string sweep;
  std::string out;
};

std::vector<AnchorPrior> load_boxes(const ClusterOpts& o, Inputs& inputs) {
  if (o.format == "plain") return parse_plain_boxes(inputs.read(o.input), o.input);
  std::vector<Sample> samples;
  if (o.format == "coco") {
    samples = parse_coco(inputs.read(o.input), o.input);
  } else if (o.format == "voc") {
    std::vector<std::string> files;
    if (fs::is_directory(o.input)) {
      for (const auto& e : fs::directory_iterator(o.input)) {
        if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path().string());
      }
      std::sort(files.begin(), files.end());
    } else {
      files.push_back(o.input);
    }
    for (const auto& f : files) samples.push_back(parse_voc(inputs.read(f), f));
  } else if (o.format == "jsonl") {
    samples = parse_jsonl(inputs.read(o.input), o.input);
  } else {
    throw InvalidArgument("unknown --format '" + o.format + "'");
  }
  return box_dimensions(samples, o.include_difficult);
}

int cmd_cluster(const ClusterOpts& o, std::ostream& out) {
  RunManifest m{"cluster-anchors"};
  m.seed = o.seed;
  m.config = {{"input", o.input},         {"format", o.format},
              {"k", o.k},                 {"metric", o.metric},
              {"restarts", o.restarts},   {"max_iters", o.max_iters},
              {"include_difficult", o.include_difficult}, {"sweep", o.sweep},
              {"out", o.out}};
  Inputs inputs(m);
  const auto boxes = load_boxes(o, inputs);

  ClusterConfig cfg;
  cfg.k = o.k;
  cfg.metric = parse_cluster_metric(o.metric);
  cfg.seed = o.seed;
  cfg.restarts = o.restarts;
  cfg.max_iters = o.max_iters;
  const ClusterResult res = kmeans(boxes, cfg);
  if (!o.out.empty()) write_file(o.out, format_priors(res.centroids));

  json doc;
  doc["k"] = o.k;
  doc["metric"] = std::string(to_string(cfg.metric));
  doc["avg_iou"] = res.avg_iou;
  doc["mean_distance"] = res.mean_distance;
  doc["counts"] = res.assignment_counts;
  doc["seed"] = o.seed;
  doc["boxes"] = boxes.size();
  doc["iterations"] = res.iterations_run;
  json cents = json::array();
  for (const auto& c : res.centroids) cents.push_back({c.pw, c.ph});
  doc["centroids"] = cents;
  if (!o.sweep.empty()) {
    std::vector<int> ks;
    for (const auto& tok : split_csv(o.sweep)) ks.push_back(std::stoi(tok));
    json sw = json::array();
    for (const auto& [k, v] : sweep_k(boxes, ks, cfg)) sw.push_back({{"k", k}, {"avg_iou", v}});
    doc["sweep"] = sw;
  }
  doc["manifest"] = m.to_json();
  emit(doc, "", out);
  return kOk;
}

// ---------------------------------------------------------------- convert

struct ConvertOpts {
  std::string input;
  std::string format = "voc";
  std::string out;
};

int cmd_convert(const ConvertOpts& o, std::ostream& out) {
  RunManifest m{"convert"};
  m.config = {{"input", o.input}, {"format", o.format}, {"out", o.out}};
  Inputs inputs(m);
  ClusterOpts co;
  std::vector<Sample> samples;
  if (o.format == "coco") {
    samples = parse_coco(inputs.read(o.input), o.input);
  } else if (o.format == "voc") {
    std::vector<std::string> files;
    if (fs::is_directory(o.input)) {
      for (const auto& e : fs::directory_iterator(o.input)) {
        if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path().string());
      }
      std::sort(files.begin(), files.end());
    } else {
      files.push_back(o.input);
    }
    for (const auto& f : files) samples.push_back(parse_voc(inputs.read(f), f));
  } else {
    throw InvalidArgument("unknown --format '" + o.format + "' (expected voc|coco)");
  }
  write_file(o.out, to_jsonl(samples));
  json doc{{"samples", samples.size()}, {"out", o.out}, {"manifest", m.to_json()}};
  emit(doc, "", out);
  return kOk;
}

// ---------------------------------------------------------------- wordtree

struct BuildTreeOpts {
  std::string edges;
  std::string concepts;
  std::string root{kDefaultRootSynset};
  std::string out;
};

int cmd_build_tree(const BuildTreeOpts& o, std::ostream& out) {
  RunManifest m{"build-wordtree"};
  m.config = {{"edges", o.edges}, {"concepts", o.concepts}, {"root", o.root}, {"out", o.out}};
  Inputs inputs(m);
  const auto graph = parse_hyponym_edges(inputs.read(o.edges), o.root, o.edges);
  const auto concepts = parse_synset_list(inputs.read(o.concepts), o.concepts);
  const WordTree tree = build_tree(graph, concepts);
  write_file(o.out, format_tree(tree));

  std::size_t leaves = 0;
  int max_depth = 0;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    if (tree.is_leaf(i)) ++leaves;
    max_depth = std::max(max_depth, tree.depth(i));
  }
  json doc{{"root", tree.root()},
           {"nodes", tree.size()},
           {"leaves", leaves},
           {"groups", tree.groups().size()},
           {"max_depth", max_depth},
           {"concepts", concepts.size()},
           {"graph_nodes", graph.node_count()},
           {"graph_edges", graph.edge_count()},
           {"out", o.out},
           {"manifest", m.to_json()}};
  emit(doc, "", out);
  return kOk;
}

struct ClassifyOpts {
  std::string tree;
  std::string logits;
  std::string names;
  double threshold = 0.5;
  double p_object = 1.0;
};

int cmd_classify(const ClassifyOpts& o, std::ostream& out) {
  RunManifest m{"classify-tree"};
  m.config = {{"tree", o.tree}, {"logits", o.logits}, {"names", o.names},
              {"threshold", o.threshold}, {"p_object", o.p_object}};
  Inputs inputs(m);
  const WordTree tree = parse_tree(inputs.read(o.tree), o.tree);
  const auto logits = doubles_from_bytes(inputs.read(o.logits));
  std::unordered_map<SynsetId, std::string> names;
  if (!o.names.empty()) names = parse_synset_names(inputs.read(o.names));

  const TreeDistribution dist = grouped_softmax(logits, tree);
  const std::size_t node = traverse_predict(dist, tree, o.p_object, o.threshold);
  auto name_of = [&](std::size_t i) -> json {
    auto it = names.find(tree.node(i).id);
    return it == names.end() ? json(nullptr) : json(it->second);
  };
  json path = json::array();
  for (std::size_t i : tree.path_from_root(node)) {
    path.push_back({{"synset", tree.node(i).id},
                    {"name", name_of(i)},
                    {"conditional", dist.conditional[i]},
                    {"absolute", absolute_prob(dist, i, tree, o.p_object)}});
  }
  json doc{{"node", node},
           {"synset", tree.node(node).id},
           {"name", name_of(node)},
           {"probability", absolute_prob(dist, node, tree, o.p_object)},
           {"path", path},
           {"manifest", m.to_json()}};
  emit(doc, "", out);
  return kOk;
}

// ---------------------------------------------------------------- merge

struct MergeOpts {
  std::string coco;
  std::string coco_map;
  std::string imagenet;
  std::string tree;
  std::string out;
  std::size_t epoch_size = 0;
  double ratio = 4.0;
  uint64_t seed = 0;
};

int cmd_merge(const MergeOpts& o, std::ostream& out) {
  RunManifest m{"merge-datasets"};
  m.config = {{"coco", o.coco}, {"coco_map", o.coco_map}, {"imagenet", o.imagenet},
              {"tree", o.tree}, {"out", o.out}, {"epoch_size", o.epoch_size},
              {"ratio", o.ratio}};
  if (o.epoch_size > 0) m.seed = o.seed;
  Inputs inputs(m);
  const WordTree tree = parse_tree(inputs.read(o.tree), o.tree);
  std::vector<Sample> det = parse_coco(inputs.read(o.coco), o.coco);
  std::vector<Sample> cls = parse_classification_list(inputs.read(o.imagenet), o.imagenet);

  std::vector<std::pair<std::string, SynsetId>> mappings;
  if (!o.coco_map.empty()) {
    mappings = parse_label_mappings(inputs.read(o.coco_map), o.coco_map);
  } else {
    // Without a mapping file, COCO class names must already be tree synsets.
    std::set<std::string> names;
    for (const auto& s : det) {
      for (const auto& b : s.detection().boxes) names.insert(b.class_);
    }
    for (const auto& n : names) mappings.emplace_back(n, n);
  }
  for (const auto& s : cls) mappings.emplace_back(s.classification().class_, s.classification().class_);
  const LabelMap labels = merge_datasets(mappings, tree);

  for (auto& s : det) {
    for (auto& b : std::get<DetectionLabels>(s.labels).boxes) {
      auto node = labels.node_for(b.class_);
      if (!node) throw DataError("COCO class '" + b.class_ + "' has no synset mapping", o.coco_map);
      b.synset = tree.node(*node).id;
    }
  }
  for (auto& s : cls) {
    auto& c = std::get<ClassLabel>(s.labels);
    c.synset = tree.node(*labels.node_for(c.class_)).id;
  }

  std::string body;
  json doc;
  if (o.epoch_size > 0) {
    MixConfig mix{o.ratio, o.seed, o.epoch_size};
    std::size_t n_det = 0;
    for (const auto& d : mix_stream(det, cls, mix)) {
      const Sample& s = d.source == SampleSource::kDetection ? det[d.index] : cls[d.index];
      if (d.source == SampleSource::kDetection) ++n_det;
      body += to_json_line(s);
      body += '\n';
    }
    doc["epoch"] = {{"size", o.epoch_size}, {"detection_draws", n_det},
                    {"classification_draws", o.epoch_size - n_det}};
  } else {
    body = to_jsonl(det) + to_jsonl(cls);
  }
  write_file(o.out, body);

  json collisions = json::array();
  for (auto node : labels.collisions) {
    collisions.push_back({{"synset", tree.node(node).id}, {"labels", labels.node_to_labels.at(node)}});
  }
  doc["detection_samples"] = det.size();
  doc["classification_samples"] = cls.size();
  doc["labels_mapped"] = labels.label_to_node.size();
  doc["collisions"] = collisions;
  doc["out"] = o.out;
  doc["manifest"] = m.to_json();
  emit(doc, "", out);
  return kOk;
}

// ---------------------------------------------------------------- decode

struct DecodeOpts {
  std::string t;
  std::string cell;
  std::string prior;
  int grid = 13;
  int stride = 32;
  // whole-map mode
  std::string pred;
  std::string priors;
  int classes = 0;
  std::string class_names;
  std::string image_id = "image";
  double threshold = 0.25;
  double nms_iou = 0.45;
  std::string out;
};

int cmd_decode(const DecodeOpts& o, std::ostream& out) {
  RunManifest m{"decode"};
  m.config = {{"t", o.t}, {"cell", o.cell}, {"prior", o.prior}, {"grid", o.grid},
              {"stride", o.stride}, {"pred", o.pred}, {"priors", o.priors},
              {"classes", o.classes}, {"class_names", o.class_names},
              {"image_id", o.image_id}, {"threshold", o.threshold}, {"nms", o.nms_iou},
              {"out", o.out}};
  Inputs inputs(m);
  const GridGeometry g{o.grid, o.grid, o.stride};

  if (o.pred.empty()) {
    if (o.t.empty() || o.cell.empty() || o.prior.empty()) {
      throw InvalidArgument("decode needs --t, --cell and --prior, or --pred with --priors");
    }
    const auto t = parse_reals(o.t, 5, "--t");
    const auto c = parse_reals(o.cell, 2, "--cell");
    const auto p = parse_reals(o.prior, 2, "--prior");
    RawPrediction raw{t[0], t[1], t[2], t[3], t[4], {}};
    const Cell cell{static_cast<int>(c[0]), static_cast<int>(c[1])};
    const DecodedBox d = decode(raw, cell, {p[0], p[1]}, g);
    const Box n = grid_to_normalized(d.box, g);
    json doc{{"grid_box", {d.box.cx, d.box.cy, d.box.w, d.box.h}},
             {"normalized_box", {n.cx, n.cy, n.w, n.h}},
             {"pixel_box", {d.box.cx * o.stride, d.box.cy * o.stride, d.box.w * o.stride,
                            d.box.h * o.stride}},
             {"objectness", d.objectness},
             {"manifest", m.to_json()}};
    emit(doc, o.out, out);
    return kOk;
  }

  if (o.priors.empty() || o.classes <= 0) {
    throw InvalidArgument("decode --pred needs --priors and --classes");
  }
  const auto priors_norm = parse_plain_boxes(inputs.read(o.priors), o.priors);
  std::vector<std::string> names;
  if (!o.class_names.empty()) {
    std::istringstream in(inputs.read(o.class_names));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) names.push_back(line);
    }
    if (names.size() != static_cast<std::size_t>(o.classes)) {
      throw DataError("class names file lists " + std::to_string(names.size()) + " names, expected " +
                      std::to_string(o.classes), o.class_names);
    }
  }
  const int per = 5 + o.classes;
  const int channels = head_channels(static_cast<int>(priors_norm.size()), o.classes);
  const FeatureMap pred = feature_map_from_bytes(inputs.read(o.pred), o.grid, o.grid, channels);

  std::vector<Detection> dets;
  for (int y = 0; y < o.grid; ++y) {
    for (int x = 0; x < o.grid; ++x) {
      for (std::size_t a = 0; a < priors_norm.size(); ++a) {
        const int base = static_cast<int>(a) * per;
        RawPrediction raw{pred.at(x, y, base), pred.at(x, y, base + 1), pred.at(x, y, base + 2),
                          pred.at(x, y, base + 3), pred.at(x, y, base + 4), {}};
        const AnchorPrior prior{priors_norm[a].pw * o.grid, priors_norm[a].ph * o.grid};
        const DecodedBox d = decode(raw, {x, y}, prior, g);
        double mx = -INFINITY;
        for (int c = 0; c < o.classes; ++c) mx = std::max(mx, pred.at(x, y, base + 5 + c));
        double sum = 0.0;
        int best = 0;
        for (int c = 0; c < o.classes; ++c) {
          sum += std::exp(pred.at(x, y, base + 5 + c) - mx);
          if (pred.at(x, y, base + 5 + c) > pred.at(x, y, base + 5 + best)) best = c;
        }
        const double score = d.objectness * std::exp(pred.at(x, y, base + 5 + best) - mx) / sum;
        if (score < o.threshold) continue;
        dets.push_back({o.image_id, grid_to_normalized(d.box, g),
                        names.empty() ? std::to_string(best) : names[best], score});
      }
    }
  }
  if (o.nms_iou > 0.0) dets = nms(dets, o.nms_iou);
  const std::string body = to_jsonl(dets);
  if (!o.out.empty()) {
    write_file(o.out, body);
  } else {
    out << body;
  }
  return kOk;
}

// ---------------------------------------------------------------- shapes

struct ShapesOpts {
  std::string spec;
  int input = 224;
  int channels = 3;
  std::string format = "json";
};

int cmd_shapes(const ShapesOpts& o, std::ostream& out) {
  RunManifest m{"shapes"};
  m.config = {{"spec", o.spec}, {"input", o.input}, {"channels", o.channels}, {"format", o.format}};
  Inputs inputs(m);
  const auto layers = parse_layer_spec(inputs.read(o.spec), o.spec);
  const auto shapes = shape_infer(layers, {o.input, o.input, o.channels});
  if (o.format == "csv") {
    out << "layer,type,width,height,channels\n";
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out << i << ',' << kind_name(layers[i].kind) << ',' << shapes[i].width << ','
          << shapes[i].height << ',' << shapes[i].channels << '\n';
    }
    return kOk;
  }
  if (o.format != "json") throw InvalidArgument("--format must be json or csv");
  json rows = json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    rows.push_back({{"layer", i},
                    {"type", std::string(kind_name(layers[i].kind))},
                    {"output", {shapes[i].width, shapes[i].height, shapes[i].channels}}});
  }
  json doc{{"input", {o.input, o.input, o.channels}}, {"layers", rows}, {"manifest", m.to_json()}};
  emit(doc, "", out);
  return kOk;
}

// ---------------------------------------------------------------- schedule

struct ScheduleOpts {
  uint64_t seed = 0;
  uint64_t batches = 30;
  ScaleSchedule schedule;
  std::string format = "json";
};

int cmd_schedule(ScheduleOpts o, std::ostream& out) {
  o.schedule.seed = o.seed;
  validate(o.schedule);
  RunManifest m{"schedule"};
  m.seed = o.seed;
  m.config = {{"batches", o.batches}, {"min", o.schedule.min_size}, {"max", o.schedule.max_size},
              {"step", o.schedule.step}, {"period", o.schedule.period_batches},
              {"format", o.format}};
  std::vector<int> sizes;
  sizes.reserve(o.batches);
  for (uint64_t b = 0; b < o.batches; ++b) sizes.push_back(next_size(o.schedule, b));
  if (o.format == "csv") {
    out << "batch,size\n";
    for (std::size_t b = 0; b < sizes.size(); ++b) out << b << ',' << sizes[b] << '\n';
    return kOk;
  }
  if (o.format != "json") throw InvalidArgument("--format must be json or csv");
  json doc{{"sizes", sizes}, {"allowed", o.schedule.sizes()}, {"manifest", m.to_json()}};
  emit(doc, "", out);
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string dets;
  std::string gt;
  double iou = 0.5;
  std::string method = "voc2007";
  std::string classes;
  std::string plot_data;
  std::size_t max_dets = 100;
  std::string out;
};

int cmd_eval(const EvalOpts& o, std::ostream& out) {
  RunManifest m{"eval-map"};
  m.config = {{"dets", o.dets}, {"gt", o.gt}, {"iou", o.iou}, {"method", o.method},
              {"classes", o.classes}, {"plot_data", o.plot_data}, {"max_dets", o.max_dets},
              {"out", o.out}};
  Inputs inputs(m);
  const auto dets = parse_detections_jsonl(inputs.read(o.dets), o.dets);
  const auto samples = parse_jsonl(inputs.read(o.gt), o.gt);
  const auto gts = ground_truth_from_samples(samples);
  const auto classes = split_csv(o.classes);
  const ApMethod method = parse_ap_method(o.method);
  const MapReport rep = mean_ap(dets, gts, classes, o.iou, method);

  json per = json::object();
  for (const auto& [cls, curve] : rep.per_class) {
    per[cls] = {{"ap", curve.ap}, {"positives", curve.positives}, {"detections", curve.points.size()}};
  }
  json doc{{"map", rep.map},
           {"per_class", per},
           {"skipped", rep.skipped},
           {"method", std::string(to_string(method))},
           {"iou", o.iou},
           {"recall", recall_at(dets, gts, o.iou, o.max_dets)},
           {"max_dets", o.max_dets},
           {"manifest", m.to_json()}};
  if (!o.plot_data.empty()) {
    std::ostringstream csv;
    csv << "class,rank,recall,precision\n" << std::setprecision(17);
    for (const auto& [cls, curve] : rep.per_class) {
      for (std::size_t i = 0; i < curve.points.size(); ++i) {
        csv << cls << ',' << i << ',' << curve.points[i].recall << ',' << curve.points[i].precision << '\n';
      }
    }
    write_file(o.plot_data, csv.str());
  }
  emit(doc, o.out, out);
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradOpts {
  uint64_t seed = 0;
  uint64_t count = 1;
};

int cmd_gradcheck(const GradOpts& o, std::ostream& out, std::ostream& err) {
  RunManifest m{"gradcheck"};
  m.seed = o.seed;
  m.config = {{"count", o.count}};
  json runs = json::array();
  bool ok = true;
  for (uint64_t i = 0; i < o.count; ++i) {
    const auto s = run_gradcheck(o.seed + i);
    ok = ok && s.passed();
    runs.push_back({{"seed", s.seed},
                    {"detection_flat", report_json(s.detection_flat)},
                    {"detection_tree", report_json(s.detection_tree)},
                    {"classification", report_json(s.classification)},
                    {"hierarchical", report_json(s.hierarchical)},
                    {"passed", s.passed()}});
  }
  json doc{{"passed", ok}, {"runs", runs}, {"manifest", m.to_json()}};
  emit(doc, "", out);
  if (!ok) {
    err << "detkit gradcheck: analytic gradient disagrees with finite differences\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"detkit: anchor clustering, box codecs, WordTree labels, loss checks and mAP"};
  app.name("detkit");
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  ClusterOpts cluster;
  auto* c = app.add_subcommand("cluster-anchors", "k-means anchor priors from box dimensions");
  c->add_option("--input", cluster.input, "annotation file or VOC directory")->required();
  c->add_option("--format", cluster.format, "voc|coco|plain|jsonl")
      ->check(CLI::IsMember({"voc", "coco", "plain", "jsonl"}));
  c->add_option("--k", cluster.k, "number of priors")->check(CLI::PositiveNumber);
  c->add_option("--metric", cluster.metric, "iou|sse")->check(CLI::IsMember({"iou", "sse"}));
  c->add_option("--seed", cluster.seed);
  c->add_option("--restarts", cluster.restarts)->check(CLI::PositiveNumber);
  c->add_option("--max-iters", cluster.max_iters)->check(CLI::PositiveNumber);
  c->add_flag("--include-difficult", cluster.include_difficult);
  c->add_option("--sweep", cluster.sweep, "comma-separated k values to report avg IOU for");
  c->add_option("--out", cluster.out, "priors text file");

  ConvertOpts convert;
  auto* cv = app.add_subcommand("convert", "VOC XML or COCO JSON to Sample JSON lines");
  cv->add_option("--input", convert.input)->required();
  cv->add_option("--format", convert.format)->check(CLI::IsMember({"voc", "coco"}));
  cv->add_option("--out", convert.out)->required();

  BuildTreeOpts build;
  auto* bt = app.add_subcommand("build-wordtree", "extract a WordTree from hyponym edges");
  bt->add_option("--edges", build.edges, "<child> <parent> per line")->required();
  bt->add_option("--concepts", build.concepts, "one synset per line")->required();
  bt->add_option("--root", build.root);
  bt->add_option("--out", build.out)->required();

  ClassifyOpts classify;
  auto* ct = app.add_subcommand("classify-tree", "threshold traversal of a WordTree prediction");
  ct->add_option("--tree", classify.tree)->required();
  ct->add_option("--logits", classify.logits, "little-endian float64, one per node")->required();
  ct->add_option("--threshold", classify.threshold);
  ct->add_option("--p-object", classify.p_object);
  ct->add_option("--names", classify.names, "<synset> <label> per line");

  MergeOpts merge;
  auto* mg = app.add_subcommand("merge-datasets", "map COCO and ImageNet labels onto a WordTree");
  mg->add_option("--coco", merge.coco)->required();
  mg->add_option("--coco-map", merge.coco_map, "<coco name> <synset> per line");
  mg->add_option("--imagenet", merge.imagenet, "<image_id> <synset> <width> <height> per line")
      ->required();
  mg->add_option("--tree", merge.tree)->required();
  mg->add_option("--out", merge.out)->required();
  mg->add_option("--epoch-size", merge.epoch_size, "emit one mixed epoch instead of a plain merge");
  mg->add_option("--ratio", merge.ratio, "classification:detection draws per epoch");
  mg->add_option("--seed", merge.seed);

  DecodeOpts dec;
  auto* dc = app.add_subcommand("decode", "decode raw head outputs into boxes");
  dc->add_option("--t", dec.t, "tx,ty,tw,th,to");
  dc->add_option("--cell", dec.cell, "x,y");
  dc->add_option("--prior", dec.prior, "pw,ph in grid units");
  dc->add_option("--grid", dec.grid)->check(CLI::PositiveNumber);
  dc->add_option("--stride", dec.stride)->check(CLI::PositiveNumber);
  dc->add_option("--pred", dec.pred, "whole head as little-endian float64");
  dc->add_option("--priors", dec.priors, "normalized priors file");
  dc->add_option("--classes", dec.classes);
  dc->add_option("--class-names", dec.class_names);
  dc->add_option("--image-id", dec.image_id);
  dc->add_option("--threshold", dec.threshold);
  dc->add_option("--nms", dec.nms_iou, "IOU threshold, 0 disables");
  dc->add_option("--out", dec.out);

  ShapesOpts shapes;
  auto* sh = app.add_subcommand("shapes", "static shape inference over a layer list");
  sh->add_option("--spec", shapes.spec)->required();
  sh->add_option("--input", shapes.input)->check(CLI::PositiveNumber);
  sh->add_option("--channels", shapes.channels)->check(CLI::PositiveNumber);
  sh->add_option("--format", shapes.format)->check(CLI::IsMember({"json", "csv"}));

  ScheduleOpts sched;
  auto* sc = app.add_subcommand("schedule", "multi-scale input size per batch");
  sc->add_option("--seed", sched.seed);
  sc->add_option("--batches", sched.batches);
  sc->add_option("--min", sched.schedule.min_size);
  sc->add_option("--max", sched.schedule.max_size);
  sc->add_option("--step", sched.schedule.step);
  sc->add_option("--period", sched.schedule.period_batches);
  sc->add_option("--format", sched.format)->check(CLI::IsMember({"json", "csv"}));

  EvalOpts eval;
  auto* ev = app.add_subcommand("eval-map", "VOC-style AP / mAP and recall");
  ev->add_option("--dets", eval.dets)->required();
  ev->add_option("--gt", eval.gt, "Sample JSON lines")->required();
  ev->add_option("--iou", eval.iou);
  ev->add_option("--method", eval.method)->check(CLI::IsMember({"voc2007", "auc", "voc2012"}));
  ev->add_option("--classes", eval.classes, "comma-separated subset");
  ev->add_option("--plot-data", eval.plot_data, "write PR points as CSV");
  ev->add_option("--max-dets", eval.max_dets);
  ev->add_option("--out", eval.out);

  GradOpts grad;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
  gc->add_option("--seed", grad.seed);
  gc->add_option("--count", grad.count)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c) return cmd_cluster(cluster, out);
    if (*cv) return cmd_convert(convert, out);
    if (*bt) return cmd_build_tree(build, out);
    if (*ct) return cmd_classify(classify, out);
    if (*mg) return cmd_merge(merge, out);
    if (*dc) return cmd_decode(dec, out);
    if (*sh) return cmd_shapes(shapes, out);
    if (*sc) return cmd_schedule(sched, out);
    if (*ev) return cmd_eval(eval, out);
    if (*gc) return cmd_gradcheck(grad, out, err);
  } catch (const InvariantViolation& e) {
    err << "detkit: internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const Error& e) {
    err << "detkit: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "detkit: internal error: " << e.what() << '\n';
    return kInternal;
  }
  err << app.help();
  return kUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("detkit");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace detkit::cli
