#include "detkit/gradcheck.hpp"

#include <algorithm>
#include <deque>

namespace detkit {

namespace {

FeatureMap random_prediction(Rng& rng, const HeadConfig& cfg) {
  FeatureMap f(cfg.grid.cells_x, cfg.grid.cells_y, cfg.channels());
  for (double& v : f.data()) v = rng.uniform() * 4.0 - 2.0;
  return f;
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

HeadConfig small_head(Rng& rng) {
  HeadConfig cfg;
  cfg.grid = {3, 3, 32};
  for (int a = 0; a < 2; ++a) {
    cfg.priors.push_back({uniform_in(rng, 0.4, 1.8), uniform_in(rng, 0.4, 1.8)});
  }
  return cfg;
}

GradCheckReport check_map(const std::function<double(const FeatureMap&)>& loss,
                          const FeatureMap& at, const FeatureMap& analytic,
                          const GradCheckOptions& opt) {
  auto f = [&](std::span<const double> x) {
    FeatureMap probe(at.width(), at.height(), at.channels(),
                     std::vector<double>(x.begin(), x.end()));
    return loss(probe);
  };
  return check_gradient(f, at.data(), analytic.data(), opt);
}

GradCheckReport check_detection(Rng& rng, const HeadConfig& cfg, const GradCheckOptions& opt) {
  const FeatureMap pred = random_prediction(rng, cfg);
  std::vector<GroundTruth> gt;
  const int n = 1 + static_cast<int>(rng.below(2));
  for (int i = 0; i < n; ++i) {
    gt.push_back({{uniform_in(rng, 0.05, 0.95), uniform_in(rng, 0.05, 0.95),
                   uniform_in(rng, 0.1, 0.6), uniform_in(rng, 0.1, 0.6)},
                  static_cast<std::size_t>(rng.below(cfg.class_count()))});
  }
  const LossResult res = detection_loss(pred, gt, cfg);
  return check_map([&](const FeatureMap& p) { return detection_loss(p, gt, cfg).loss.total; },
                   pred, res.gradient, opt);
}

}  // namespace

WordTree random_word_tree(Rng& rng, std::size_t max_nodes) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(std::max<std::size_t>(max_nodes, 1)));
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 1; i < n; ++i) children[rng.below(i)].push_back(i);

  std::vector<WordTree::Node> nodes;
  std::vector<int> new_index(n, -1);
  std::deque<std::size_t> queue{0};
  new_index[0] = 0;
  nodes.push_back({"s0", -1});
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    for (std::size_t kid : children[cur]) {
      new_index[kid] = static_cast<int>(nodes.size());
      nodes.push_back({"s" + std::to_string(nodes.size()), new_index[cur]});
      queue.push_back(kid);
    }
  }
  return WordTree(std::move(nodes));
}

GradcheckSummary run_gradcheck(uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  GradcheckSummary out;
  out.seed = seed;

  HeadConfig flat = small_head(rng);
  flat.flat_classes = 3;
  out.detection_flat = check_detection(rng, flat, opt);

  // At least two nodes so that a non-root label exists.
  auto tree = std::make_shared<const WordTree>(random_word_tree(rng, 7));
  if (tree->size() < 2) tree = std::make_shared<const WordTree>(WordTree({{"s0", -1}, {"s1", 0}}));
  HeadConfig hier = small_head(rng);
  hier.tree = tree;
  out.detection_tree = check_detection(rng, hier, opt);

  {
    const FeatureMap pred = random_prediction(rng, hier);
    const std::size_t label = 1 + rng.below(tree->size() - 1);
    const auto res = classification_loss(pred, label, hier);
    out.classification = check_map(
        [&](const FeatureMap& p) { return classification_loss(p, label, hier).result.loss.total; },
        pred, res.result.gradient, opt);
  }
  {
    std::vector<double> logits(tree->size());
    for (double& v : logits) v = rng.uniform() * 6.0 - 3.0;
    const std::size_t label = rng.below(tree->size());
    const ClassLoss cl = hierarchical_class_loss(logits, label, *tree);
    out.hierarchical = check_gradient(
        [&](std::span<const double> x) { return hierarchical_class_loss(x, label, *tree).value; },
        logits, cl.gradient, opt);
  }
  return out;
}

}  // namespace detkit
