#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "detkit/detkit.hpp"

namespace {

using namespace detkit;

std::vector<Box> random_boxes(Rng& rng, std::size_t n) {
  std::vector<Box> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({rng.uniform(), rng.uniform(), 0.05 + 0.3 * rng.uniform(), 0.05 + 0.3 * rng.uniform()});
  }
  return out;
}

void BM_Iou(benchmark::State& state) {
  Rng rng(1);
  const auto boxes = random_boxes(rng, 1024);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou(boxes[i % 1024], boxes[(i * 7 + 3) % 1024]));
    ++i;
  }
}
BENCHMARK(BM_Iou);

void BM_KMeans(benchmark::State& state) {
  Rng rng(2);
  std::vector<AnchorPrior> boxes;
  for (int i = 0; i < state.range(0); ++i) boxes.push_back({0.02 + rng.uniform(), 0.02 + rng.uniform()});
  ClusterConfig cfg;
  cfg.k = 5;
  cfg.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(boxes, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KMeans)->Arg(1000)->Arg(16000);

void BM_GroupedSoftmax(benchmark::State& state) {
  Rng rng(3);
  const WordTree tree = random_word_tree(rng, static_cast<std::size_t>(state.range(0)));
  std::vector<double> z(tree.size());
  for (auto& v : z) v = 4 * rng.uniform() - 2;
  for (auto _ : state) benchmark::DoNotOptimize(grouped_softmax(z, tree));
}
BENCHMARK(BM_GroupedSoftmax)->Arg(200)->Arg(1369);

void BM_Reorg(benchmark::State& state) {
  const FeatureMap f(26, 26, 512, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(reorg(f, 2));
}
BENCHMARK(BM_Reorg);

void BM_AveragePrecision(benchmark::State& state) {
  Rng rng(5);
  std::vector<Detection> dets;
  std::vector<GtBox> gts;
  for (int img = 0; img < 100; ++img) {
    const std::string id = std::to_string(img);
    for (const Box& b : random_boxes(rng, 3)) gts.push_back({id, b, "dog", false});
    for (const Box& b : random_boxes(rng, 20)) dets.push_back({id, b, "dog", rng.uniform()});
  }
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(dets, gts, "dog"));
}
BENCHMARK(BM_AveragePrecision);

}  // namespace

BENCHMARK_MAIN();
