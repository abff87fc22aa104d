#pragma once

#include <cstdint>

#include "detkit/losshead.hpp"
#include "detkit/random.hpp"
#include "detkit/wordtree.hpp"

namespace detkit {

// Random tree with 1..max_nodes nodes, parents-first with contiguous
// sibling groups. Ids are "s0", "s1", ... in node order.
WordTree random_word_tree(Rng& rng, std::size_t max_nodes);

// Randomized small-instance gradient checks: 3x3 grid, 2 priors, a flat
// 3-class head and a tree head of at most 7 nodes.
struct GradcheckSummary {
  uint64_t seed = 0;
  GradCheckReport detection_flat;
  GradCheckReport detection_tree;
  GradCheckReport classification;
  GradCheckReport hierarchical;

  bool passed() const {
    return detection_flat.passed() && detection_tree.passed() && classification.passed() &&
           hierarchical.passed();
  }
};

GradcheckSummary run_gradcheck(uint64_t seed, const GradCheckOptions& opt = {});

}  // namespace detkit
