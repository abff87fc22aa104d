#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "detkit/error.hpp"
#include "detkit/gradcheck.hpp"
#include "detkit/random.hpp"
#include "detkit/wordtree.hpp"
#include "support.hpp"

namespace detkit {
namespace {

// root(0) -> dog(1) -> {terrier(2), hound(3)}; terrier -> {norfolk(4), yorkshire(5)}
WordTree dog_tree() {
  return WordTree({{"root", -1}, {"dog", 0}, {"terrier", 1}, {"hound", 1}, {"norfolk", 2}, {"yorkshire", 2}});
}

std::vector<std::string> ids(const WordTree& t) {
  std::vector<std::string> out;
  for (const auto& n : t.nodes()) out.push_back(n.id);
  return out;
}

TEST(BuildTree, SingleChain) {
  HyponymGraph g("root");
  g.add_edge("a", "b");
  g.add_edge("b", "root");
  const std::vector<SynsetId> concepts{"a"};
  const WordTree t = build_tree(g, concepts);
  EXPECT_EQ(ids(t), (std::vector<std::string>{"root", "b", "a"}));
  EXPECT_EQ(t.node(2).parent, 1);
}

TEST(BuildTree, DiamondTakesShorterPath) {
  HyponymGraph g("root");
  g.add_edge("d", "p1");
  g.add_edge("d", "p2");
  g.add_edge("p1", "root");
  g.add_edge("p2", "q");
  g.add_edge("q", "root");
  const std::vector<SynsetId> concepts{"d"};
  const WordTree t = build_tree(g, concepts);
  EXPECT_EQ(ids(t), (std::vector<std::string>{"root", "p1", "d"}));
}

TEST(BuildTree, SharedPrefixIsFree) {
  // x reaches root via a (already in the tree through y) or via b -> c.
  HyponymGraph g("root");
  g.add_edge("y", "a");
  g.add_edge("a", "m");
  g.add_edge("m", "root");
  g.add_edge("x", "a");
  g.add_edge("x", "b");
  g.add_edge("b", "root");
  const std::vector<SynsetId> concepts{"x", "y"};
  const WordTree t = build_tree(g, concepts);
  // Via a: one new edge (x->a). Via b: two (x->b, b->root).
  EXPECT_EQ(t.node(t.index_of("x")).parent, static_cast<int>(t.index_of("a")));
  EXPECT_FALSE(t.find("b").has_value());
}

TEST(BuildTree, EqualCostPicksSmallestPathRootFirst) {
  HyponymGraph g("root");
  g.add_edge("leaf", "zeta");
  g.add_edge("leaf", "alpha");
  g.add_edge("zeta", "root");
  g.add_edge("alpha", "root");
  const std::vector<SynsetId> concepts{"leaf"};
  const WordTree t = build_tree(g, concepts);
  EXPECT_EQ(ids(t), (std::vector<std::string>{"root", "alpha", "leaf"}));
}

TEST(BuildTree, ToyFixtureMatchesGolden) {
  const auto g = parse_hyponym_edges(test::slurp(test::data_path("toy_isa.txt")), "n00001930");
  const auto concepts = parse_synset_list(test::slurp(test::data_path("toy_concepts.txt")));
  const WordTree t = build_tree(g, concepts);
  EXPECT_EQ(format_tree(t), test::slurp(test::data_path("toy_tree.golden.txt")));
  EXPECT_EQ(t.size(), 10u);
}

TEST(BuildTree, Errors) {
  HyponymGraph g("root");
  g.add_edge("a", "root");
  g.add_edge("island", "nowhere");
  EXPECT_THROW(build_tree(g, std::vector<SynsetId>{"island"}), DataError);
  EXPECT_THROW(build_tree(g, std::vector<SynsetId>{"missing"}), DataError);
  try {
    build_tree(g, std::vector<SynsetId>{"island"});
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("island"), std::string::npos);
  }

  HyponymGraph cyc("root");
  cyc.add_edge("a", "b");
  cyc.add_edge("b", "c");
  cyc.add_edge("c", "a");
  cyc.add_edge("c", "root");
  EXPECT_THROW(build_tree(cyc, std::vector<SynsetId>{"a"}), DataError);
}

TEST(BuildTree, PropertiesOnRandomDags) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    HyponymGraph g("n0");
    const int n = 2 + static_cast<int>(rng.below(25));
    for (int i = 1; i < n; ++i) {
      const int parents = 1 + static_cast<int>(rng.below(3));
      for (int p = 0; p < parents; ++p) g.add_edge("n" + std::to_string(i), "n" + std::to_string(rng.below(i)));
    }
    std::vector<SynsetId> concepts;
    for (int i = 1; i < n; ++i) {
      if (rng.below(2)) concepts.push_back("n" + std::to_string(i));
    }
    const WordTree t = build_tree(g, concepts);
    EXPECT_GE(t.size(), concepts.size());
    for (const auto& c : concepts) EXPECT_TRUE(t.find(c).has_value()) << c;
    for (std::size_t i = 1; i < t.size(); ++i) {
      EXPECT_LT(t.node(i).parent, static_cast<int>(i));
      // Every tree edge exists in the graph.
      const auto& ps = g.parents(t.node(i).id);
      EXPECT_NE(std::find(ps.begin(), ps.end(), t.node(t.node(i).parent).id), ps.end());
    }
    EXPECT_EQ(parse_tree(format_tree(t)), t);
  }
}

TEST(TreeText, ParseErrors) {
  EXPECT_THROW(parse_tree("a 0\n"), DataError);
  EXPECT_THROW(parse_tree("a -1\nb 5\n"), DataError);
  EXPECT_THROW(parse_tree("a -1\nb x\n"), DataError);
  EXPECT_THROW(parse_tree("a -1\nb 0\na 1\n"), DataError);
}

TEST(WordTreeType, GroupsAndValidation) {
  const WordTree t = dog_tree();
  ASSERT_EQ(t.groups().size(), 3u);
  EXPECT_EQ(t.groups()[1].begin, 2u);
  EXPECT_EQ(t.groups()[1].end, 4u);
  EXPECT_EQ(t.group_of(3), 1u);
  EXPECT_EQ(t.depth(5), 3);
  EXPECT_TRUE(t.is_leaf(3));
  EXPECT_FALSE(t.is_leaf(2));
  EXPECT_EQ(t.path_from_root(5), (std::vector<std::size_t>{0, 1, 2, 5}));
  // Siblings split by another group.
  EXPECT_THROW(WordTree({{"r", -1}, {"a", 0}, {"b", 1}, {"c", 0}}), InvalidArgument);
  EXPECT_THROW(WordTree({{"r", -1}, {"a", 2}, {"b", 0}}), InvalidArgument);
  EXPECT_THROW(WordTree({{"r", -1}, {"r", 0}}), InvalidArgument);
  EXPECT_THROW(t.index_of("cat"), InvalidArgument);
}

TEST(GroupedSoftmax, Examples) {
  const WordTree flat({{"r", -1}, {"a", 0}, {"b", 0}, {"c", 0}});
  const auto u = grouped_softmax(std::vector<double>{7, 0, 0, 0}, flat).conditional;
  EXPECT_EQ(u[0], 1.0);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(u[i], 1.0 / 3.0, 1e-15);
  const auto v = grouped_softmax(std::vector<double>{0, std::log(2.0), 0, 0}, flat).conditional;
  EXPECT_NEAR(v[1], 0.5, 1e-15);
  EXPECT_NEAR(v[2], 0.25, 1e-15);
  const WordTree single({{"r", -1}, {"only", 0}});
  EXPECT_EQ(grouped_softmax(std::vector<double>{0, -123.0}, single).conditional[1], 1.0);
  EXPECT_THROW(grouped_softmax(std::vector<double>{0, 0}, flat), InvalidArgument);
}

TEST(GroupedSoftmax, ShiftInvariantPerGroup) {
  const WordTree t = dog_tree();
  const std::vector<double> z{0.3, -1, 2, 0.5, -0.25, 1.75};
  std::vector<double> shifted = z;
  shifted[4] += 400.0;
  shifted[5] += 400.0;
  const auto a = grouped_softmax(z, t).conditional, b = grouped_softmax(shifted, t).conditional;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(GroupedSoftmax, RandomTreesSumToOne) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const WordTree t = random_word_tree(rng, 60);
    std::vector<double> z(t.size());
    for (auto& x : z) x = 20 * rng.uniform() - 10;
    const TreeDistribution d = grouped_softmax(z, t);
    double leaves = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t.is_leaf(i)) leaves += absolute_prob(d, i, t);
    }
    EXPECT_NEAR(leaves, 1.0, 1e-6);
    for (const auto& g : t.groups()) {
      double s = 0.0;
      for (std::size_t i = g.begin; i < g.end; ++i) s += d.conditional[i];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(AbsoluteProb, Examples) {
  const WordTree chain({{"root", -1}, {"a", 0}, {"b", 1}});
  const TreeDistribution d{{1.0, 0.9, 0.8}};
  EXPECT_EQ(absolute_prob(d, "root", chain), 1.0);
  EXPECT_DOUBLE_EQ(absolute_prob(d, "b", chain), 0.72);
  EXPECT_DOUBLE_EQ(absolute_prob(d, "b", chain, 0.5), 0.36);
  EXPECT_THROW(absolute_prob(d, "zzz", chain), InvalidArgument);
}

TEST(PropagateLabels, MarksNodeAndAncestors) {
  const WordTree t = dog_tree();
  EXPECT_EQ(propagate_labels("root", t), (std::vector<bool>{true, false, false, false, false, false}));
  EXPECT_EQ(propagate_labels("norfolk", t), (std::vector<bool>{true, true, true, false, true, false}));
  const WordTree chain({{"root", -1}, {"a", 0}, {"b", 1}});
  const auto v = propagate_labels("b", chain);
  EXPECT_EQ(std::count(v.begin(), v.end(), true), 3);
  EXPECT_THROW(propagate_labels("cat", t), InvalidArgument);
}

TEST(PropagateLabels, CountIsDepthPlusOne) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const WordTree t = random_word_tree(rng, 80);
    const std::size_t i = rng.below(t.size());
    const auto v = propagate_labels(t.node(i).id, t);
    EXPECT_EQ(std::count(v.begin(), v.end(), true), t.depth(i) + 1);
  }
}

TEST(TraversePredict, ToyTreeReachesYorkshire) {
  const WordTree t = dog_tree();
  const TreeDistribution d{{1.0, 1.0, 0.9, 0.1, 0.4, 0.6}};
  EXPECT_EQ(t.node(traverse_predict(d, t, 1.0, 0.5)).id, "yorkshire");
  // 0.9 * 0.6 = 0.54 falls below 0.55, so the walk stops at terrier.
  EXPECT_EQ(t.node(traverse_predict(d, t, 1.0, 0.55)).id, "terrier");
  EXPECT_EQ(traverse_predict(d, t, 0.4, 0.5), 0u);
}

TEST(TraversePredict, TieGoesToLowestIndex) {
  const WordTree t = dog_tree();
  const TreeDistribution d{{1.0, 1.0, 0.5, 0.5, 0.5, 0.5}};
  EXPECT_EQ(traverse_predict(d, t, 1.0, 0.2), 4u);
}

TEST(TraversePredict, UncertainLeavesFallBackToAncestor) {
  const WordTree t({{"root", -1}, {"dog", 0}, {"cat", 0}, {"terrier", 1}, {"hound", 1},
                    {"norfolk", 3}, {"yorkshire", 3}, {"airedale", 3}});
  const TreeDistribution d{{1.0, 0.97, 0.03, 0.98, 0.02, 0.34, 0.33, 0.33}};
  const std::size_t got = traverse_predict(d, t, 1.0, 0.5);
  EXPECT_EQ(t.node(got).id, "terrier");
  EXPECT_FALSE(t.is_leaf(got));
}

TEST(TraversePredict, NeverBelowThresholdExceptRoot) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const WordTree t = random_word_tree(rng, 40);
    std::vector<double> z(t.size());
    for (auto& x : z) x = 6 * rng.uniform() - 3;
    const TreeDistribution d = grouped_softmax(z, t);
    const double p = rng.uniform(), thr = 0.01 + 0.99 * rng.uniform();
    const std::size_t got = traverse_predict(d, t, p, thr);
    if (got != 0) EXPECT_GE(absolute_prob(d, got, t, p), thr);
  }
}

TEST(MergeDatasets, MapsAndRecordsCollisions) {
  const WordTree t = dog_tree();
  const std::vector<std::pair<std::string, SynsetId>> m{
      {"dog", "dog"}, {"canine", "dog"}, {"Norfolk terrier", "norfolk"}};
  const LabelMap map = merge_datasets(m, t);
  EXPECT_EQ(map.node_for("dog"), 1u);
  EXPECT_EQ(map.node_for("Norfolk terrier"), 4u);
  EXPECT_FALSE(map.node_for("cat").has_value());
  EXPECT_EQ(map.collisions, (std::vector<std::size_t>{1}));
  EXPECT_EQ(map.node_to_labels.at(1), (std::vector<std::string>{"dog", "canine"}));
  EXPECT_TRUE(merge_datasets({}, t).label_to_node.empty());
}

TEST(MergeDatasets, ListsEveryMissingSynset) {
  const WordTree t = dog_tree();
  const std::vector<std::pair<std::string, SynsetId>> m{{"a", "x1"}, {"dog", "dog"}, {"b", "x2"}};
  try {
    merge_datasets(m, t);
    FAIL();
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("x1"), std::string::npos);
    EXPECT_NE(what.find("x2"), std::string::npos);
  }
  const std::vector<std::pair<std::string, SynsetId>> clash{{"dog", "dog"}, {"dog", "hound"}};
  EXPECT_THROW(merge_datasets(clash, t), DataError);
}

TEST(TextFormats, Parsers) {
  const auto m = parse_label_mappings("traffic light n06874185\n# x\ndog n02084071\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].first, "traffic light");
  EXPECT_EQ(m[0].second, "n06874185");
  EXPECT_THROW(parse_label_mappings("lonely\n"), DataError);

  const auto names = parse_synset_names(test::slurp(test::data_path("toy_names.txt")));
  EXPECT_EQ(names.at("n02094114"), "Norfolk terrier");

  const auto g = parse_hyponym_edges("a b\nb root\n", "root");
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_THROW(parse_hyponym_edges("a b c\n", "root"), DataError);
  EXPECT_THROW(parse_hyponym_edges("a a\n", "root"), DataError);

  EXPECT_TRUE(is_wordnet_offset("n02084071"));
  EXPECT_FALSE(is_wordnet_offset("dog"));
  EXPECT_FALSE(is_wordnet_offset("n0208407"));
}

}  // namespace
}  // namespace detkit
