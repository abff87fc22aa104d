#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace detkit {

// WordNet "physical entity"; the default root of built trees.
inline constexpr std::string_view kDefaultRootSynset = "n00001930";

using SynsetId = std::string;

// True for WordNet-style offsets such as "n02084071".
bool is_wordnet_offset(std::string_view id);

// Hyponym DAG: edges point from child (hyponym) to parent (hypernym).
class HyponymGraph {
 public:
  explicit HyponymGraph(SynsetId root = SynsetId(kDefaultRootSynset));

  void add_edge(const SynsetId& child, const SynsetId& parent);
  void add_node(const SynsetId& id);

  const SynsetId& root() const { return root_; }
  bool contains(const SynsetId& id) const { return parents_.count(id) != 0; }
  // Parents in insertion-independent (sorted) order.
  const std::vector<SynsetId>& parents(const SynsetId& id) const;
  std::size_t node_count() const { return parents_.size(); }
  std::size_t edge_count() const { return edges_; }

 private:
  SynsetId root_;
  std::map<SynsetId, std::vector<SynsetId>> parents_;
  std::size_t edges_ = 0;
};

// `<child> <parent>` per line, as in WordNet's is_a listings.
HyponymGraph parse_hyponym_edges(std::string_view text, const SynsetId& root,
                                 const std::string& source = "<edges>");

// One synset per line (first whitespace-separated token); '#' comments.
std::vector<SynsetId> parse_synset_list(std::string_view text,
                                        const std::string& source = "<concepts>");

// `<synset> <human label...>` per line.
std::unordered_map<SynsetId, std::string> parse_synset_names(std::string_view text);

// Rooted tree over synsets. Nodes are stored parents-first with every sibling
// group contiguous, so a logit vector aligns with node order and each group
// is a single [begin, end) range.
class WordTree {
 public:
  struct Node {
    SynsetId id;
    int parent = -1;  // -1 only for the root at index 0
  };
  struct Group {
    std::size_t begin = 0;
    std::size_t end = 0;
    int parent = -1;
    std::size_t size() const { return end - begin; }
  };

  WordTree() = default;
  // Validates: single root at index 0, parent index < child index, sibling
  // contiguity, unique ids.
  explicit WordTree(std::vector<Node> nodes);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  const SynsetId& root() const { return nodes_.front().id; }

  const std::vector<Group>& groups() const { return groups_; }
  // Group holding node i; undefined for the root.
  std::size_t group_of(std::size_t i) const { return group_of_[i]; }
  // Children group of node i, if it has children.
  std::optional<std::size_t> child_group(std::size_t i) const;
  bool is_leaf(std::size_t i) const { return !child_group(i).has_value(); }
  std::vector<bool> leaf_flags() const;
  int depth(std::size_t i) const { return depth_[i]; }

  std::optional<std::size_t> find(std::string_view id) const;
  // Throws InvalidArgument for unknown ids.
  std::size_t index_of(std::string_view id) const;

  // Node indices from the root down to i, inclusive.
  std::vector<std::size_t> path_from_root(std::size_t i) const;

  bool operator==(const WordTree& o) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Group> groups_;
  std::vector<std::size_t> group_of_;
  std::vector<int> child_group_;
  std::vector<int> depth_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Greedy minimal-growth extraction of a tree from the DAG. Concepts with a
// single root path go first; the rest, in lexicographic order, each take the
// root path adding the fewest new edges (ties: lexicographically smallest
// path, compared root-first). A path stops growing at the first node already
// in the tree, so shared prefixes cost nothing.
WordTree build_tree(const HyponymGraph& g, std::span<const SynsetId> concepts);

// `<synset> <parent-line-index|-1>` per line.
std::string format_tree(const WordTree& tree);
WordTree parse_tree(std::string_view text, const std::string& source = "<tree>");

// Conditional probabilities aligned with tree nodes; root entry is 1.
struct TreeDistribution {
  std::vector<double> conditional;
};

// Independent softmax within every sibling group. The root logit is ignored.
TreeDistribution grouped_softmax(std::span<const double> logits, const WordTree& tree);

// p_object times the product of conditionals from root to `node`.
double absolute_prob(const TreeDistribution& dist, std::string_view node,
                     const WordTree& tree, double p_object = 1.0);
double absolute_prob(const TreeDistribution& dist, std::size_t node,
                     const WordTree& tree, double p_object = 1.0);

// Targets: 1 at the node and each ancestor up to the root, 0 elsewhere.
std::vector<bool> propagate_labels(std::string_view node, const WordTree& tree);

// Greedy descent along the most probable child. Stops before a step that
// would take the running absolute probability below `threshold`, or at a
// leaf. Ties among children resolve to the lowest node index.
std::size_t traverse_predict(const TreeDistribution& dist, const WordTree& tree,
                             double p_object, double threshold);

// Dataset label <-> tree node correspondence.
struct LabelMap {
  std::map<std::string, std::size_t> label_to_node;
  std::map<std::size_t, std::vector<std::string>> node_to_labels;
  // Synset nodes that received more than one dataset label.
  std::vector<std::size_t> collisions;

  std::optional<std::size_t> node_for(std::string_view label) const;
};

// Throws DataError naming every synset absent from the tree.
LabelMap merge_datasets(std::span<const std::pair<std::string, SynsetId>> mappings,
                        const WordTree& tree);

// `<dataset label...> <synset>` per line; the synset is the last token.
std::vector<std::pair<std::string, SynsetId>> parse_label_mappings(
    std::string_view text, const std::string& source = "<mapping>");

}  // namespace detkit
