#include "detkit/wordtree.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "detkit/error.hpp"

namespace detkit {

namespace {

std::string strip_comment(std::string line) {
  const auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  return line;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

using Path = std::vector<SynsetId>;  // root first

class PathEnumerator {
 public:
  explicit PathEnumerator(const HyponymGraph& g) : g_(g) {}

  const std::vector<Path>& paths(const SynsetId& id) {
    if (auto it = memo_.find(id); it != memo_.end()) return it->second;
    if (visiting_.count(id)) throw DataError("cycle in hyponym graph through '" + id + "'");
    visiting_.insert(id);
    std::vector<Path> out;
    if (id == g_.root()) {
      out.push_back({id});
    } else {
      for (const auto& parent : g_.parents(id)) {
        for (const auto& p : paths(parent)) {
          Path ext = p;
          ext.push_back(id);
          out.push_back(std::move(ext));
        }
      }
    }
    visiting_.erase(id);
    return memo_.emplace(id, std::move(out)).first->second;
  }

 private:
  const HyponymGraph& g_;
  std::map<SynsetId, std::vector<Path>> memo_;
  std::set<SynsetId> visiting_;
};

class TreeBuilder {
 public:
  explicit TreeBuilder(const SynsetId& root) : root_(root) { parent_of_.emplace(root, ""); }

  bool contains(const SynsetId& id) const { return parent_of_.count(id) != 0; }

  // Number of edges add() would create.
  std::size_t cost(const Path& p) const {
    std::size_t n = 0;
    for (auto it = p.rbegin(); it != p.rend() && !contains(*it); ++it) ++n;
    return n;
  }

  void add(const Path& p) {
    for (std::size_t i = p.size() - 1; i > 0 && !contains(p[i]); --i) {
      parent_of_.emplace(p[i], p[i - 1]);
    }
  }

  WordTree finish() const {
    std::map<SynsetId, std::vector<SynsetId>> children;
    for (const auto& [child, parent] : parent_of_) {
      if (child != root_) children[parent].push_back(child);
    }
    std::vector<WordTree::Node> nodes;
    std::map<SynsetId, int> index;
    std::deque<SynsetId> queue{root_};
    nodes.push_back({root_, -1});
    index[root_] = 0;
    while (!queue.empty()) {
      const SynsetId cur = queue.front();
      queue.pop_front();
      auto it = children.find(cur);
      if (it == children.end()) continue;
      auto kids = it->second;
      std::sort(kids.begin(), kids.end());
      for (const auto& kid : kids) {
        index[kid] = static_cast<int>(nodes.size());
        nodes.push_back({kid, index[cur]});
        queue.push_back(kid);
      }
    }
    return WordTree(std::move(nodes));
  }

 private:
  SynsetId root_;
  std::map<SynsetId, SynsetId> parent_of_;
};

}  // namespace

bool is_wordnet_offset(std::string_view id) {
  if (id.size() != 9 || (id[0] != 'n' && id[0] != 'v')) return false;
  return std::all_of(id.begin() + 1, id.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

HyponymGraph::HyponymGraph(SynsetId root) : root_(std::move(root)) {
  if (root_.empty()) throw InvalidArgument("hyponym graph root must be non-empty");
  parents_[root_];
}

void HyponymGraph::add_node(const SynsetId& id) {
  if (id.empty()) throw InvalidArgument("synset id must be non-empty");
  parents_[id];
}

void HyponymGraph::add_edge(const SynsetId& child, const SynsetId& parent) {
  if (child.empty() || parent.empty()) throw InvalidArgument("synset id must be non-empty");
  if (child == parent) throw DataError("self loop on '" + child + "'");
  add_node(parent);
  auto& ps = parents_[child];
  auto pos = std::lower_bound(ps.begin(), ps.end(), parent);
  if (pos != ps.end() && *pos == parent) return;
  ps.insert(pos, parent);
  ++edges_;
}

const std::vector<SynsetId>& HyponymGraph::parents(const SynsetId& id) const {
  static const std::vector<SynsetId> kNone;
  auto it = parents_.find(id);
  return it == parents_.end() ? kNone : it->second;
}

HyponymGraph parse_hyponym_edges(std::string_view text, const SynsetId& root,
                                 const std::string& source) {
  HyponymGraph g(root);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(strip_comment(line));
    std::string child, parent, extra;
    if (!(ls >> child)) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (!(ls >> parent)) throw DataError("expected '<child> <parent>'", where);
    if (ls >> extra) throw DataError("trailing text '" + extra + "'", where);
    try {
      g.add_edge(child, parent);
    } catch (const DataError& e) {
      throw DataError(e.what(), where);
    }
  }
  return g;
}

std::vector<SynsetId> parse_synset_list(std::string_view text, const std::string& source) {
  std::vector<SynsetId> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  (void)source;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(strip_comment(line));
    std::string id;
    if (ls >> id) out.push_back(id);
  }
  return out;
}

std::unordered_map<SynsetId, std::string> parse_synset_names(std::string_view text) {
  std::unordered_map<SynsetId, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id)) continue;
    std::string rest;
    std::getline(ls, rest);
    out[id] = trim(rest);
  }
  return out;
}

WordTree::WordTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvalidArgument("word tree must have a root");
  if (nodes_[0].parent != -1) throw InvalidArgument("word tree node 0 must be the root");
  const std::size_t n = nodes_.size();
  group_of_.assign(n, 0);
  child_group_.assign(n, -1);
  depth_.assign(n, 0);
  index_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = nodes_[i];
    if (node.id.empty()) throw InvalidArgument("word tree node " + std::to_string(i) + " has empty id");
    if (!index_.emplace(node.id, i).second) {
      throw InvalidArgument("duplicate synset '" + node.id + "' in word tree");
    }
    if (i == 0) continue;
    if (node.parent < 0 || static_cast<std::size_t>(node.parent) >= i) {
      throw InvalidArgument("word tree node " + std::to_string(i) + " ('" + node.id +
                            "') must have a parent listed before it");
    }
    depth_[i] = depth_[node.parent] + 1;
    if (groups_.empty() || groups_.back().parent != node.parent) {
      if (child_group_[node.parent] != -1) {
        throw InvalidArgument("children of '" + nodes_[node.parent].id +
                              "' are not contiguous in word tree");
      }
      child_group_[node.parent] = static_cast<int>(groups_.size());
      groups_.push_back({i, i, node.parent});
    }
    groups_.back().end = i + 1;
    group_of_[i] = groups_.size() - 1;
  }
}

std::optional<std::size_t> WordTree::child_group(std::size_t i) const {
  if (child_group_[i] < 0) return std::nullopt;
  return static_cast<std::size_t>(child_group_[i]);
}

std::vector<bool> WordTree::leaf_flags() const {
  std::vector<bool> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = is_leaf(i);
  return out;
}

std::optional<std::size_t> WordTree::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t WordTree::index_of(std::string_view id) const {
  auto found = find(id);
  if (!found) throw InvalidArgument("synset '" + std::string(id) + "' not in word tree");
  return *found;
}

std::vector<std::size_t> WordTree::path_from_root(std::size_t i) const {
  std::vector<std::size_t> path;
  for (int cur = static_cast<int>(i); cur >= 0; cur = nodes_[cur].parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

bool WordTree::operator==(const WordTree& o) const {
  if (nodes_.size() != o.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id != o.nodes_[i].id || nodes_[i].parent != o.nodes_[i].parent) return false;
  }
  return true;
}

WordTree build_tree(const HyponymGraph& g, std::span<const SynsetId> concepts) {
  PathEnumerator enumerate(g);
  std::vector<SynsetId> sorted(concepts.begin(), concepts.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (const auto& c : sorted) {
    if (!g.contains(c)) throw DataError("concept '" + c + "' is not in the hyponym graph");
    if (enumerate.paths(c).empty()) {
      throw DataError("concept '" + c + "' cannot reach root '" + g.root() + "'");
    }
  }

  TreeBuilder tree(g.root());
  std::vector<SynsetId> ambiguous;
  for (const auto& c : sorted) {
    const auto& paths = enumerate.paths(c);
    if (paths.size() == 1) {
      tree.add(paths.front());
    } else {
      ambiguous.push_back(c);
    }
  }

  for (const auto& c : ambiguous) {
    if (tree.contains(c)) continue;
    const Path* best = nullptr;
    std::size_t best_cost = 0;
    for (const auto& p : enumerate.paths(c)) {
      const std::size_t cost = tree.cost(p);
      if (!best || cost < best_cost || (cost == best_cost && p < *best)) {
        best = &p;
        best_cost = cost;
      }
    }
    tree.add(*best);
  }
  return tree.finish();
}

std::string format_tree(const WordTree& tree) {
  std::ostringstream os;
  for (const auto& node : tree.nodes()) os << node.id << ' ' << node.parent << '\n';
  return os.str();
}

WordTree parse_tree(std::string_view text, const std::string& source) {
  std::vector<WordTree::Node> nodes;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(strip_comment(line));
    std::string id, extra;
    long parent;
    if (!(ls >> id)) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (!(ls >> parent)) throw DataError("expected '<synset> <parent-index>'", where);
    if (ls >> extra) throw DataError("trailing text '" + extra + "'", where);
    if (parent < -1 || parent >= static_cast<long>(nodes.size())) {
      throw DataError("parent index " + std::to_string(parent) + " out of range", where);
    }
    nodes.push_back({id, static_cast<int>(parent)});
  }
  try {
    return WordTree(std::move(nodes));
  } catch (const InvalidArgument& e) {
    throw DataError(e.what(), source);
  }
}

TreeDistribution grouped_softmax(std::span<const double> logits, const WordTree& tree) {
  if (logits.size() != tree.size()) {
    throw InvalidArgument("grouped_softmax: " + std::to_string(logits.size()) +
                          " logits for a tree of " + std::to_string(tree.size()) + " nodes");
  }
  TreeDistribution out;
  out.conditional.assign(tree.size(), 0.0);
  out.conditional[0] = 1.0;
  for (const auto& grp : tree.groups()) {
    double mx = -INFINITY;
    for (std::size_t i = grp.begin; i < grp.end; ++i) {
      if (!std::isfinite(logits[i])) throw InvalidArgument("grouped_softmax: non-finite logit");
      mx = std::max(mx, logits[i]);
    }
    double sum = 0.0;
    for (std::size_t i = grp.begin; i < grp.end; ++i) {
      out.conditional[i] = std::exp(logits[i] - mx);
      sum += out.conditional[i];
    }
    for (std::size_t i = grp.begin; i < grp.end; ++i) out.conditional[i] /= sum;
  }
  return out;
}

double absolute_prob(const TreeDistribution& dist, std::size_t node, const WordTree& tree,
                     double p_object) {
  if (node >= tree.size()) throw InvalidArgument("absolute_prob: node index out of range");
  if (dist.conditional.size() != tree.size()) {
    throw InvalidArgument("absolute_prob: distribution does not match tree");
  }
  if (!(p_object >= 0.0 && p_object <= 1.0)) {
    throw InvalidArgument("absolute_prob: p_object must lie in [0,1]");
  }
  double p = p_object;
  for (int cur = static_cast<int>(node); cur > 0; cur = tree.node(cur).parent) {
    p *= dist.conditional[cur];
  }
  return p;
}

double absolute_prob(const TreeDistribution& dist, std::string_view node, const WordTree& tree,
                     double p_object) {
  return absolute_prob(dist, tree.index_of(node), tree, p_object);
}

std::vector<bool> propagate_labels(std::string_view node, const WordTree& tree) {
  std::vector<bool> targets(tree.size(), false);
  for (int cur = static_cast<int>(tree.index_of(node)); cur >= 0; cur = tree.node(cur).parent) {
    targets[cur] = true;
  }
  return targets;
}

std::size_t traverse_predict(const TreeDistribution& dist, const WordTree& tree,
                             double p_object, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw InvalidArgument("traverse_predict: threshold must lie in (0,1]");
  }
  if (dist.conditional.size() != tree.size()) {
    throw InvalidArgument("traverse_predict: distribution does not match tree");
  }
  std::size_t cur = 0;
  double running = p_object;
  while (auto grp_idx = tree.child_group(cur)) {
    const auto& grp = tree.groups()[*grp_idx];
    std::size_t best = grp.begin;
    for (std::size_t i = grp.begin + 1; i < grp.end; ++i) {
      if (dist.conditional[i] > dist.conditional[best]) best = i;
    }
    const double next = running * dist.conditional[best];
    if (next < threshold) break;
    running = next;
    cur = best;
  }
  return cur;
}

std::optional<std::size_t> LabelMap::node_for(std::string_view label) const {
  auto it = label_to_node.find(std::string(label));
  if (it == label_to_node.end()) return std::nullopt;
  return it->second;
}

LabelMap merge_datasets(std::span<const std::pair<std::string, SynsetId>> mappings,
                        const WordTree& tree) {
  LabelMap out;
  std::vector<std::string> misses;
  for (const auto& [label, synset] : mappings) {
    auto node = tree.find(synset);
    if (!node) {
      misses.push_back(label + " -> " + synset);
      continue;
    }
    auto [it, inserted] = out.label_to_node.emplace(label, *node);
    if (!inserted) {
      if (it->second != *node) {
        throw DataError("label '" + label + "' mapped to both '" + tree.node(it->second).id +
                        "' and '" + synset + "'");
      }
      continue;
    }
    out.node_to_labels[*node].push_back(label);
  }
  if (!misses.empty()) {
    std::string msg = "synsets missing from word tree:";
    for (const auto& m : misses) msg += " [" + m + "]";
    throw DataError(msg);
  }
  for (const auto& [node, labels] : out.node_to_labels) {
    if (labels.size() > 1) out.collisions.push_back(node);
  }
  return out;
}

std::vector<std::pair<std::string, SynsetId>> parse_label_mappings(std::string_view text,
                                                                   const std::string& source) {
  std::vector<std::pair<std::string, SynsetId>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto sp = body.find_last_of(" \t");
    if (sp == std::string::npos) {
      throw DataError("expected '<label> <synset>'", source + ":" + std::to_string(lineno));
    }
    out.emplace_back(trim(body.substr(0, sp)), body.substr(sp + 1));
  }
  return out;
}

}  // namespace detkit
