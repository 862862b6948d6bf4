#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sara/errors.hpp"

namespace sara {

// One concept in an AMR graph. Attribute leaves (numbers, quoted strings,
// polarity "-") are ordinary nodes with is_attribute set; their concept_label
// keeps the surface form verbatim, quotes included.
struct AmrNode {
  std::string id;
  std::string concept_label;
  bool is_attribute = false;
};

// Directed labeled edge; label is ":"-prefixed (":arg0", ":time", ...).
struct AmrEdge {
  std::string source;
  std::string label;
  std::string target;
};

struct GraphComplexity {
  std::size_t size = 0;   // node count
  std::size_t depth = 0;  // longest root-to-node distance in edges
};

// Rooted directed acyclic graph of concepts and labeled relations.
// Nodes and edges keep insertion order; serialization and linearization
// are deterministic in that order.
class AmrGraph {
public:
  std::size_t add_node(AmrNode node);
  void add_edge(AmrEdge edge);
  void set_root(std::string id);

  const std::vector<AmrNode>& nodes() const { return nodes_; }
  const std::vector<AmrEdge>& edges() const { return edges_; }
  const std::string& root() const { return root_; }

  bool has_node(std::string_view id) const;
  const AmrNode& node(std::string_view id) const;
  std::size_t node_index(std::string_view id) const;

  // Out-edges of a node, in insertion order.
  std::vector<std::size_t> out_edges(std::string_view id) const;

  // Checks all structural invariants: unique non-empty ids, non-empty
  // concepts, resolvable colon-prefixed edges, no self-loops, root present,
  // every node reachable from the root, and acyclicity.
  void validate() const;

private:
  std::vector<AmrNode> nodes_;
  std::vector<AmrEdge> edges_;
  std::string root_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parses a single PENMAN expression. Reentrant variable mentions become
// extra edges to the declared node; bare tokens that are never declared and
// do not look like variables become attribute nodes. Errors (unbalanced
// parentheses, duplicate declaration, relation with no target, dangling
// variable reference) carry the byte offset.
AmrGraph parse_penman(std::string_view text);

// Emits PENMAN text that re-parses to an isomorphic graph. Variables are
// renamed deterministically; per-node edge order is insertion order.
std::string serialize_penman(const AmrGraph& graph);

// The variable names serialize_penman would assign, keyed by node id.
// Attribute nodes carry no variable and are absent. Callers that store
// node-keyed data (alignments) alongside serialized text must re-key
// through this map or the text and the data drift apart.
std::map<std::string, std::string> canonical_variable_names(const AmrGraph& graph);

// Connects utterance graphs under a fresh "dialogue-root" node, one
// ":speaker-<label>" edge per utterance. Node ids are re-namespaced as
// "u<i>.<id>" so inputs cannot collide.
AmrGraph build_dialogue_graph(const std::vector<AmrGraph>& utterance_graphs,
                              const std::vector<std::string>& speakers);

// Depth-first preorder flattening: "(", concept, relation labels, ")" as
// separate tokens; a reentrant node degrades to its bare concept token on
// revisits.
std::vector<std::string> linearize(const AmrGraph& graph);

GraphComplexity complexity(const AmrGraph& graph);

}  // namespace sara
