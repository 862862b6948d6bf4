#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sara/amr_graph.hpp"

namespace sara {

// Node-to-token alignment: one-to-K from the node side; a token belongs to
// at most one node. Keys are node ids, values are token indices into the
// formatted dialogue sequence. std::map keeps iteration deterministic.
struct Alignment {
  std::map<std::string, std::set<std::size_t>> pairs;

  // Checks node existence, token bounds, and token disjointness across nodes.
  void validate(const AmrGraph& graph, std::size_t sequence_length) const;
};

struct ProjectedEdge {
  std::size_t head = 0;
  std::string label;
  std::size_t dependent = 0;

  friend bool operator==(const ProjectedEdge&, const ProjectedEdge&) = default;
  friend auto operator<=>(const ProjectedEdge&, const ProjectedEdge&) = default;
};

// Sorted, duplicate-free set of token-level relation triples.
struct ProjectedEdgeSet {
  std::vector<ProjectedEdge> triples;
};

enum class ProjectionMode {
  FirstSubword,  // one triple per edge, at each endpoint's lowest token index
  AllPairs,      // one triple per aligned token pair (cross product)
};

// Expands a word-level alignment through the word -> subword map: a node
// aligned to word j maps to every subword token of j.
Alignment extend_alignment(
    const std::map<std::string, std::vector<std::size_t>>& word_alignment,
    const std::vector<std::vector<std::size_t>>& subword_map);

// Token indices aligned to any node; everything else is non-semantic.
std::set<std::size_t> semantic_token_set(const Alignment& alignment);

// Projects graph edges onto token pairs. Edges with an unaligned endpoint
// are skipped (not an error).
ProjectedEdgeSet project_edges(const AmrGraph& graph, const Alignment& alignment,
                               ProjectionMode mode = ProjectionMode::FirstSubword);

// Parses JAMR aligner records "start-end|path[+path...]", whitespace
// separated, where path addresses a node by child indices from the root
// ("0" = root, "0.1" = its second child). Returns a word-level alignment
// (node id -> word indices in [start, end)).
std::map<std::string, std::vector<std::size_t>> parse_jamr_alignment(
    const AmrGraph& graph, const std::string& line);

}  // namespace sara
