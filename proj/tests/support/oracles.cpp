#include "support/oracles.hpp"

#include <algorithm>
#include <functional>
#include <utility>

namespace sara::testing {

namespace {

// Sorted multiset of edge labels from node index `s` to node index `t`.
std::vector<std::string> labels_between(const AmrGraph& g, std::size_t s,
                                        std::size_t t) {
  std::vector<std::string> out;
  for (const AmrEdge& e : g.edges())
    if (g.node_index(e.source) == s && g.node_index(e.target) == t)
      out.push_back(e.label);
  std::sort(out.begin(), out.end());
  return out;
}

struct IsoState {
  const AmrGraph& a;
  const AmrGraph& b;
  std::vector<std::size_t> map_ab;  // a index -> b index
  std::vector<bool> used_b;

  bool compatible(std::size_t ai, std::size_t bi) const {
    const AmrNode& an = a.nodes()[ai];
    const AmrNode& bn = b.nodes()[bi];
    if (an.concept_label != bn.concept_label) return false;
    if (an.is_attribute != bn.is_attribute) return false;
    // Edge-label multisets against every node already mapped, both ways.
    for (std::size_t aj = 0; aj < map_ab.size(); ++aj) {
      if (map_ab[aj] == a.nodes().size()) continue;
      const std::size_t bj = map_ab[aj];
      if (labels_between(a, ai, aj) != labels_between(b, bi, bj)) return false;
      if (labels_between(a, aj, ai) != labels_between(b, bj, bi)) return false;
    }
    return true;
  }

  bool extend(std::size_t ai) {
    if (ai == a.nodes().size()) return true;
    for (std::size_t bi = 0; bi < b.nodes().size(); ++bi) {
      if (used_b[bi] || !compatible(ai, bi)) continue;
      map_ab[ai] = bi;
      used_b[bi] = true;
      if (extend(ai + 1)) return true;
      map_ab[ai] = a.nodes().size();
      used_b[bi] = false;
    }
    return false;
  }
};

}  // namespace

bool isomorphic(const AmrGraph& a, const AmrGraph& b) {
  const std::size_t n = a.nodes().size();
  if (n != b.nodes().size() || a.edges().size() != b.edges().size())
    return false;

  IsoState state{a, b, std::vector<std::size_t>(n, n),
                 std::vector<bool>(n, false)};
  // Roots must correspond; pin them before the search. Index 0 of the map
  // order is whatever node the root happens to be, so map explicitly.
  const std::size_t ra = a.node_index(a.root());
  const std::size_t rb = b.node_index(b.root());
  if (!state.compatible(ra, rb)) return false;
  state.map_ab[ra] = rb;
  state.used_b[rb] = true;

  // Assign the remaining nodes in index order, skipping the pinned root.
  std::function<bool(std::size_t)> search = [&](std::size_t ai) -> bool {
    while (ai < n && state.map_ab[ai] != n) ++ai;
    if (ai == n) return true;
    for (std::size_t bi = 0; bi < n; ++bi) {
      if (state.used_b[bi] || !state.compatible(ai, bi)) continue;
      state.map_ab[ai] = bi;
      state.used_b[bi] = true;
      if (search(ai + 1)) return true;
      state.map_ab[ai] = n;
      state.used_b[bi] = false;
    }
    return false;
  };
  if (!search(0)) return false;

  // The incremental label checks already imply edge equality, but remapping
  // the whole edge multiset is cheap and closes any gap in the pruning.
  std::vector<std::string> ea, eb;
  for (const AmrEdge& e : a.edges())
    ea.push_back(std::to_string(state.map_ab[a.node_index(e.source)]) + " " +
                 e.label + " " +
                 std::to_string(state.map_ab[a.node_index(e.target)]));
  for (const AmrEdge& e : b.edges())
    eb.push_back(std::to_string(b.node_index(e.source)) + " " + e.label + " " +
                 std::to_string(b.node_index(e.target)));
  std::sort(ea.begin(), ea.end());
  std::sort(eb.begin(), eb.end());
  return ea == eb;
}

std::set<ProjectedEdge> project_reference(const AmrGraph& graph,
                                          const Alignment& alignment,
                                          ProjectionMode mode) {
  std::set<ProjectedEdge> out;
  for (const AmrEdge& e : graph.edges()) {
    const auto s = alignment.pairs.find(e.source);
    const auto t = alignment.pairs.find(e.target);
    if (s == alignment.pairs.end() || s->second.empty()) continue;
    if (t == alignment.pairs.end() || t->second.empty()) continue;
    if (mode == ProjectionMode::AllPairs) {
      for (std::size_t i : s->second)
        for (std::size_t j : t->second) out.insert({i, e.label, j});
    } else {
      out.insert({*s->second.begin(), e.label, *t->second.begin()});
    }
  }
  return out;
}

namespace {

std::size_t depth_from(const AmrGraph& g,
                       const std::vector<std::vector<std::size_t>>& adj,
                       std::size_t v) {
  std::size_t best = 0;
  for (std::size_t w : adj[v])
    best = std::max(best, 1 + depth_from(g, adj, w));
  return best;
}

}  // namespace

std::size_t depth_reference(const AmrGraph& graph) {
  std::vector<std::vector<std::size_t>> adj(graph.nodes().size());
  for (const AmrEdge& e : graph.edges())
    adj[graph.node_index(e.source)].push_back(graph.node_index(e.target));
  return depth_from(graph, adj, graph.node_index(graph.root()));
}

AmrGraph random_graph(Rng& rng, std::size_t max_var_nodes,
                      std::size_t max_attr_nodes) {
  static const std::vector<std::string> concepts = {
      "want-01", "go-02",  "see-01", "run-02", "boy",  "girl",
      "dog",     "city",   "house",  "person", "name", "thing"};
  static const std::vector<std::string> labels = {
      ":arg0", ":arg1", ":arg2", ":mod", ":time", ":location", ":poss"};
  static const std::vector<std::string> attr_concepts = {
      "6", "2", "42", "-", "\"New York\"", "\"Grace\""};
  static const std::vector<std::string> attr_labels = {":quant", ":polarity",
                                                       ":wiki", ":value"};
  auto pick = [&rng](const std::vector<std::string>& pool) {
    return pool[rng.uniform_int(pool.size())];
  };

  AmrGraph g;
  const std::size_t n_var = 1 + rng.uniform_int(max_var_nodes);
  for (std::size_t i = 0; i < n_var; ++i)
    g.add_node({"n" + std::to_string(i), pick(concepts), false});
  g.set_root("n0");

  // Tree backbone keeps every node reachable; edges always point from a
  // lower to a higher index, so the graph stays acyclic by construction.
  for (std::size_t i = 1; i < n_var; ++i)
    g.add_edge({"n" + std::to_string(rng.uniform_int(i)), pick(labels),
                "n" + std::to_string(i)});
  if (n_var > 1) {
    const std::size_t extra = rng.uniform_int(3);
    for (std::size_t k = 0; k < extra; ++k) {
      const std::size_t i = rng.uniform_int(n_var - 1);
      const std::size_t j = i + 1 + rng.uniform_int(n_var - 1 - i);
      g.add_edge({"n" + std::to_string(i), pick(labels),
                  "n" + std::to_string(j)});
    }
  }

  const std::size_t n_attr =
      max_attr_nodes == 0 ? 0 : rng.uniform_int(max_attr_nodes + 1);
  for (std::size_t k = 0; k < n_attr; ++k) {
    const std::string id = "a" + std::to_string(k);
    g.add_node({id, pick(attr_concepts), true});
    g.add_edge({"n" + std::to_string(rng.uniform_int(n_var)),
                pick(attr_labels), id});
  }
  g.validate();
  return g;
}

Alignment random_alignment(const AmrGraph& graph, Rng& rng,
                           std::size_t sequence_length) {
  std::vector<std::size_t> pool(sequence_length);
  for (std::size_t i = 0; i < sequence_length; ++i) pool[i] = i;
  for (std::size_t i = sequence_length; i > 1; --i)
    std::swap(pool[i - 1], pool[rng.uniform_int(i)]);

  Alignment out;
  std::size_t next = 0;
  for (const AmrNode& n : graph.nodes()) {
    if (rng.uniform() < 0.2) continue;  // leave some nodes unaligned
    const std::size_t take = 1 + rng.uniform_int(3);
    std::set<std::size_t> tokens;
    for (std::size_t k = 0; k < take && next < pool.size(); ++k)
      tokens.insert(pool[next++]);
    if (!tokens.empty()) out.pairs.emplace(n.id, std::move(tokens));
  }
  return out;
}

const std::vector<std::string>& curated_penman_suite() {
  static const std::vector<std::string> suite = {
      // Plain tree.
      "(w / want-01 :arg0 (b / boy) :arg1 (g / go-02))",
      // Reentrancy through a variable reference.
      "(w / want-01 :arg0 (b / boy) :arg1 (g / go-02 :arg0 b))",
      // Parallel edges with the same label plus reentrancy.
      "(h / hum-02 :arg0 (p / police) "
      ":time (w / walk-01 :arg0 (b / boy) :arg0 b))",
      // Quoted strings, numeric attributes, polarity.
      "(s / say-01 :arg0 (p / person :name (n / name :op1 \"Grace\" "
      ":op2 \"Hopper\")) :arg1 (t / thing :quant 42 :polarity -))",
      // Escaped quotes survive verbatim.
      "(q / quote-01 :arg1 \"she said \\\"ok\\\"\")",
      // The same node referenced from several relations.
      "(m / multi-sentence :arg0 (c / common) :arg1 c :arg2 c)",
      // Cross reentrancy between subtrees.
      "(k / know-01 :arg0 (i / i) "
      ":arg1 (l / like-01 :arg0 (y / you) :arg1 i))",
      // Attribute-heavy flat node.
      "(d / date-entity :year 2024 :month 7 :day 15)",
      // Deep chain.
      "(t / think-01 :arg1 (s / seem-01 :arg1 (w / work-09 "
      ":arg1 (m / machine :mod (n / new)))))",
      // Bare non-variable constant becomes an attribute.
      "(r / run-02 :manner fast)",
      // Single node, no relations.
      "(t / thing)",
  };
  return suite;
}

std::vector<std::string> base_vocab_tokens(std::vector<std::string> extra) {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                     "[MASK]"};
  for (std::size_t i = 1; i <= 15; ++i)
    tokens.push_back("[Utter_" + std::to_string(i) + "]");
  tokens.push_back("<url>");
  for (std::string& t : extra) tokens.push_back(std::move(t));
  return tokens;
}

}  // namespace sara::testing
