#include "sara/amr_graph.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace sara {

std::size_t AmrGraph::add_node(AmrNode node) {
  if (node.id.empty()) throw DataError("node id must be non-empty");
  if (node.concept_label.empty())
    throw DataError("node concept must be non-empty (id '" + node.id + "')");
  if (index_.count(node.id))
    throw DataError("duplicate node id '" + node.id + "'");
  index_.emplace(node.id, nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void AmrGraph::add_edge(AmrEdge edge) { edges_.push_back(std::move(edge)); }

void AmrGraph::set_root(std::string id) { root_ = std::move(id); }

bool AmrGraph::has_node(std::string_view id) const {
  return index_.count(std::string(id)) > 0;
}

const AmrNode& AmrGraph::node(std::string_view id) const {
  return nodes_[node_index(id)];
}

std::size_t AmrGraph::node_index(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end())
    throw DataError("unknown node id '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::size_t> AmrGraph::out_edges(std::string_view id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (edges_[i].source == id) out.push_back(i);
  return out;
}

namespace {

// Colors: 0 unvisited, 1 on stack, 2 done. Throws on a directed cycle.
void dfs_check_acyclic(const AmrGraph& g,
                       const std::vector<std::vector<std::size_t>>& adj,
                       std::size_t v, std::vector<int>& color) {
  color[v] = 1;
  for (std::size_t w : adj[v]) {
    if (color[w] == 1)
      throw DataError("cycle detected through node '" + g.nodes()[w].id +
                      "': AMR graphs are acyclic");
    if (color[w] == 0) dfs_check_acyclic(g, adj, w, color);
  }
  color[v] = 2;
}

std::vector<std::vector<std::size_t>> adjacency(const AmrGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.nodes().size());
  for (const AmrEdge& e : g.edges())
    adj[g.node_index(e.source)].push_back(g.node_index(e.target));
  return adj;
}

}  // namespace

void AmrGraph::validate() const {
  if (nodes_.empty()) throw DataError("graph has no nodes");
  if (root_.empty() || !has_node(root_))
    throw DataError("graph root '" + root_ + "' is not a node");
  for (const AmrEdge& e : edges_) {
    if (e.label.size() < 2 || e.label[0] != ':')
      throw DataError("edge label '" + e.label + "' must be ':'-prefixed");
    if (!has_node(e.source) || !has_node(e.target))
      throw DataError("edge " + e.source + " " + e.label + " " + e.target +
                      " refers to a missing node");
    if (e.source == e.target)
      throw DataError("self-loop on node '" + e.source + "'");
  }
  // Reachability from the root over directed edges.
  auto adj = adjacency(*this);
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<std::size_t> stack{node_index(root_)};
  seen[stack[0]] = true;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!seen[i])
      throw DataError("node '" + nodes_[i].id + "' unreachable from root");
  std::vector<int> color(nodes_.size(), 0);
  dfs_check_acyclic(*this, adj, node_index(root_), color);
}

// ---------------------------------------------------------------------------
// PENMAN parsing
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { LParen, RParen, Slash, Role, Symbol, Str, End };
  Kind kind;
  std::string text;
  std::size_t offset;
};

bool is_delim(char c) {
  return c == '(' || c == ')' || c == '/' || std::isspace(static_cast<unsigned char>(c));
}

std::vector<Token> lex_penman(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '(') {
      out.push_back({Token::LParen, "(", i++});
    } else if (c == ')') {
      out.push_back({Token::RParen, ")", i++});
    } else if (c == '/') {
      out.push_back({Token::Slash, "/", i++});
    } else if (c == '"') {
      std::size_t start = i++;
      while (i < n && text[i] != '"') {
        if (text[i] == '\\' && i + 1 < n) ++i;  // keep escapes verbatim
        ++i;
      }
      if (i >= n) throw ParseError("unterminated string", start);
      ++i;  // closing quote
      out.push_back({Token::Str, std::string(text.substr(start, i - start)), start});
    } else if (c == ':') {
      std::size_t start = i++;
      while (i < n && !is_delim(text[i])) ++i;
      if (i - start < 2) throw ParseError("empty relation label", start);
      out.push_back({Token::Role, std::string(text.substr(start, i - start)), start});
    } else {
      std::size_t start = i;
      while (i < n && !is_delim(text[i]) && text[i] != '"') ++i;
      out.push_back({Token::Symbol, std::string(text.substr(start, i - start)), start});
    }
  }
  out.push_back({Token::End, "", n});
  return out;
}

// Classic AMR variable shape: one lowercase letter plus optional digits.
bool looks_like_variable(std::string_view s) {
  if (s.empty() || s[0] < 'a' || s[0] > 'z') return false;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

class PenmanParser {
public:
  explicit PenmanParser(std::string_view text) : toks_(lex_penman(text)) {}

  AmrGraph parse() {
    const Token& first = peek();
    if (first.kind == Token::End) throw ParseError("empty input", 0);
    if (first.kind != Token::LParen)
      throw ParseError("expected '('", first.offset);
    root_ = parse_node();
    if (peek().kind == Token::RParen)
      throw ParseError("unbalanced parentheses: unexpected ')'", peek().offset);
    if (peek().kind != Token::End)
      throw ParseError("trailing content after expression", peek().offset);
    resolve_pending();

    AmrGraph graph;
    for (AmrNode& n : nodes_) graph.add_node(std::move(n));
    for (AmrEdge& e : edges_) graph.add_edge(std::move(e));
    graph.set_root(root_);
    graph.validate();
    return graph;
  }

private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }

  bool declared(const std::string& var) const {
    return declared_.count(var) > 0;
  }

  std::string fresh_attribute_id() {
    while (true) {
      std::string id = "~c" + std::to_string(attr_counter_++);
      if (!declared(id)) return id;
    }
  }

  void declare(std::string id, std::string concept_label, bool attribute) {
    declared_.insert(id);
    nodes_.push_back({std::move(id), std::move(concept_label), attribute});
  }

  // "(" var "/" concept relation* ")"
  std::string parse_node() {
    take();  // '('
    const Token& var = take();
    if (var.kind != Token::Symbol)
      throw ParseError("expected variable after '('", var.offset);
    if (declared(var.text))
      throw ParseError("duplicate variable declaration '" + var.text + "'",
                       var.offset);
    const Token& slash = take();
    if (slash.kind != Token::Slash)
      throw ParseError("expected '/' after variable '" + var.text + "'",
                       slash.offset);
    const Token& concept_tok = take();
    if (concept_tok.kind != Token::Symbol && concept_tok.kind != Token::Str)
      throw ParseError("expected concept after '/'", concept_tok.offset);
    declare(var.text, concept_tok.text, false);

    while (true) {
      const Token& t = peek();
      if (t.kind == Token::RParen) {
        take();
        return var.text;
      }
      if (t.kind == Token::Role) {
        take();
        parse_relation(var.text, t);
        continue;
      }
      if (t.kind == Token::End)
        throw ParseError("unbalanced parentheses: expected ')'", t.offset);
      throw ParseError("unexpected token '" + t.text + "'", t.offset);
    }
  }

  void parse_relation(const std::string& source, const Token& role) {
    const Token& t = peek();
    switch (t.kind) {
      case Token::LParen: {
        std::string child = parse_node();
        edges_.push_back({source, role.text, child});
        return;
      }
      case Token::Str: {
        take();
        std::string id = fresh_attribute_id();
        declare(id, t.text, true);
        edges_.push_back({source, role.text, id});
        return;
      }
      case Token::Symbol: {
        take();
        // Reference or constant: decided once all declarations are known.
        edges_.push_back({source, role.text, ""});
        pending_.push_back({edges_.size() - 1, t.text, t.offset});
        return;
      }
      default:
        throw ParseError("relation '" + role.text + "' has no target",
                         role.offset);
    }
  }

  void resolve_pending() {
    for (const Pending& p : pending_) {
      if (declared(p.token)) {
        edges_[p.edge_index].target = p.token;
      } else if (looks_like_variable(p.token)) {
        throw ParseError("dangling variable reference '" + p.token + "'",
                         p.offset);
      } else {
        std::string id = fresh_attribute_id();
        declare(id, p.token, true);
        edges_[p.edge_index].target = id;
      }
    }
  }

  struct Pending {
    std::size_t edge_index;
    std::string token;
    std::size_t offset;
  };

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<AmrNode> nodes_;
  std::vector<AmrEdge> edges_;
  std::set<std::string> declared_;
  std::string root_;
  std::vector<Pending> pending_;
  std::size_t attr_counter_ = 0;
};

}  // namespace

AmrGraph parse_penman(std::string_view text) {
  return PenmanParser(text).parse();
}

// ---------------------------------------------------------------------------
// Serialization and linearization
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> make_variable_names(const AmrGraph& g) {
  std::vector<std::string> names(g.nodes().size());
  std::unordered_map<char, int> letter_count;
  for (std::size_t i = 0; i < g.nodes().size(); ++i) {
    const AmrNode& n = g.nodes()[i];
    if (n.is_attribute) continue;
    char letter = 'x';
    for (char c : n.concept_label) {
      unsigned char u = static_cast<unsigned char>(c);
      if (std::isalpha(u)) {
        letter = static_cast<char>(std::tolower(u));
        break;
      }
    }
    int k = ++letter_count[letter];
    names[i] = (k == 1) ? std::string(1, letter)
                        : std::string(1, letter) + std::to_string(k);
  }
  return names;
}

void serialize_node(const AmrGraph& g, std::size_t v,
                    const std::vector<std::string>& vars,
                    std::vector<bool>& visited, std::ostringstream& out) {
  visited[v] = true;
  const AmrNode& n = g.nodes()[v];
  out << '(' << vars[v] << " / " << n.concept_label;
  for (const AmrEdge& e : g.edges()) {
    if (e.source != n.id) continue;
    std::size_t w = g.node_index(e.target);
    out << ' ' << e.label << ' ';
    const AmrNode& t = g.nodes()[w];
    if (t.is_attribute) {
      out << t.concept_label;
    } else if (visited[w]) {
      out << vars[w];
    } else {
      serialize_node(g, w, vars, visited, out);
    }
  }
  out << ')';
}

}  // namespace

std::string serialize_penman(const AmrGraph& graph) {
  graph.validate();  // reports unreachable nodes before emitting anything
  auto vars = make_variable_names(graph);
  std::vector<bool> visited(graph.nodes().size(), false);
  std::ostringstream out;
  serialize_node(graph, graph.node_index(graph.root()), vars, visited, out);
  return out.str();
}

std::map<std::string, std::string> canonical_variable_names(const AmrGraph& graph) {
  graph.validate();
  const auto vars = make_variable_names(graph);
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < graph.nodes().size(); ++i)
    if (!graph.nodes()[i].is_attribute) out[graph.nodes()[i].id] = vars[i];
  return out;
}

AmrGraph build_dialogue_graph(const std::vector<AmrGraph>& utterance_graphs,
                              const std::vector<std::string>& speakers) {
  if (utterance_graphs.empty())
    throw DataError("dialogue graph needs at least one utterance graph");
  if (utterance_graphs.size() != speakers.size())
    throw DataError("got " + std::to_string(utterance_graphs.size()) +
                    " utterance graphs but " + std::to_string(speakers.size()) +
                    " speakers");
  AmrGraph out;
  out.add_node({"dlg", "dialogue-root", false});
  out.set_root("dlg");
  for (std::size_t i = 0; i < utterance_graphs.size(); ++i) {
    const AmrGraph& g = utterance_graphs[i];
    g.validate();
    const std::string prefix = "u" + std::to_string(i) + ".";
    for (const AmrNode& n : g.nodes())
      out.add_node({prefix + n.id, n.concept_label, n.is_attribute});
    out.add_edge({"dlg", ":speaker-" + speakers[i], prefix + g.root()});
    for (const AmrEdge& e : g.edges())
      out.add_edge({prefix + e.source, e.label, prefix + e.target});
  }
  return out;
}

namespace {

void linearize_node(const AmrGraph& g, std::size_t v, std::vector<bool>& visited,
                    std::vector<std::string>& out) {
  if (visited[v]) {
    out.push_back(g.nodes()[v].concept_label);
    return;
  }
  visited[v] = true;
  const AmrNode& n = g.nodes()[v];
  out.push_back("(");
  out.push_back(n.concept_label);
  for (const AmrEdge& e : g.edges()) {
    if (e.source != n.id) continue;
    out.push_back(e.label);
    linearize_node(g, g.node_index(e.target), visited, out);
  }
  out.push_back(")");
}

}  // namespace

std::vector<std::string> linearize(const AmrGraph& graph) {
  graph.validate();
  std::vector<bool> visited(graph.nodes().size(), false);
  std::vector<std::string> out;
  linearize_node(graph, graph.node_index(graph.root()), visited, out);
  return out;
}

GraphComplexity complexity(const AmrGraph& graph) {
  graph.validate();  // rejects cycles and unreachable nodes
  auto adj = adjacency(graph);
  // Longest path from root by depth-first memoization over the DAG.
  std::vector<std::size_t> longest(graph.nodes().size(), 0);
  std::vector<bool> done(graph.nodes().size(), false);
  std::vector<std::size_t> order;
  std::vector<std::pair<std::size_t, bool>> stack{{graph.node_index(graph.root()), false}};
  while (!stack.empty()) {
    auto [v, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      order.push_back(v);
      continue;
    }
    if (done[v]) continue;
    done[v] = true;
    stack.push_back({v, true});
    for (std::size_t w : adj[v]) stack.push_back({w, false});
  }
  // order is a reverse topological ordering (children before parents).
  for (std::size_t v : order)
    for (std::size_t w : adj[v])
      longest[v] = std::max(longest[v], longest[w] + 1);
  GraphComplexity c;
  c.size = graph.nodes().size();
  c.depth = longest[graph.node_index(graph.root())];
  return c;
}

}  // namespace sara
