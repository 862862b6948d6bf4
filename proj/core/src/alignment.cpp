#include "sara/alignment.hpp"

#include <algorithm>
#include <cctype>

#include "sara/errors.hpp"

namespace sara {

void Alignment::validate(const AmrGraph& graph,
                         std::size_t sequence_length) const {
  std::map<std::size_t, const std::string*> owner;
  for (const auto& [node_id, tokens] : pairs) {
    if (!graph.has_node(node_id))
      throw DataError("alignment refers to unknown node '" + node_id + "'");
    for (std::size_t t : tokens) {
      if (t >= sequence_length)
        throw DataError("alignment token index " + std::to_string(t) +
                        " out of bounds (sequence length " +
                        std::to_string(sequence_length) + ")");
      auto [it, inserted] = owner.emplace(t, &node_id);
      if (!inserted)
        throw DataError("token " + std::to_string(t) +
                        " aligned to both '" + *it->second + "' and '" +
                        node_id + "'");
    }
  }
}

Alignment extend_alignment(
    const std::map<std::string, std::vector<std::size_t>>& word_alignment,
    const std::vector<std::vector<std::size_t>>& subword_map) {
  Alignment out;
  for (const auto& [node_id, words] : word_alignment) {
    std::set<std::size_t> tokens;
    for (std::size_t w : words) {
      if (w >= subword_map.size())
        throw DataError("aligned word index " + std::to_string(w) +
                        " out of bounds (" + std::to_string(subword_map.size()) +
                        " words)");
      if (subword_map[w].empty())
        throw DataError("word " + std::to_string(w) +
                        " has no subword tokens");
      tokens.insert(subword_map[w].begin(), subword_map[w].end());
    }
    if (!tokens.empty()) out.pairs.emplace(node_id, std::move(tokens));
  }
  return out;
}

std::set<std::size_t> semantic_token_set(const Alignment& alignment) {
  std::set<std::size_t> out;
  for (const auto& [node_id, tokens] : alignment.pairs)
    out.insert(tokens.begin(), tokens.end());
  return out;
}

ProjectedEdgeSet project_edges(const AmrGraph& graph, const Alignment& alignment,
                               ProjectionMode mode) {
  std::vector<ProjectedEdge> triples;
  for (const AmrEdge& e : graph.edges()) {
    auto src = alignment.pairs.find(e.source);
    auto tgt = alignment.pairs.find(e.target);
    if (src == alignment.pairs.end() || tgt == alignment.pairs.end()) continue;
    if (src->second.empty() || tgt->second.empty()) continue;
    if (mode == ProjectionMode::FirstSubword) {
      triples.push_back({*src->second.begin(), e.label, *tgt->second.begin()});
    } else {
      for (std::size_t i : src->second)
        for (std::size_t j : tgt->second) triples.push_back({i, e.label, j});
    }
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  return {std::move(triples)};
}

namespace {

// Walks a JAMR node path: child k = target of the k-th out-edge.
const std::string& node_at_path(const AmrGraph& graph, const std::string& path) {
  if (path.empty() || path[0] != '0')
    throw DataError("JAMR path must start at root '0': '" + path + "'");
  const std::string* current = &graph.root();
  std::size_t i = 1;
  while (i < path.size()) {
    if (path[i] != '.')
      throw DataError("malformed JAMR path '" + path + "'");
    ++i;
    std::size_t k = 0;
    bool any = false;
    while (i < path.size() && path[i] >= '0' && path[i] <= '9') {
      k = k * 10 + static_cast<std::size_t>(path[i] - '0');
      ++i;
      any = true;
    }
    if (!any) throw DataError("malformed JAMR path '" + path + "'");
    auto out = graph.out_edges(*current);
    if (k >= out.size())
      throw DataError("JAMR path '" + path + "' walks past child " +
                      std::to_string(k) + " of node '" + *current + "'");
    current = &graph.edges()[out[k]].target;
  }
  return *current;
}

}  // namespace

std::map<std::string, std::vector<std::size_t>> parse_jamr_alignment(
    const AmrGraph& graph, const std::string& line) {
  std::map<std::string, std::vector<std::size_t>> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos])))
      ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end])))
      ++end;
    const std::string record = line.substr(pos, end - pos);
    pos = end;

    auto bar = record.find('|');
    auto dash = record.find('-');
    if (bar == std::string::npos || dash == std::string::npos || dash > bar)
      throw DataError("malformed JAMR record '" + record +
                      "' (expected start-end|path)");
    std::size_t span_start = 0, span_end = 0;
    try {
      span_start = std::stoul(record.substr(0, dash));
      span_end = std::stoul(record.substr(dash + 1, bar - dash - 1));
    } catch (const std::exception&) {
      throw DataError("malformed JAMR span in '" + record + "'");
    }
    if (span_end <= span_start)
      throw DataError("empty JAMR span in '" + record + "'");

    // A record may align one span to several node paths, '+'-joined.
    std::string paths = record.substr(bar + 1);
    std::size_t p = 0;
    while (p < paths.size()) {
      std::size_t q = paths.find('+', p);
      if (q == std::string::npos) q = paths.size();
      const std::string& node_id =
          node_at_path(graph, paths.substr(p, q - p));
      auto& words = out[node_id];
      for (std::size_t w = span_start; w < span_end; ++w) words.push_back(w);
      std::sort(words.begin(), words.end());
      words.erase(std::unique(words.begin(), words.end()), words.end());
      p = q + 1;
    }
  }
  return out;
}

}  // namespace sara
