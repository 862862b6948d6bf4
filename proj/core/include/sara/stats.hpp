#pragma once

// Corpus-level graph-complexity statistics: per-dialogue size/depth of the
// merged dialogue graph, plus histogram buckets for reporting.

#include <cstddef>
#include <string>
#include <vector>

#include "sara/amr_graph.hpp"
#include "sara/corpus.hpp"

namespace sara {

struct DialogueComplexity {
  std::string id;
  GraphComplexity graph;  // merged dialogue graph (root + speaker edges)
  std::size_t turns = 0;
};

struct StatsReport {
  std::vector<DialogueComplexity> per_dialogue;
  // Node-count buckets: [0, 150), [150, 300), [300, inf).
  std::size_t size_buckets[3] = {0, 0, 0};
  // Depth buckets: [0, 5), [5, 10), [10, inf).
  std::size_t depth_buckets[3] = {0, 0, 0};
  std::size_t dialogues = 0;
  std::size_t skipped = 0;  // malformed lines (lenient read)
  std::vector<std::string> warnings;

  std::string to_json() const;
};

inline constexpr std::size_t kSizeBucketEdges[2] = {150, 300};
inline constexpr std::size_t kDepthBucketEdges[2] = {5, 10};

StatsReport compute_stats(const std::vector<DialogueInstance>& corpus);

// Lenient streaming variant: malformed lines are skipped and reported.
StatsReport compute_stats_file(const std::string& path);

}  // namespace sara
