#include "sara/stats.hpp"

#include "json.hpp"

namespace sara {
namespace {

using ordered_json = nlohmann::ordered_json;

std::size_t bucket_of(std::size_t value, const std::size_t edges[2]) {
  if (value < edges[0]) return 0;
  if (value < edges[1]) return 1;
  return 2;
}

void add_instance(StatsReport& report, const DialogueInstance& instance) {
  std::vector<std::string> speakers;
  speakers.reserve(instance.turns.size());
  for (const DialogueTurn& turn : instance.turns)
    speakers.push_back(turn.speaker);
  const AmrGraph dialogue = build_dialogue_graph(instance.graphs, speakers);

  DialogueComplexity entry;
  entry.id = instance.id;
  entry.graph = complexity(dialogue);
  entry.turns = instance.turns.size();

  report.size_buckets[bucket_of(entry.graph.size, kSizeBucketEdges)]++;
  report.depth_buckets[bucket_of(entry.graph.depth, kDepthBucketEdges)]++;
  report.dialogues++;
  report.per_dialogue.push_back(std::move(entry));
}

}  // namespace

std::string StatsReport::to_json() const {
  ordered_json j;
  j["dialogues"] = dialogues;
  j["skipped"] = skipped;
  j["size_buckets"] = {
      {"[0,150)", size_buckets[0]},
      {"[150,300)", size_buckets[1]},
      {"[300,inf)", size_buckets[2]},
  };
  j["depth_buckets"] = {
      {"[0,5)", depth_buckets[0]},
      {"[5,10)", depth_buckets[1]},
      {"[10,inf)", depth_buckets[2]},
  };
  ordered_json rows = ordered_json::array();
  for (const DialogueComplexity& d : per_dialogue) {
    ordered_json row;
    row["id"] = d.id;
    row["size"] = d.graph.size;
    row["depth"] = d.graph.depth;
    row["turns"] = d.turns;
    rows.push_back(std::move(row));
  }
  j["per_dialogue"] = std::move(rows);
  j["warnings"] = warnings;
  return j.dump(2);
}

StatsReport compute_stats(const std::vector<DialogueInstance>& corpus) {
  StatsReport report;
  for (const DialogueInstance& instance : corpus) add_instance(report, instance);
  return report;
}

StatsReport compute_stats_file(const std::string& path) {
  StatsReport report;
  CorpusReader reader(path, /*lenient=*/true);
  while (auto instance = reader.next()) add_instance(report, *instance);
  report.skipped = reader.skipped();
  report.warnings = reader.warnings();
  return report;
}

}  // namespace sara
