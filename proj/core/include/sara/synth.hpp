#pragma once

// Deterministic synthetic corpus for smoke training, demos and tests:
// template dialogues with hand-aligned AMR graphs, a matching wordpiece
// vocabulary, and a small intent-labeled set for the probe.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sara/corpus.hpp"
#include "sara/probe.hpp"

namespace sara {

struct SynthData {
  std::vector<std::string> vocab_tokens;
  std::vector<DialogueInstance> corpus;
  std::vector<IntentExample> intents;
};

// Same (seed, n_dialogues) always yields identical data. Each dialogue has
// three distinct turns drawn from the template pool, speakers alternate, and
// no two dialogues share the same unordered template triple, so content alone
// identifies a dialogue.
SynthData make_synth_data(std::uint64_t seed, std::size_t n_dialogues,
                          std::size_t n_intents = 120);

// Writes vocab.txt, corpus.jsonl and intents.jsonl under `dir`.
void write_synth_data(const SynthData& data, const std::string& dir);

}  // namespace sara
