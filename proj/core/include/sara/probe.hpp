#pragma once

// Downstream evaluation: a linear intent-classification probe trained on
// frozen pooled dialogue representations.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sara/corpus.hpp"
#include "sara/model.hpp"

namespace sara {

struct IntentExample {
  std::string id;
  std::vector<DialogueTurn> turns;
  std::string label;
};

// Strict JSONL, one example per line:
//   {"id": str, "turns": [{"speaker": str, "text": str}, ...], "label": str}
std::vector<IntentExample> load_intent_corpus(const std::string& path);

struct ProbeConfig {
  std::size_t epochs = 200;
  double lr = 0.05;
  double weight_decay = 0.0;
  std::uint64_t seed = 7;
  std::size_t max_dialogue_tokens = kMaxDialogueTokens;

  void validate() const;  // throws ConfigError
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double dev_accuracy = 0.0;
  double final_loss = 0.0;
  std::vector<std::string> classes;
  std::size_t train_examples = 0;
  std::size_t dev_examples = 0;
  std::size_t epochs = 0;

  std::string to_json() const;
};

// Features come from the frozen model (pooled [CLS] of the text encoder);
// only the linear head is trained, full-batch, with AdamW. Every fourth
// example (i % 4 == 3) is held out as the dev split.
ProbeResult run_probe(const DialogueModel& model, const Vocabulary& vocab,
                      const std::vector<IntentExample>& examples,
                      const ProbeConfig& config);

}  // namespace sara
