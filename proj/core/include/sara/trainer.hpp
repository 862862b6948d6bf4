#pragma once

// Joint pre-training harness: batching, the three-loss training step with
// gradient accumulation, metrics, checkpointing and resume.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sara/alignment.hpp"
#include "sara/corpus.hpp"
#include "sara/masking.hpp"
#include "sara/model.hpp"
#include "sara/optimizer.hpp"

namespace sara {

struct TrainingConfig {
  // Loss weights and temperature.
  double alpha = 0.1;
  double beta = 1.0;
  double tau = 1.0;
  // Optimizer / schedule.
  double lr = 1e-5;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t warmup_steps = 0;
  // Batch geometry: micro_batch instances per forward, grad_accum
  // micro-batches per optimizer step.
  std::size_t micro_batch = 8;
  std::size_t grad_accum = 4;
  std::size_t epochs = 5;
  std::size_t max_steps = 0;  // 0: derived from epochs and corpus size
  std::uint64_t seed = 42;
  // Agreement negatives: 0 = every in-batch AMR.
  std::size_t negatives_per_example = 0;
  MaskingConfig masking;
  ProjectionMode projection = ProjectionMode::FirstSubword;
  std::size_t max_dialogue_tokens = kMaxDialogueTokens;
  std::size_t max_amr_tokens = kMaxAmrTokens;
  // Harness knobs.
  std::size_t checkpoint_every = 0;  // optimizer steps; 0 = final only
  std::size_t log_every = 1;
  bool overfit_single_batch = false;  // repeat the first micro-batch forever

  void validate() const;  // throws ConfigError
};

// Per-step scalars; `total` always equals sem_mlm + alpha*rel + beta*sim in
// that exact f64 evaluation order.
struct LossBreakdown {
  std::size_t step = 0;  // 1-based optimizer step
  double sem_mlm = 0.0;
  double rel = 0.0;
  double sim = 0.0;
  double total = 0.0;
  double lr = 0.0;
  std::size_t masked_tokens = 0;
  std::size_t triples = 0;
  std::size_t unseen_labels = 0;

  std::string to_json() const;
  static LossBreakdown from_json(const std::string& line);
};

// A dialogue after the full preprocessing pipeline: formatted token
// sequence, remapped alignment, projected relation triples, and the
// linearized dialogue-AMR ids for the graph encoder.
struct PreparedInstance {
  std::string id;
  TokenSequence seq;
  Alignment alignment;
  ProjectedEdgeSet edges;
  std::vector<std::size_t> amr_ids;
};

PreparedInstance prepare_instance(const DialogueInstance& instance,
                                  const Vocabulary& vocab,
                                  const TrainingConfig& config);
std::vector<PreparedInstance> prepare_corpus(
    const std::vector<DialogueInstance>& corpus, const Vocabulary& vocab,
    const TrainingConfig& config);

// Label universe over the corpus's dialogue-level graphs (speaker edges
// included), sorted, with the reserved unseen slot appended.
RelationLabelInventory collect_labels(const std::vector<DialogueInstance>& corpus);

class Trainer {
 public:
  Trainer(DialogueModel& model, const Vocabulary& vocab,
          std::vector<PreparedInstance> corpus, TrainingConfig config);

  std::size_t total_steps() const { return total_steps_; }
  std::size_t steps_done() const { return optimizer_.steps_taken(); }
  const TrainingConfig& config() const { return config_; }

  // One optimizer step (grad_accum micro-batches + update).
  LossBreakdown train_step();

  // Train to total_steps; writes metrics.jsonl and checkpoints under out_dir.
  // Returns the per-step history of this call.
  std::vector<LossBreakdown> run(const std::string& out_dir);

  void save_checkpoint(const std::string& path_prefix) const;
  void load_checkpoint(const std::string& path_prefix);  // resume

 private:
  std::vector<std::size_t> next_micro_indices();

  DialogueModel& model_;
  const Vocabulary& vocab_;
  std::vector<PreparedInstance> corpus_;
  TrainingConfig config_;
  std::size_t total_steps_;
  AdamW optimizer_;
  std::size_t cursor_ = 0;  // next corpus index, wraps around
};

// Checkpoint contents without a live model (e.g. for the probe).
struct LoadedCheckpoint {
  ModelConfig config;
  RelationLabelInventory inventory;
  std::uint64_t vocab_hash = 0;
  std::size_t step = 0;
  std::vector<TensorRecord> model_records;
  std::vector<TensorRecord> optimizer_records;
};

LoadedCheckpoint read_checkpoint(const std::string& path_prefix);

// Builds a model from a stored checkpoint (parameters loaded, no optimizer).
DialogueModel load_model(const LoadedCheckpoint& loaded);

// In-batch retrieval: fraction of pairs whose AMR is the argmax by cosine
// similarity within consecutive batches of `batch` pairs (trailing partial
// batch ignored). Uses clean (uncorrupted) inputs.
double retrieval_accuracy(const DialogueModel& model,
                          const std::vector<PreparedInstance>& corpus,
                          std::size_t batch);

}  // namespace sara
