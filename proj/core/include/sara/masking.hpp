#pragma once

// Semantics-guided dynamic masking.
//
// Two-tier corruption of a formatted dialogue sequence:
//   * tokens covered by the node-to-token alignment are masked as whole
//     words at `semantic_rate`;
//   * all other maskable tokens are masked independently at `base_rate`.
// Selected positions are then corrupted with the usual 80/10/10 split
// (replace with [MASK] / replace with a random non-special token / keep).
// Special tokens, utterance markers and speaker tokens are never selected.
//
// Masking is re-sampled every optimizer step ("dynamic"): the caller seeds
// the Rng with derive_seed(global_seed, step, instance_hash) so that any
// (step, instance) pair yields the same pattern across runs and resumes.

#include <cstddef>
#include <vector>

#include "sara/alignment.hpp"
#include "sara/corpus.hpp"
#include "sara/errors.hpp"
#include "sara/rng.hpp"

namespace sara {

struct MaskingConfig {
  double semantic_rate = 0.2;  // whole-word rate over aligned tokens
  double base_rate = 0.05;     // per-token rate over the rest
  double mask_prob = 0.8;      // fraction of selections replaced by [MASK]
  double random_prob = 0.1;    // ... replaced by a random non-special token
  double keep_prob = 0.1;      // ... left unchanged (but still predicted)

  void validate() const;  // throws ConfigError
};

enum class MaskAction { Mask, Random, Keep };

// One sampled corruption of a sequence. `positions` is sorted ascending and
// indexes into the original sequence; `corrupted_ids` is the full-length id
// vector after corruption (identical to the input outside `positions`).
struct MaskPattern {
  std::vector<std::size_t> positions;
  std::vector<std::size_t> original_ids;  // prediction targets
  std::vector<MaskAction> actions;
  std::vector<bool> from_semantic;  // tier that selected each position
  std::vector<std::size_t> corrupted_ids;

  std::size_t count() const { return positions.size(); }
};

// Semantics-guided sampling (the default objective).
MaskPattern sample_semantic_mask(const TokenSequence& seq,
                                 const Vocabulary& vocab,
                                 const Alignment& alignment,
                                 const MaskingConfig& config, Rng& rng);

// Alignment-agnostic baseline: every maskable token at `rate`.
MaskPattern sample_vanilla_mask(const TokenSequence& seq,
                                const Vocabulary& vocab, double rate,
                                const MaskingConfig& config, Rng& rng);

}  // namespace sara
