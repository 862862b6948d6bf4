#include "sara/masking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

namespace sara {

void MaskingConfig::validate() const {
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  rate(semantic_rate, "semantic_rate");
  rate(base_rate, "base_rate");
  rate(mask_prob, "mask_prob");
  rate(random_prob, "random_prob");
  rate(keep_prob, "keep_prob");
  const double sum = mask_prob + random_prob + keep_prob;
  if (std::abs(sum - 1.0) > 1e-12)
    throw ConfigError("mask/random/keep probabilities must sum to 1, got " +
                      std::to_string(sum));
}

namespace {

// Draw corruption actions for the already-selected positions (ascending) and
// materialize the corrupted sequence. One uniform per position, plus one
// uniform_int when the Random branch is taken.
void corrupt(MaskPattern& p, const TokenSequence& seq, const Vocabulary& vocab,
             const MaskingConfig& config, Rng& rng) {
  p.corrupted_ids = seq.ids;
  p.original_ids.reserve(p.positions.size());
  p.actions.reserve(p.positions.size());
  const auto& pool = vocab.non_special_ids();
  if (pool.empty()) throw ConfigError("vocabulary has no non-special tokens");
  for (std::size_t pos : p.positions) {
    p.original_ids.push_back(seq.ids[pos]);
    const double u = rng.uniform();
    if (u < config.mask_prob) {
      p.actions.push_back(MaskAction::Mask);
      p.corrupted_ids[pos] = vocab.mask_id();
    } else if (u < config.mask_prob + config.random_prob) {
      p.actions.push_back(MaskAction::Random);
      p.corrupted_ids[pos] = pool[rng.uniform_int(pool.size())];
    } else {
      p.actions.push_back(MaskAction::Keep);
    }
  }
}

}  // namespace

MaskPattern sample_semantic_mask(const TokenSequence& seq,
                                 const Vocabulary& vocab,
                                 const Alignment& alignment,
                                 const MaskingConfig& config, Rng& rng) {
  config.validate();
  const std::set<std::size_t> aligned = semantic_token_set(alignment);
  for (std::size_t pos : aligned)
    if (pos >= seq.length())
      throw DataError("alignment token index " + std::to_string(pos) +
                      " out of range for sequence of length " +
                      std::to_string(seq.length()));

  // Group aligned maskable tokens into whole words keyed by
  // (utterance, word); std::map iteration fixes the sampling order.
  std::map<std::pair<int, int>, std::vector<std::size_t>> words;
  for (std::size_t pos : aligned) {
    if (!seq.maskable(pos, vocab)) continue;
    words[{seq.segment[pos], seq.word_of_token[pos]}].push_back(pos);
  }
  // Whole-word masking: pull in unaligned subwords of aligned words so a
  // word is always corrupted as a unit.
  for (auto& [key, positions] : words) {
    for (std::size_t pos = 0; pos < seq.length(); ++pos)
      if (seq.maskable(pos, vocab) && seq.segment[pos] == key.first &&
          seq.word_of_token[pos] == key.second && !aligned.count(pos))
        positions.push_back(pos);
    std::sort(positions.begin(), positions.end());
  }

  MaskPattern p;
  std::set<std::size_t> selected;
  for (const auto& [key, positions] : words)
    if (rng.bernoulli(config.semantic_rate))
      selected.insert(positions.begin(), positions.end());

  // Base tier over everything maskable that is neither aligned nor part of
  // an aligned word; one Bernoulli per candidate, in position order.
  std::set<std::size_t> in_semantic_words;
  for (const auto& [key, positions] : words)
    in_semantic_words.insert(positions.begin(), positions.end());
  for (std::size_t pos = 0; pos < seq.length(); ++pos) {
    if (!seq.maskable(pos, vocab) || in_semantic_words.count(pos)) continue;
    if (rng.bernoulli(config.base_rate)) selected.insert(pos);
  }

  p.positions.assign(selected.begin(), selected.end());
  p.from_semantic.reserve(p.positions.size());
  for (std::size_t pos : p.positions)
    p.from_semantic.push_back(in_semantic_words.count(pos) > 0);
  corrupt(p, seq, vocab, config, rng);
  return p;
}

MaskPattern sample_vanilla_mask(const TokenSequence& seq,
                                const Vocabulary& vocab, double rate,
                                const MaskingConfig& config, Rng& rng) {
  config.validate();
  if (!(rate >= 0.0 && rate <= 1.0))
    throw ConfigError("mask rate must lie in [0, 1]");
  MaskPattern p;
  for (std::size_t pos = 0; pos < seq.length(); ++pos)
    if (seq.maskable(pos, vocab) && rng.bernoulli(rate))
      p.positions.push_back(pos);
  p.from_semantic.assign(p.positions.size(), false);
  corrupt(p, seq, vocab, config, rng);
  return p;
}

}  // namespace sara
