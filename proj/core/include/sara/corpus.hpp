#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sara/alignment.hpp"
#include "sara/amr_graph.hpp"
#include "sara/errors.hpp"

namespace sara {

inline constexpr std::size_t kMaxTurns = 15;
inline constexpr std::size_t kMaxDialogueTokens = 256;
inline constexpr std::size_t kMaxAmrTokens = 512;
inline constexpr std::size_t kMaxDialogueWords = 150;
inline constexpr std::size_t kMaxNonEnglishTokens = 10;

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr const char* kUrlToken = "<url>";

// Subword vocabulary: one token per line, line number = id. Must contain the
// five core markers, [Utter_1..15] and <url>; continuation pieces carry "##".
class Vocabulary {
public:
  static Vocabulary load(const std::string& path);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::optional<std::size_t> id_of(const std::string& token) const;
  bool contains(const std::string& token) const { return id_of(token).has_value(); }

  std::size_t pad_id() const { return pad_id_; }
  std::size_t unk_id() const { return unk_id_; }
  std::size_t cls_id() const { return cls_id_; }
  std::size_t sep_id() const { return sep_id_; }
  std::size_t mask_id() const { return mask_id_; }
  std::size_t utter_id(std::size_t turn_number) const;  // 1-based

  bool is_special_id(std::size_t id) const { return specials_.count(id) > 0; }
  const std::set<std::size_t>& specials() const { return specials_; }
  const std::vector<std::string>& special_tokens() const { return special_tokens_; }

  // Vocabulary ids that ReplaceWithRandom corruption may draw from.
  const std::vector<std::size_t>& non_special_ids() const { return non_special_ids_; }

  // FNV-1a over tokens; persisted with checkpoints to detect vocab mismatch.
  std::uint64_t hash() const { return hash_; }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::set<std::size_t> specials_;
  std::vector<std::string> special_tokens_;
  std::vector<std::size_t> non_special_ids_;
  std::size_t pad_id_ = 0, unk_id_ = 0, cls_id_ = 0, sep_id_ = 0, mask_id_ = 0;
  std::vector<std::size_t> utter_ids_;
  std::uint64_t hash_ = 0;
};

// A dialogue with one AMR graph and one word-level alignment per turn.
struct DialogueTurn {
  std::string speaker;
  std::string text;
};

struct DialogueInstance {
  std::string id;
  std::vector<DialogueTurn> turns;
  std::vector<AmrGraph> graphs;
  // Per turn: node id -> word indices (into that turn's basic-split words).
  std::vector<std::map<std::string, std::vector<std::size_t>>> alignments;

  void validate() const;
};

enum class TokenKind : std::uint8_t {
  Cls,
  Sep,
  Pad,
  UtterMarker,
  Speaker,
  Text,
};

// A formatted, id-encoded sequence. Parallel vectors, one entry per token.
struct TokenSequence {
  std::vector<std::size_t> ids;
  std::vector<std::string> strings;
  std::vector<bool> word_starts;        // first subword of a content word
  std::vector<int> segment;             // utterance number (1-based), 0 = frame
  std::vector<TokenKind> kind;
  std::vector<int> word_of_token;       // word index within utterance, -1 otherwise
  std::size_t kept_turns = 0;           // turns that survived truncation

  std::size_t length() const { return ids.size(); }
  bool maskable(std::size_t i, const Vocabulary& vocab) const {
    return kind[i] == TokenKind::Text && !vocab.is_special_id(ids[i]);
  }
  // Token positions of word w in utterance u (both 0-based u, 0-based w).
  std::vector<std::size_t> word_positions(std::size_t utterance,
                                          std::size_t word) const;
};

// Lowercase, split on whitespace and punctuation, then greedy longest-match
// wordpiece. Whole-word special tokens (e.g. "<url>") stay atomic.
struct TokenizedText {
  std::vector<std::string> pieces;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> word_index;    // which basic word each piece belongs to
  std::vector<bool> word_start;
  std::size_t word_count = 0;
};

TokenizedText tokenize(const std::string& text, const Vocabulary& vocab);

// Basic split only (lowercase + whitespace/punctuation). Word indices in
// alignments refer to this segmentation.
std::vector<std::string> basic_words(const std::string& text);

// [CLS] [Utter_1] Speaker_1 U_1 ... [SEP]. Whole trailing utterances are
// dropped if the sequence would exceed max_tokens.
TokenSequence format_dialogue(const DialogueInstance& instance,
                              const Vocabulary& vocab,
                              std::size_t max_tokens = kMaxDialogueTokens);

// [CLS] <linearized AMR tokens> [SEP], each token looked up whole before
// falling back to wordpiece.
TokenSequence format_amr(const std::vector<std::string>& amr_tokens,
                         const Vocabulary& vocab,
                         std::size_t max_tokens = kMaxAmrTokens);

// Remaps the per-turn word-level alignments of an instance onto the global
// token positions of its formatted sequence. Node ids gain the "u<i>."
// namespace used by build_dialogue_graph; turns dropped at truncation are
// skipped.
Alignment remap_alignments(const DialogueInstance& instance,
                           const TokenSequence& seq);

enum class DropReason : std::uint8_t {
  SpecialMarkers,
  NonEnglish,
  TooManyWords,
  TooManyTurns,
};

struct FilterDecision {
  bool keep = false;
  std::vector<DropReason> reasons;                 // all violated rules
  std::vector<std::string> rewritten_texts;        // URLs replaced, kept order
};

const char* drop_reason_name(DropReason r);

// Applies the corpus-cleaning rules: special markers in raw text, more than
// 10 non-English tokens, more than 150 words, more than 15 turns. Kept
// dialogues get their URLs replaced by "<url>".
FilterDecision filter_instance(const std::vector<DialogueTurn>& turns,
                               const Vocabulary& vocab);

// Streaming JSONL reader. Schema per line:
//   {"id": str, "turns": [{"speaker": str, "text": str}],
//    "amr": [penman per turn], "align": [{node: [word,...]} per turn]}
class CorpusReader {
public:
  CorpusReader(const std::string& path, bool lenient);

  // Next valid instance, or nullopt at end of file. In lenient mode
  // malformed lines are counted and skipped; in strict mode they throw
  // DataError with the line number.
  std::optional<DialogueInstance> next();

  std::size_t line_number() const { return line_number_; }
  std::size_t skipped() const { return skipped_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

private:
  std::ifstream in_;
  std::string path_;
  bool lenient_;
  std::size_t line_number_ = 0;
  std::size_t skipped_ = 0;
  std::vector<std::string> warnings_;
};

// Parses one corpus JSONL record; throws DataError on schema violations.
DialogueInstance parse_corpus_record(const std::string& json_line);

// Emits one JSONL record for a valid instance (validates first). Graphs are
// re-serialized with canonical variable names and alignment keys are renamed
// to match, so the record always re-parses to an equivalent instance.
std::string corpus_record_to_json(const DialogueInstance& instance);

// Convenience: read a whole corpus into memory.
std::vector<DialogueInstance> load_corpus(const std::string& path,
                                          bool lenient = false);

}  // namespace sara
