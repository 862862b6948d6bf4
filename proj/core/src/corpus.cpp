#include "sara/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "sara/rng.hpp"

namespace sara {

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i].empty())
      throw DataError("empty vocabulary token at line " + std::to_string(i + 1));
    auto [it, inserted] = v.ids_.emplace(v.tokens_[i], i);
    if (!inserted)
      throw DataError("duplicate vocabulary token '" + v.tokens_[i] + "'");
  }
  auto require = [&](const std::string& tok) {
    auto it = v.ids_.find(tok);
    if (it == v.ids_.end())
      throw DataError("vocabulary is missing required token '" + tok + "'");
    v.specials_.insert(it->second);
    v.special_tokens_.push_back(tok);
    return it->second;
  };
  v.pad_id_ = require(kPadToken);
  v.unk_id_ = require(kUnkToken);
  v.cls_id_ = require(kClsToken);
  v.sep_id_ = require(kSepToken);
  v.mask_id_ = require(kMaskToken);
  v.utter_ids_.resize(kMaxTurns);
  for (std::size_t i = 1; i <= kMaxTurns; ++i)
    v.utter_ids_[i - 1] = require("[Utter_" + std::to_string(i) + "]");
  require(kUrlToken);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i)
    if (!v.specials_.count(i)) v.non_special_ids_.push_back(i);
  std::string joined;
  for (const auto& t : v.tokens_) {
    joined += t;
    joined += '\n';
  }
  v.hash_ = fnv1a64(joined);
  return v;
}

std::optional<std::size_t> Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::utter_id(std::size_t turn_number) const {
  if (turn_number < 1 || turn_number > kMaxTurns)
    throw DataError("utterance number " + std::to_string(turn_number) +
                    " outside [1, " + std::to_string(kMaxTurns) + "]");
  return utter_ids_[turn_number - 1];
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

namespace {

bool is_ascii_punct(unsigned char c) { return std::ispunct(c) != 0; }

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

constexpr std::size_t kMaxWordChars = 64;

}  // namespace

std::vector<std::string> basic_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(ascii_lower(text));
  std::string chunk;
  while (in >> chunk) {
    if (chunk == kUrlToken) {  // the one special that survives filtering
      words.push_back(chunk);
      continue;
    }
    std::string current;
    for (char c : chunk) {
      if (is_ascii_punct(static_cast<unsigned char>(c))) {
        if (!current.empty()) {
          words.push_back(current);
          current.clear();
        }
        words.push_back(std::string(1, c));
      } else {
        current += c;
      }
    }
    if (!current.empty()) words.push_back(current);
  }
  return words;
}

namespace {

// Greedy longest-match wordpiece of a single basic word.
std::vector<std::string> wordpiece(const std::string& word,
                                   const Vocabulary& vocab) {
  if (word.size() > kMaxWordChars) return {kUnkToken};
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::string found;
    while (end > start) {
      std::string piece = word.substr(start, end - start);
      if (start > 0) piece = "##" + piece;
      if (vocab.contains(piece)) {
        found = std::move(piece);
        break;
      }
      --end;
    }
    if (found.empty()) return {kUnkToken};
    pieces.push_back(std::move(found));
    start = end;
  }
  return pieces;
}

}  // namespace

TokenizedText tokenize(const std::string& text, const Vocabulary& vocab) {
  TokenizedText out;
  const std::vector<std::string> words = basic_words(text);
  out.word_count = words.size();
  for (std::size_t w = 0; w < words.size(); ++w) {
    std::vector<std::string> pieces;
    if (words[w] == kUrlToken && vocab.contains(words[w]))
      pieces = {words[w]};
    else
      pieces = wordpiece(words[w], vocab);
    for (std::size_t p = 0; p < pieces.size(); ++p) {
      auto id = vocab.id_of(pieces[p]);
      out.ids.push_back(id ? *id : vocab.unk_id());
      out.pieces.push_back(std::move(pieces[p]));
      out.word_index.push_back(w);
      out.word_start.push_back(p == 0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dialogue formatting
// ---------------------------------------------------------------------------

namespace {

void push_token(TokenSequence& seq, std::size_t id, std::string text,
                TokenKind kind, int segment, int word = -1,
                bool word_start = false) {
  seq.ids.push_back(id);
  seq.strings.push_back(std::move(text));
  seq.kind.push_back(kind);
  seq.segment.push_back(segment);
  seq.word_of_token.push_back(word);
  seq.word_starts.push_back(word_start);
}

}  // namespace

std::vector<std::size_t> TokenSequence::word_positions(std::size_t utterance,
                                                       std::size_t word) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (kind[i] == TokenKind::Text &&
        segment[i] == static_cast<int>(utterance) + 1 &&
        word_of_token[i] == static_cast<int>(word))
      out.push_back(i);
  return out;
}

TokenSequence format_dialogue(const DialogueInstance& instance,
                              const Vocabulary& vocab,
                              std::size_t max_tokens) {
  if (instance.turns.empty()) throw DataError("dialogue has no turns");
  if (instance.turns.size() > kMaxTurns)
    throw DataError("dialogue has " + std::to_string(instance.turns.size()) +
                    " turns, limit is " + std::to_string(kMaxTurns) +
                    " (should have been filtered)");

  struct Block {
    TokenizedText speaker;
    TokenizedText text;
  };
  std::vector<Block> blocks;
  for (const DialogueTurn& turn : instance.turns)
    blocks.push_back({tokenize(turn.speaker, vocab), tokenize(turn.text, vocab)});

  // Keep whole utterances from the front until the budget runs out.
  std::size_t used = 2;  // [CLS] + [SEP]
  std::size_t kept = 0;
  for (const Block& b : blocks) {
    std::size_t need = 1 + b.speaker.ids.size() + b.text.ids.size();
    if (used + need > max_tokens) break;
    used += need;
    ++kept;
  }
  if (kept == 0)
    throw DataError("dialogue '" + instance.id +
                    "': first utterance alone exceeds the " +
                    std::to_string(max_tokens) + "-token budget");

  TokenSequence seq;
  seq.kept_turns = kept;
  push_token(seq, vocab.cls_id(), kClsToken, TokenKind::Cls, 0);
  for (std::size_t u = 0; u < kept; ++u) {
    const int segment = static_cast<int>(u) + 1;
    push_token(seq, vocab.utter_id(u + 1), "[Utter_" + std::to_string(u + 1) + "]",
               TokenKind::UtterMarker, segment);
    const Block& b = blocks[u];
    for (std::size_t p = 0; p < b.speaker.ids.size(); ++p)
      push_token(seq, b.speaker.ids[p], b.speaker.pieces[p], TokenKind::Speaker,
                 segment);
    for (std::size_t p = 0; p < b.text.ids.size(); ++p)
      push_token(seq, b.text.ids[p], b.text.pieces[p], TokenKind::Text, segment,
                 static_cast<int>(b.text.word_index[p]), b.text.word_start[p]);
  }
  push_token(seq, vocab.sep_id(), kSepToken, TokenKind::Sep, 0);
  return seq;
}

TokenSequence format_amr(const std::vector<std::string>& amr_tokens,
                         const Vocabulary& vocab, std::size_t max_tokens) {
  TokenSequence seq;
  push_token(seq, vocab.cls_id(), kClsToken, TokenKind::Cls, 0);
  for (const std::string& tok : amr_tokens) {
    if (seq.ids.size() + 1 >= max_tokens) break;  // keep the front of the graph
    if (auto id = vocab.id_of(tok)) {
      push_token(seq, *id, tok, TokenKind::Text, 0);
      continue;
    }
    for (const std::string& piece : wordpiece(ascii_lower(tok), vocab)) {
      if (seq.ids.size() + 1 >= max_tokens) break;
      auto id = vocab.id_of(piece);
      push_token(seq, id ? *id : vocab.unk_id(), piece, TokenKind::Text, 0);
    }
  }
  push_token(seq, vocab.sep_id(), kSepToken, TokenKind::Sep, 0);
  return seq;
}

Alignment remap_alignments(const DialogueInstance& instance,
                           const TokenSequence& seq) {
  // Single pass: (utterance, word) -> token positions.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> table;
  for (std::size_t i = 0; i < seq.length(); ++i)
    if (seq.kind[i] == TokenKind::Text && seq.word_of_token[i] >= 0)
      table[{static_cast<std::size_t>(seq.segment[i] - 1),
             static_cast<std::size_t>(seq.word_of_token[i])}]
          .push_back(i);

  Alignment out;
  for (std::size_t u = 0; u < seq.kept_turns; ++u) {
    const std::string prefix = "u" + std::to_string(u) + ".";
    for (const auto& [node_id, words] : instance.alignments[u]) {
      std::set<std::size_t> tokens;
      for (std::size_t w : words) {
        auto it = table.find({u, w});
        if (it == table.end())
          throw DataError("dialogue '" + instance.id + "' turn " +
                          std::to_string(u) + ": aligned word " +
                          std::to_string(w) + " has no tokens");
        tokens.insert(it->second.begin(), it->second.end());
      }
      if (!tokens.empty()) out.pairs.emplace(prefix + node_id, std::move(tokens));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

const char* drop_reason_name(DropReason r) {
  switch (r) {
    case DropReason::SpecialMarkers: return "special-markers";
    case DropReason::NonEnglish: return "non-english";
    case DropReason::TooManyWords: return "length";
    case DropReason::TooManyTurns: return "turns";
  }
  return "?";
}

namespace {

bool printable_ascii(const std::string& token) {
  for (unsigned char c : token)
    if (c < 0x20 || c > 0x7e) return false;
  return true;
}

const std::regex& url_regex() {
  static const std::regex re(R"((https?://\S+|www\.\S+))");
  return re;
}

}  // namespace

FilterDecision filter_instance(const std::vector<DialogueTurn>& turns,
                               const Vocabulary& vocab) {
  FilterDecision d;
  std::size_t words = 0;
  std::size_t non_english = 0;
  bool markers = false;
  for (const DialogueTurn& turn : turns) {
    for (const std::string& special : vocab.special_tokens())
      if (turn.text.find(special) != std::string::npos) markers = true;
    std::istringstream in(turn.text);
    std::string tok;
    while (in >> tok) {
      ++words;
      if (!printable_ascii(tok)) ++non_english;
    }
  }
  if (markers) d.reasons.push_back(DropReason::SpecialMarkers);
  if (non_english > kMaxNonEnglishTokens)
    d.reasons.push_back(DropReason::NonEnglish);
  if (words > kMaxDialogueWords) d.reasons.push_back(DropReason::TooManyWords);
  if (turns.size() > kMaxTurns) d.reasons.push_back(DropReason::TooManyTurns);
  d.keep = d.reasons.empty();
  if (d.keep)
    for (const DialogueTurn& turn : turns)
      d.rewritten_texts.push_back(
          std::regex_replace(turn.text, url_regex(), kUrlToken));
  return d;
}

// ---------------------------------------------------------------------------
// JSONL corpus
// ---------------------------------------------------------------------------

void DialogueInstance::validate() const {
  if (turns.empty()) throw DataError("instance '" + id + "' has no turns");
  if (graphs.size() != turns.size() || alignments.size() != turns.size())
    throw DataError("instance '" + id + "': turns/amr/align lengths differ (" +
                    std::to_string(turns.size()) + "/" +
                    std::to_string(graphs.size()) + "/" +
                    std::to_string(alignments.size()) + ")");
  for (std::size_t u = 0; u < turns.size(); ++u) {
    graphs[u].validate();
    const std::size_t words = basic_words(turns[u].text).size();
    for (const auto& [node_id, word_idx] : alignments[u]) {
      if (!graphs[u].has_node(node_id))
        throw DataError("instance '" + id + "' turn " + std::to_string(u) +
                        ": alignment names unknown node '" + node_id + "'");
      for (std::size_t w : word_idx)
        if (w >= words)
          throw DataError("instance '" + id + "' turn " + std::to_string(u) +
                          ": aligned word " + std::to_string(w) +
                          " out of range (" + std::to_string(words) + " words)");
    }
  }
}

DialogueInstance parse_corpus_record(const std::string& json_line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record is not a JSON object");
  DialogueInstance inst;
  try {
    inst.id = j.at("id").get<std::string>();
    for (const auto& t : j.at("turns")) {
      DialogueTurn turn;
      turn.speaker = t.at("speaker").get<std::string>();
      turn.text = t.at("text").get<std::string>();
      inst.turns.push_back(std::move(turn));
    }
    for (const auto& g : j.at("amr"))
      inst.graphs.push_back(parse_penman(g.get<std::string>()));
    for (const auto& a : j.at("align")) {
      std::map<std::string, std::vector<std::size_t>> align;
      if (!a.is_object()) throw DataError("align entry is not an object");
      for (auto it = a.begin(); it != a.end(); ++it) {
        std::vector<std::size_t> words;
        for (const auto& w : it.value()) {
          long long v = w.get<long long>();
          if (v < 0) throw DataError("negative word index in alignment");
          words.push_back(static_cast<std::size_t>(v));
        }
        align.emplace(it.key(), std::move(words));
      }
      inst.alignments.push_back(std::move(align));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("record schema violation: ") + e.what());
  }
  inst.validate();
  return inst;
}

std::string corpus_record_to_json(const DialogueInstance& instance) {
  instance.validate();  // the per-turn loops below assume aligned lengths
  nlohmann::ordered_json j;
  j["id"] = instance.id;
  j["turns"] = nlohmann::ordered_json::array();
  for (const DialogueTurn& t : instance.turns)
    j["turns"].push_back({{"speaker", t.speaker}, {"text", t.text}});
  j["amr"] = nlohmann::ordered_json::array();
  for (const AmrGraph& g : instance.graphs) j["amr"].push_back(serialize_penman(g));
  j["align"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < instance.alignments.size(); ++i) {
    // serialize_penman renames variables, so alignment keys must follow or
    // the emitted record would reference ids absent from its own graph text.
    const auto renamed = canonical_variable_names(instance.graphs[i]);
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [node, words] : instance.alignments[i]) {
      const auto it = renamed.find(node);
      a[it != renamed.end() ? it->second : node] = words;
    }
    j["align"].push_back(std::move(a));
  }
  return j.dump();
}

CorpusReader::CorpusReader(const std::string& path, bool lenient)
    : in_(path), path_(path), lenient_(lenient) {
  if (!in_) throw DataError("cannot open corpus file '" + path + "'");
}

std::optional<DialogueInstance> CorpusReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      return parse_corpus_record(line);
    } catch (const DataError& e) {
      std::string msg = path_ + ":" + std::to_string(line_number_) + ": " + e.what();
      if (!lenient_) throw DataError(msg);
      ++skipped_;
      warnings_.push_back(std::move(msg));
    }
  }
  return std::nullopt;
}

std::vector<DialogueInstance> load_corpus(const std::string& path, bool lenient) {
  CorpusReader reader(path, lenient);
  std::vector<DialogueInstance> out;
  while (auto inst = reader.next()) out.push_back(std::move(*inst));
  return out;
}

}  // namespace sara
