// Tokenization, dialogue/AMR formatting, filtering, and the JSONL corpus
// format. Fixtures are small enough to hand-verify every parallel vector.
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sara/corpus.hpp"
#include "support/oracles.hpp"
#include "support/subprocess.hpp"

using namespace sara;
using sara::testing::base_vocab_tokens;
using sara::testing::TempDir;

namespace {

Vocabulary fixture_vocab() {
  return Vocabulary::from_tokens(base_vocab_tokens(
      {"alice", "bob", "hello", "there", "walk", "##ing", "the", "##s",
       "want-01", ":arg0", "(", ")", "boy", "person"}));
}

DialogueInstance two_turn_instance() {
  DialogueInstance inst;
  inst.id = "fix";
  inst.turns = {{"alice", "hello there"}, {"bob", "walking"}};
  inst.graphs = {parse_penman("(h / greet-01 :arg0 (p / person))"),
                 parse_penman("(w / walk-01)")};
  inst.alignments = {{{"h", {0}}, {"p", {1}}}, {{"w", {0}}}};
  return inst;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("vocabulary fixes the special-token layout") {
  const Vocabulary v = Vocabulary::from_tokens(base_vocab_tokens({}));
  CHECK(v.size() == 21);
  CHECK(v.pad_id() == 0);
  CHECK(v.unk_id() == 1);
  CHECK(v.cls_id() == 2);
  CHECK(v.sep_id() == 3);
  CHECK(v.mask_id() == 4);
  CHECK(v.utter_id(1) == 5);
  CHECK(v.utter_id(15) == 19);
  CHECK(v.id_of("<url>") == std::size_t{20});
  CHECK(v.specials().size() == 21);
  CHECK(v.special_tokens().size() == 21);
  CHECK(v.non_special_ids().empty());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.is_special_id(i));
  CHECK(v.token(0) == "[PAD]");
  CHECK_THROWS_AS(v.utter_id(0), DataError);
  CHECK_THROWS_AS(v.utter_id(16), DataError);
}

TEST_CASE("vocabulary extras are plain ids after the specials") {
  const Vocabulary v = fixture_vocab();
  CHECK(v.size() == 35);
  CHECK(v.id_of("alice") == std::size_t{21});
  CHECK(v.id_of("##ing") == std::size_t{26});
  CHECK(!v.id_of("zebra").has_value());
  CHECK(v.contains("boy"));
  CHECK(!v.is_special_id(21));
  CHECK(v.non_special_ids().size() == 14);
  CHECK(v.non_special_ids().front() == 21);
}

TEST_CASE("vocabulary hash tracks content") {
  const Vocabulary a = Vocabulary::from_tokens(base_vocab_tokens({"a"}));
  const Vocabulary b = Vocabulary::from_tokens(base_vocab_tokens({"a"}));
  const Vocabulary c = Vocabulary::from_tokens(base_vocab_tokens({"b"}));
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}

TEST_CASE("vocabulary load matches from_tokens and strips CRLF") {
  TempDir dir("vocab");
  const std::string path = dir.str("v.txt");
  {
    std::ofstream out(path, std::ios::binary);
    for (const std::string& t : base_vocab_tokens({"alice", "bob"}))
      out << t << "\r\n";
    out << "\r\n";  // trailing blank line is ignored
  }
  const Vocabulary loaded = Vocabulary::load(path);
  const Vocabulary built = Vocabulary::from_tokens(base_vocab_tokens({"alice", "bob"}));
  CHECK(loaded.size() == built.size());
  CHECK(loaded.hash() == built.hash());
  CHECK(loaded.id_of("bob") == built.id_of("bob"));
  CHECK_THROWS_AS(Vocabulary::load(dir.str("missing.txt")), DataError);
}

TEST_CASE("vocabulary rejects bad token lists") {
  auto tokens = base_vocab_tokens({"x"});
  auto dup = tokens;
  dup.push_back("x");
  CHECK_THROWS_AS(Vocabulary::from_tokens(dup), DataError);
  auto blank = tokens;
  blank.push_back("");
  CHECK_THROWS_AS(Vocabulary::from_tokens(blank), DataError);

  auto drop = [&](const std::string& victim) {
    std::vector<std::string> out;
    for (const auto& t : tokens)
      if (t != victim) out.push_back(t);
    return out;
  };
  CHECK_THROWS_AS(Vocabulary::from_tokens(drop("[MASK]")), DataError);
  CHECK_THROWS_AS(Vocabulary::from_tokens(drop("[Utter_7]")), DataError);
  CHECK_THROWS_AS(Vocabulary::from_tokens(drop("<url>")), DataError);
}

TEST_CASE("basic_words lowercases and splits punctuation") {
  CHECK(basic_words("Hello, there!") ==
        std::vector<std::string>{"hello", ",", "there", "!"});
  CHECK(basic_words("don't stop") ==
        std::vector<std::string>{"don", "'", "t", "stop"});
  CHECK(basic_words("<url> x") == std::vector<std::string>{"<url>", "x"});
  // Only the exact whitespace-delimited token "<url>" is atomic.
  CHECK(basic_words("a<url>b") ==
        std::vector<std::string>{"a", "<", "url", ">", "b"});
  CHECK(basic_words("").empty());
  CHECK(basic_words("   \t \n").empty());
}

TEST_CASE("tokenize applies greedy longest-match wordpiece") {
  const Vocabulary v = fixture_vocab();
  const TokenizedText t = tokenize("walking walks the", v);
  CHECK(t.pieces ==
        std::vector<std::string>{"walk", "##ing", "walk", "##s", "the"});
  CHECK(t.word_index == std::vector<std::size_t>{0, 0, 1, 1, 2});
  CHECK(t.word_start == std::vector<bool>{true, false, true, false, true});
  CHECK(t.word_count == 3);
  for (std::size_t id : t.ids) CHECK(id != v.unk_id());

  const TokenizedText unk = tokenize("qqq", v);
  CHECK(unk.pieces == std::vector<std::string>{"[UNK]"});
  CHECK(unk.ids == std::vector<std::size_t>{v.unk_id()});
  CHECK(unk.word_start == std::vector<bool>{true});

  const TokenizedText oversized = tokenize(std::string(65, 'a'), v);
  CHECK(oversized.pieces == std::vector<std::string>{"[UNK]"});

  const TokenizedText url = tokenize("<url>", v);
  CHECK(url.ids == std::vector<std::size_t>{20});
  CHECK(url.pieces == std::vector<std::string>{"<url>"});
}

TEST_CASE("format_dialogue produces the documented frame") {
  const Vocabulary v = fixture_vocab();
  const TokenSequence seq = format_dialogue(two_turn_instance(), v);
  CHECK(seq.kept_turns == 2);
  CHECK(seq.strings ==
        std::vector<std::string>{"[CLS]", "[Utter_1]", "alice", "hello",
                                 "there", "[Utter_2]", "bob", "walk", "##ing",
                                 "[SEP]"});
  CHECK(seq.ids ==
        std::vector<std::size_t>{2, 5, 21, 23, 24, 6, 22, 25, 26, 3});
  CHECK(seq.segment == std::vector<int>{0, 1, 1, 1, 1, 2, 2, 2, 2, 0});
  CHECK(seq.kind ==
        std::vector<TokenKind>{TokenKind::Cls, TokenKind::UtterMarker,
                               TokenKind::Speaker, TokenKind::Text,
                               TokenKind::Text, TokenKind::UtterMarker,
                               TokenKind::Speaker, TokenKind::Text,
                               TokenKind::Text, TokenKind::Sep});
  CHECK(seq.word_of_token ==
        std::vector<int>{-1, -1, -1, 0, 1, -1, -1, 0, 0, -1});
  CHECK(seq.word_starts == std::vector<bool>{false, false, false, true, true,
                                             false, false, true, false, false});

  CHECK(seq.maskable(3, v));   // "hello"
  CHECK(seq.maskable(8, v));   // "##ing"
  CHECK(!seq.maskable(0, v));  // [CLS]
  CHECK(!seq.maskable(2, v));  // speaker piece
  CHECK(!seq.maskable(5, v));  // utterance marker

  CHECK(seq.word_positions(0, 0) == std::vector<std::size_t>{3});
  CHECK(seq.word_positions(0, 1) == std::vector<std::size_t>{4});
  CHECK(seq.word_positions(1, 0) == std::vector<std::size_t>{7, 8});
  CHECK(seq.word_positions(0, 5).empty());
}

TEST_CASE("format_dialogue drops whole trailing utterances on overflow") {
  const Vocabulary v = fixture_vocab();
  const DialogueInstance inst = two_turn_instance();
  // Each turn costs 1 marker + 1 speaker piece + 2 text pieces = 4 tokens.
  const TokenSequence fits = format_dialogue(inst, v, 10);
  CHECK(fits.kept_turns == 2);
  CHECK(fits.length() == 10);

  const TokenSequence cut = format_dialogue(inst, v, 9);
  CHECK(cut.kept_turns == 1);
  CHECK(cut.length() == 6);
  CHECK(cut.strings.back() == "[SEP]");

  CHECK_THROWS_AS(format_dialogue(inst, v, 5), DataError);

  DialogueInstance empty;
  empty.id = "e";
  CHECK_THROWS_AS(format_dialogue(empty, v), DataError);

  DialogueInstance too_many;
  too_many.id = "t";
  too_many.turns.assign(16, {"alice", "hello"});
  CHECK_THROWS_AS(format_dialogue(too_many, v), DataError);
}

TEST_CASE("format_dialogue keeps empty utterances as bare markers") {
  const Vocabulary v = fixture_vocab();
  DialogueInstance inst;
  inst.id = "silent";
  inst.turns = {{"alice", ""}};
  const TokenSequence seq = format_dialogue(inst, v);
  CHECK(seq.strings ==
        std::vector<std::string>{"[CLS]", "[Utter_1]", "alice", "[SEP]"});
  CHECK(seq.word_positions(0, 0).empty());
}

TEST_CASE("format_amr prefers whole-token lookup with wordpiece fallback") {
  const Vocabulary v = fixture_vocab();
  const std::vector<std::string> tokens = {"(", "want-01", ":arg0",
                                           "BOY", "zzz", ")"};
  const TokenSequence seq = format_amr(tokens, v);
  CHECK(seq.strings ==
        std::vector<std::string>{"[CLS]", "(", "want-01", ":arg0", "boy",
                                 "[UNK]", ")", "[SEP]"});
  for (std::size_t i = 1; i + 1 < seq.length(); ++i) {
    CHECK(seq.kind[i] == TokenKind::Text);
    CHECK(seq.segment[i] == 0);
    CHECK(seq.word_of_token[i] == -1);
  }
}

TEST_CASE("format_amr keeps the front of an oversized graph") {
  const Vocabulary v = fixture_vocab();
  const std::vector<std::string> tokens = {"(", "want-01", ":arg0",
                                           "boy", ")"};
  const TokenSequence cut = format_amr(tokens, v, 5);
  CHECK(cut.strings == std::vector<std::string>{"[CLS]", "(", "want-01",
                                                ":arg0", "[SEP]"});
  const TokenSequence tiny = format_amr(tokens, v, 2);
  CHECK(tiny.strings == std::vector<std::string>{"[CLS]", "[SEP]"});
}

TEST_CASE("format_amr round-trips a linearized parse") {
  const Vocabulary v = fixture_vocab();
  const AmrGraph g = parse_penman("(w / want-01 :arg0 (b / boy))");
  const TokenSequence seq = format_amr(linearize(g), v);
  CHECK(seq.strings ==
        std::vector<std::string>{"[CLS]", "(", "want-01", ":arg0", "(", "boy",
                                 ")", ")", "[SEP]"});
  for (std::size_t id : seq.ids) CHECK(id != v.unk_id());
}

TEST_CASE("remap_alignments namespaces nodes and expands subwords") {
  const Vocabulary v = fixture_vocab();
  const DialogueInstance inst = two_turn_instance();
  const TokenSequence seq = format_dialogue(inst, v);
  const Alignment out = remap_alignments(inst, seq);
  REQUIRE(out.pairs.size() == 3);
  CHECK(out.pairs.at("u0.h") == std::set<std::size_t>{3});
  CHECK(out.pairs.at("u0.p") == std::set<std::size_t>{4});
  CHECK(out.pairs.at("u1.w") == std::set<std::size_t>{7, 8});

  const AmrGraph merged =
      build_dialogue_graph(inst.graphs, {"alice", "bob"});
  CHECK_NOTHROW(out.validate(merged, seq.length()));
}

TEST_CASE("remap_alignments skips dropped turns and flags bad words") {
  const Vocabulary v = fixture_vocab();
  const DialogueInstance inst = two_turn_instance();
  const TokenSequence cut = format_dialogue(inst, v, 9);
  REQUIRE(cut.kept_turns == 1);
  const Alignment out = remap_alignments(inst, cut);
  CHECK(out.pairs.count("u0.h") == 1);
  CHECK(out.pairs.count("u1.w") == 0);

  DialogueInstance oob = inst;
  oob.alignments[0]["h"] = {9};  // turn 0 has two words
  CHECK_THROWS_AS(remap_alignments(oob, format_dialogue(oob, v)), DataError);

  DialogueInstance hollow = inst;
  hollow.alignments[0]["h"] = {};  // nothing aligned: node simply absent
  const Alignment sparse =
      remap_alignments(hollow, format_dialogue(hollow, v));
  CHECK(sparse.pairs.count("u0.h") == 0);
  CHECK(sparse.pairs.count("u0.p") == 1);
}

TEST_CASE("filter keeps clean dialogues and rewrites URLs") {
  const Vocabulary v = fixture_vocab();
  const FilterDecision clean =
      filter_instance({{"alice", "hello there"}, {"bob", "walking"}}, v);
  CHECK(clean.keep);
  CHECK(clean.reasons.empty());
  CHECK(clean.rewritten_texts ==
        std::vector<std::string>{"hello there", "walking"});

  const FilterDecision urls = filter_instance(
      {{"alice", "see http://x.co now"},
       {"bob", "visit www.foo.com or https://a.b/c?d=1 today"}},
      v);
  CHECK(urls.keep);
  CHECK(urls.rewritten_texts ==
        std::vector<std::string>{"see <url> now",
                                 "visit <url> or <url> today"});
}

TEST_CASE("filter drops on special markers in raw text") {
  const Vocabulary v = fixture_vocab();
  for (const char* text : {"tell me about [MASK] please", "x [Utter_3] y",
                           "already has <url> inside", "[CLS]"}) {
    const FilterDecision d = filter_instance({{"alice", text}}, v);
    CHECK(!d.keep);
    REQUIRE(d.reasons.size() == 1);
    CHECK(d.reasons[0] == DropReason::SpecialMarkers);
    CHECK(d.rewritten_texts.empty());
  }
}

TEST_CASE("filter applies the non-English threshold at 10") {
  const Vocabulary v = fixture_vocab();
  auto accented = [](std::size_t n) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += "caf\xc3\xa9 ";
    text += "ok";
    return text;
  };
  CHECK(filter_instance({{"a", accented(10)}}, v).keep);
  const FilterDecision d = filter_instance({{"a", accented(11)}}, v);
  CHECK(!d.keep);
  REQUIRE(d.reasons.size() == 1);
  CHECK(d.reasons[0] == DropReason::NonEnglish);
}

TEST_CASE("filter applies the word threshold at 150 across turns") {
  const Vocabulary v = fixture_vocab();
  auto words = [](std::size_t n) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += "w ";
    return text;
  };
  CHECK(filter_instance({{"a", words(75)}, {"b", words(75)}}, v).keep);
  const FilterDecision d =
      filter_instance({{"a", words(75)}, {"b", words(76)}}, v);
  CHECK(!d.keep);
  REQUIRE(d.reasons.size() == 1);
  CHECK(d.reasons[0] == DropReason::TooManyWords);
}

TEST_CASE("filter applies the turn threshold at 15") {
  const Vocabulary v = fixture_vocab();
  const std::vector<DialogueTurn> fifteen(15, {"a", "hi"});
  CHECK(filter_instance(fifteen, v).keep);
  const std::vector<DialogueTurn> sixteen(16, {"a", "hi"});
  const FilterDecision d = filter_instance(sixteen, v);
  CHECK(!d.keep);
  REQUIRE(d.reasons.size() == 1);
  CHECK(d.reasons[0] == DropReason::TooManyTurns);
}

TEST_CASE("filter reports every violated rule in declaration order") {
  const Vocabulary v = fixture_vocab();
  std::string long_text = "[SEP] ";
  for (int i = 0; i < 151; ++i) long_text += "w ";
  std::vector<DialogueTurn> turns(16, {"a", "hi"});
  turns[0].text = long_text;
  const FilterDecision d = filter_instance(turns, v);
  CHECK(!d.keep);
  CHECK(d.reasons ==
        std::vector<DropReason>{DropReason::SpecialMarkers,
                                DropReason::TooManyWords,
                                DropReason::TooManyTurns});
}

TEST_CASE("drop reasons have stable report names") {
  CHECK(std::string(drop_reason_name(DropReason::SpecialMarkers)) ==
        "special-markers");
  CHECK(std::string(drop_reason_name(DropReason::NonEnglish)) == "non-english");
  CHECK(std::string(drop_reason_name(DropReason::TooManyWords)) == "length");
  CHECK(std::string(drop_reason_name(DropReason::TooManyTurns)) == "turns");
}

TEST_CASE("corpus records re-key alignments to the serialized names") {
  DialogueInstance inst;
  inst.id = "d1";
  inst.turns = {{"bob", "hello there"}};
  inst.graphs = {parse_penman("(x9 / greet-01 :arg0 (q2 / person))")};
  inst.alignments = {{{"x9", {0}}, {"q2", {1}}}};

  const std::string line = corpus_record_to_json(inst);
  CHECK(line.find("(g / greet-01 :arg0 (p / person))") != std::string::npos);

  const DialogueInstance back = parse_corpus_record(line);
  CHECK(back.id == "d1");
  CHECK(sara::testing::isomorphic(back.graphs[0], inst.graphs[0]));
  REQUIRE(back.alignments[0].size() == 2);
  CHECK(back.alignments[0].at("g") == std::vector<std::size_t>{0});
  CHECK(back.alignments[0].at("p") == std::vector<std::size_t>{1});
  // A second pass is byte-stable: names are already canonical.
  CHECK(corpus_record_to_json(back) == line);
}

TEST_CASE("corpus records keep attribute alignment keys verbatim") {
  DialogueInstance inst;
  inst.id = "d2";
  inst.turns = {{"bob", "year two thousand"}};
  inst.graphs = {parse_penman("(d / date-entity :year 2024)")};
  const std::string attr_id = inst.graphs[0].edges()[0].target;
  inst.alignments = {{{"d", {0}}, {attr_id, {1}}}};

  const DialogueInstance back = parse_corpus_record(corpus_record_to_json(inst));
  CHECK(back.alignments[0].count(attr_id) == 1);
}

TEST_CASE("corpus record parsing rejects schema violations") {
  const char* bad[] = {
      "not json at all",
      "[1, 2]",
      R"({"turns": [], "amr": [], "align": []})",                       // no id
      R"({"id": "x", "amr": [], "align": []})",                         // no turns
      R"({"id": "x", "turns": [{"speaker": "a", "text": "t"}],
          "amr": ["(b / boy)"]})",                                      // no align
      R"({"id": "x", "turns": [{"speaker": "a"}],
          "amr": ["(b / boy)"], "align": [{}]})",                       // no text
      R"({"id": "x", "turns": [{"speaker": "a", "text": "t"}],
          "amr": ["(b / boy"], "align": [{}]})",                        // bad penman
      R"({"id": "x", "turns": [{"speaker": "a", "text": "t"}],
          "amr": ["(b / boy)"], "align": [{"b": [-1]}]})",              // negative
      R"({"id": "x", "turns": [{"speaker": "a", "text": "t"}],
          "amr": ["(b / boy)"], "align": [[0]]})",                      // not object
      R"({"id": "x", "turns": [{"speaker": "a", "text": "t"}],
          "amr": [], "align": []})",                                    // lengths
      R"({"id": "x", "turns": [{"speaker": "a", "text": "t"}],
          "amr": ["(b / boy)"], "align": [{"zz": [0]}]})",              // bad node
      R"({"id": "x", "turns": [{"speaker": "a", "text": "t"}],
          "amr": ["(b / boy)"], "align": [{"b": [7]}]})",               // bad word
  };
  for (const char* line : bad) {
    CAPTURE(line);
    CHECK_THROWS_AS(parse_corpus_record(line), DataError);
  }
}

TEST_CASE("corpus reader is lenient or strict about malformed lines") {
  TempDir dir("reader");
  const std::string path = dir.str("corpus.jsonl");
  const std::string good =
      R"({"id": "ok", "turns": [{"speaker": "a", "text": "hello"}], )"
      R"("amr": ["(g / greet-01)"], "align": [{"g": [0]}]})";
  {
    std::ofstream out(path, std::ios::binary);
    out << good << "\n";
    out << "\n";                    // blank lines are skipped silently
    out << "{broken\n";
    out << good << "\r\n";          // CRLF tolerated
    out << R"({"id": "x"})" << "\n";
  }

  CorpusReader lenient(path, /*lenient=*/true);
  CHECK(lenient.next().has_value());
  CHECK(lenient.next().has_value());
  CHECK(!lenient.next().has_value());
  CHECK(lenient.skipped() == 2);
  REQUIRE(lenient.warnings().size() == 2);
  CHECK(lenient.warnings()[0].find(":3: ") != std::string::npos);
  CHECK(lenient.warnings()[1].find(":5: ") != std::string::npos);

  CorpusReader strict(path, /*lenient=*/false);
  CHECK(strict.next().has_value());
  CHECK_THROWS_WITH_AS(strict.next(),
                       doctest::Contains(":3: bad JSON"), DataError);

  CHECK_THROWS_AS(CorpusReader(dir.str("nope.jsonl"), true), DataError);
  CHECK(load_corpus(path, /*lenient=*/true).size() == 2);
  CHECK_THROWS_AS(load_corpus(path, /*lenient=*/false), DataError);
}

TEST_CASE("bundled synthetic corpus loads and is emit-stable") {
  const std::string path = std::string(SARA_DATA_DIR) + "/corpus.jsonl";
  const std::vector<DialogueInstance> corpus = load_corpus(path);
  REQUIRE(corpus.size() == 100);
  std::set<std::string> ids;
  for (const DialogueInstance& inst : corpus) ids.insert(inst.id);
  CHECK(ids.size() == 100);

  std::ifstream in(path);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CHECK(corpus_record_to_json(corpus[row]) == line);
    ++row;
  }
  CHECK(row == 100);
}

}  // TEST_SUITE
