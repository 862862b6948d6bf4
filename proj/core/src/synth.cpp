#include "sara/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "sara/amr_graph.hpp"
#include "sara/errors.hpp"
#include "sara/rng.hpp"

namespace sara {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Template {
  const char* text;
  const char* penman;
  // node id -> word indices into the whitespace split of `text`
  std::vector<std::pair<const char*, std::vector<std::size_t>>> align;
};

// Texts are lowercase and punctuation-free so the word indices below refer
// to the basic whitespace split. Within each graph the concept initials are
// distinct, which keeps node ids stable across serialize/parse round trips.
const std::vector<Template>& templates() {
  static const std::vector<Template> t = {
      {"the boy wants to travel",
       "(w / want-01 :arg0 (b / boy) :arg1 (t / travel-02 :arg0 b))",
       {{"w", {2}}, {"b", {1}}, {"t", {4}}}},
      {"the girl sees a dog",
       "(s / see-01 :arg0 (g / girl) :arg1 (d / dog))",
       {{"s", {2}}, {"g", {1}}, {"d", {4}}}},
      {"my friend likes green tea",
       "(l / like-01 :arg0 (f / friend) :arg1 (t / tea :mod (g / green)))",
       {{"l", {2}}, {"f", {1}}, {"t", {4}}, {"g", {3}}}},
      {"the housewife cooks rice at the market",
       "(c / cook-01 :arg0 (h / housewife) :arg1 (r / rice) "
       ":location (m / market))",
       {{"c", {2}}, {"h", {1}}, {"r", {3}}, {"m", {6}}}},
      {"does the boy like music",
       "(l / like-01 :mode interrogative :arg0 (b / boy) :arg1 (m / music))",
       {{"l", {3}}, {"b", {2}}, {"m", {4}}}},
      {"she reads a long book",
       "(r / read-01 :arg0 (s / she) :arg1 (b / book :mod (l / long)))",
       {{"r", {1}}, {"s", {0}}, {"b", {4}}, {"l", {3}}}},
      {"the lazy cat sleeps today",
       "(s / sleep-01 :arg0 (c / cat :mod (l / lazy)) :time (t / today))",
       {{"s", {3}}, {"c", {2}}, {"l", {1}}, {"t", {4}}}},
      {"we plan to visit the museum",
       "(p / plan-01 :arg0 (w / we) :arg1 (v / visit-01 :arg0 w "
       ":arg1 (m / museum)))",
       {{"p", {1}}, {"w", {0}}, {"v", {3}}, {"m", {5}}}},
      {"the farmer grows corn every year",
       "(g / grow-01 :arg0 (f / farmer) :arg1 (c / corn) "
       ":frequency (y / year :mod (e / every)))",
       {{"g", {2}}, {"f", {1}}, {"c", {3}}, {"y", {5}}, {"e", {4}}}},
      {"i drink coffee in the morning",
       "(d / drink-01 :arg0 (i / i) :arg1 (c / coffee) :time (m / morning))",
       {{"d", {1}}, {"i", {0}}, {"c", {2}}, {"m", {5}}}},
      {"the teacher answers five questions",
       "(a / answer-01 :arg0 (t / teacher) :arg1 (q / question :quant 5))",
       {{"a", {2}}, {"t", {1}}, {"q", {4}}}},
      {"he walks to the old bridge",
       "(w / walk-01 :arg0 (h / he) :destination (b / bridge :mod (o / old)))",
       {{"w", {1}}, {"h", {0}}, {"b", {5}}, {"o", {4}}}},
      {"the chef tastes hot soup",
       "(t / taste-01 :arg0 (c / chef) :arg1 (s / soup :mod (h / hot)))",
       {{"t", {2}}, {"c", {1}}, {"s", {4}}, {"h", {3}}}},
      {"the nurse helps old people",
       "(h / help-01 :arg0 (n / nurse) :arg1 (p / person :mod (o / old)))",
       {{"h", {2}}, {"n", {1}}, {"p", {4}}, {"o", {3}}}},
      {"the driver fixes a red truck",
       "(f / fix-02 :arg0 (d / driver) :arg1 (t / truck :mod (r / red)))",
       {{"f", {2}}, {"d", {1}}, {"t", {5}}, {"r", {4}}}},
      {"birds sing in the green tree",
       "(s / sing-01 :arg0 (b / bird) :location (t / tree :mod (g / green)))",
       {{"s", {1}}, {"b", {0}}, {"t", {5}}, {"g", {4}}}},
      {"the pupil solves a hard riddle",
       "(s / solve-01 :arg0 (p / pupil) :arg1 (r / riddle :mod (h / hard)))",
       {{"s", {2}}, {"p", {1}}, {"r", {5}}, {"h", {4}}}},
      {"the king builds a stone castle",
       "(b / build-01 :arg0 (k / king) :arg1 (c / castle :mod (s / stone)))",
       {{"b", {2}}, {"k", {1}}, {"c", {5}}, {"s", {4}}}},
      {"the doctor visits her patient",
       "(v / visit-01 :arg0 (d / doctor) :arg1 (p / patient))",
       {{"v", {2}}, {"d", {1}}, {"p", {4}}}},
      {"the sailor crosses a wide river",
       "(c / cross-02 :arg0 (s / sailor) :arg1 (r / river :mod (w / wide)))",
       {{"c", {2}}, {"s", {1}}, {"r", {5}}, {"w", {4}}}},
      {"the monkey eats a ripe banana",
       "(e / eat-01 :arg0 (m / monkey) :arg1 (b / banana :mod (r / ripe)))",
       {{"e", {2}}, {"m", {1}}, {"b", {5}}, {"r", {4}}}},
      {"the painter draws a small house",
       "(d / draw-01 :arg0 (p / painter) :arg1 (h / house :mod (s / small)))",
       {{"d", {2}}, {"p", {1}}, {"h", {5}}, {"s", {4}}}},
      {"the children swim in a quiet lake",
       "(s / swim-01 :arg0 (c / child) :location (l / lake :mod (q / quiet)))",
       {{"s", {2}}, {"c", {1}}, {"l", {6}}, {"q", {5}}}},
      {"the waiter carries fresh bread",
       "(c / carry-01 :arg0 (w / waiter) :arg1 (b / bread :mod (f / fresh)))",
       {{"c", {2}}, {"w", {1}}, {"b", {4}}, {"f", {3}}}},
      {"the judge hears two cases",
       "(h / hear-01 :arg0 (j / judge) :arg1 (c / case :quant 2))",
       {{"h", {2}}, {"j", {1}}, {"c", {4}}}},
      {"the man buys six lamps",
       "(b / buy-01 :arg0 (m / man) :arg1 (l / lamp :quant 6))",
       {{"b", {2}}, {"m", {1}}, {"l", {4}}}},
      {"the woman hopes to dance",
       "(h / hope-01 :arg0 (w / woman) :arg1 (d / dance-01 :arg0 w))",
       {{"h", {2}}, {"w", {1}}, {"d", {4}}}},
      {"the dog wants to play",
       "(w / want-01 :arg0 (d / dog) :arg1 (p / play-01 :arg0 d))",
       {{"w", {2}}, {"d", {1}}, {"p", {4}}}},
  };
  return t;
}

const std::vector<std::string>& request_texts() {
  static const std::vector<std::string> t = {
      "please open the window",
      "could you send the report",
      "please bring me some water",
      "could you close the door",
  };
  return t;
}

const std::vector<std::string>& farewell_texts() {
  static const std::vector<std::string> t = {
      "goodbye see you tomorrow",
      "bye take care my friend",
      "goodbye and good night",
      "bye see you soon",
  };
  return t;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string padded(const char* prefix, std::size_t i) {
  std::ostringstream out;
  out << prefix << '-';
  std::string digits = std::to_string(i);
  for (std::size_t k = digits.size(); k < 4; ++k) out << '0';
  out << digits;
  return out.str();
}

std::vector<std::string> build_vocab(const std::vector<AmrGraph>& graphs) {
  std::set<std::string> pieces;

  auto add_text = [&pieces](const std::string& text) {
    for (const std::string& w : split_words(text)) {
      if (w == "housewife") {  // exercised via the wordpiece fallback
        pieces.insert("house");
        pieces.insert("##wife");
      } else {
        pieces.insert(w);
      }
    }
  };
  for (const Template& t : templates()) add_text(t.text);
  for (const std::string& t : request_texts()) add_text(t);
  for (const std::string& t : farewell_texts()) add_text(t);
  add_text("alice");
  add_text("bob");

  // Every token the linearizer can emit for a dialogue over the full
  // template pool, except "housewife" (kept out deliberately).
  std::vector<std::string> speakers;
  for (std::size_t i = 0; i < graphs.size(); ++i)
    speakers.push_back(i % 2 == 0 ? "alice" : "bob");
  for (const std::string& tok : linearize(build_dialogue_graph(graphs, speakers)))
    if (tok != "housewife") pieces.insert(tok);

  std::vector<std::string> vocab = {kPadToken, kUnkToken, kClsToken,
                                    kSepToken, kMaskToken};
  for (std::size_t u = 1; u <= kMaxTurns; ++u)
    vocab.push_back("[Utter_" + std::to_string(u) + "]");
  vocab.push_back(kUrlToken);
  vocab.insert(vocab.end(), pieces.begin(), pieces.end());
  return vocab;
}

}  // namespace

SynthData make_synth_data(std::uint64_t seed, std::size_t n_dialogues,
                          std::size_t n_intents) {
  if (n_dialogues == 0) throw ConfigError("n_dialogues must be positive");
  SynthData data;

  std::vector<AmrGraph> template_graphs;
  for (const Template& t : templates())
    template_graphs.push_back(parse_penman(t.penman));
  data.vocab_tokens = build_vocab(template_graphs);

  Rng rng(seed);
  std::set<std::string> signatures;
  for (std::size_t i = 0; i < n_dialogues; ++i) {
    DialogueInstance instance;
    instance.id = padded("dlg", i);

    // Each dialogue is three turns drawn from distinct templates, and the
    // unordered template set is unique across the corpus, so every dialogue
    // is identified by its content alone and retrieval is unambiguous.
    // Fixing the turn count also stops sequence length from acting as a
    // cheap similarity shortcut during contrastive training.
    constexpr std::size_t kTurns = 3;
    std::vector<std::size_t> choice;
    bool alice_first = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      choice.clear();
      while (choice.size() < kTurns) {
        const std::size_t c = rng.uniform_int(templates().size());
        if (std::find(choice.begin(), choice.end(), c) == choice.end())
          choice.push_back(c);
      }
      alice_first = rng.uniform() < 0.5;
      std::vector<std::size_t> bag = choice;
      std::sort(bag.begin(), bag.end());
      std::string sig;
      for (std::size_t c : bag) sig += std::to_string(c) + ":";
      if (signatures.insert(sig).second) break;
      if (attempt == 999)
        throw ConfigError("n_dialogues too large for the template pool");
    }

    for (std::size_t u = 0; u < choice.size(); ++u) {
      const Template& t = templates()[choice[u]];
      DialogueTurn turn;
      turn.speaker = (u % 2 == 0) == alice_first ? "alice" : "bob";
      turn.text = t.text;
      instance.turns.push_back(std::move(turn));
      instance.graphs.push_back(template_graphs[choice[u]]);
      std::map<std::string, std::vector<std::size_t>> align;
      for (const auto& [node, words] : t.align) align[node] = words;
      instance.alignments.push_back(std::move(align));
    }
    instance.validate();
    data.corpus.push_back(std::move(instance));
  }

  const std::vector<std::string> labels = {"request", "inform", "farewell"};
  for (std::size_t j = 0; j < n_intents; ++j) {
    IntentExample ex;
    ex.id = padded("intent", j);
    ex.label = labels[j % 3];
    std::string text;
    if (ex.label == "request")
      text = request_texts()[rng.uniform_int(request_texts().size())];
    else if (ex.label == "inform")
      text = templates()[rng.uniform_int(templates().size())].text;
    else
      text = farewell_texts()[rng.uniform_int(farewell_texts().size())];
    ex.turns.push_back({j % 2 == 0 ? "alice" : "bob", text});
    data.intents.push_back(std::move(ex));
  }
  return data;
}

void write_synth_data(const SynthData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  auto open = [](const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    return out;
  };

  {
    std::ofstream out = open(dir + "/vocab.txt");
    for (const std::string& tok : data.vocab_tokens) out << tok << '\n';
    if (!out.flush()) throw DataError("failed writing " + dir + "/vocab.txt");
  }
  {
    std::ofstream out = open(dir + "/corpus.jsonl");
    for (const DialogueInstance& instance : data.corpus)
      out << corpus_record_to_json(instance) << '\n';
    if (!out.flush()) throw DataError("failed writing " + dir + "/corpus.jsonl");
  }
  {
    std::ofstream out = open(dir + "/intents.jsonl");
    for (const IntentExample& ex : data.intents) {
      ordered_json j;
      j["id"] = ex.id;
      ordered_json turns = ordered_json::array();
      for (const DialogueTurn& t : ex.turns)
        turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
      j["turns"] = std::move(turns);
      j["label"] = ex.label;
      out << j.dump() << '\n';
    }
    if (!out.flush()) throw DataError("failed writing " + dir + "/intents.jsonl");
  }
}

}  // namespace sara
