#include "sara/probe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "json.hpp"
#include "sara/errors.hpp"
#include "sara/optimizer.hpp"
#include "sara/rng.hpp"
#include "sara/tensor.hpp"

namespace sara {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Split {
  Tensor features;  // n x pooler_dim, constant
  std::vector<std::size_t> gold;
  std::size_t size() const { return gold.size(); }
};

Split featurize(const DialogueModel& model, const Vocabulary& vocab,
                const std::vector<IntentExample>& examples,
                const std::vector<std::size_t>& indices,
                const std::map<std::string, std::size_t>& class_index,
                std::size_t max_tokens) {
  const std::size_t dim = model.config().pooler_dim;
  std::vector<double> flat;
  flat.reserve(indices.size() * dim);
  Split split;
  for (std::size_t i : indices) {
    const IntentExample& ex = examples[i];
    DialogueInstance instance;
    instance.id = ex.id;
    instance.turns = ex.turns;
    const TokenSequence seq = format_dialogue(instance, vocab, max_tokens);
    const std::vector<double>& v =
        model.pool_text(model.encode(seq.ids)).values();
    flat.insert(flat.end(), v.begin(), v.end());
    split.gold.push_back(class_index.at(ex.label));
  }
  split.features = Tensor::from_values(indices.size(), dim, std::move(flat));
  return split;
}

double accuracy(const Tensor& logits, const std::vector<std::size_t>& gold) {
  const std::size_t n = logits.rows(), c = logits.cols();
  const std::vector<double>& v = logits.values();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (v[i * c + j] > v[i * c + best]) best = j;
    if (best == gold[i]) ++correct;
  }
  return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

void ProbeConfig::validate() const {
  if (epochs == 0) throw ConfigError("probe epochs must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("probe lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("probe weight_decay must be >= 0");
}

std::string ProbeResult::to_json() const {
  ordered_json j;
  j["train_accuracy"] = train_accuracy;
  j["dev_accuracy"] = dev_accuracy;
  j["final_loss"] = final_loss;
  j["classes"] = classes;
  j["train_examples"] = train_examples;
  j["dev_examples"] = dev_examples;
  j["epochs"] = epochs;
  return j.dump(2);
}

std::vector<IntentExample> load_intent_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<IntentExample> examples;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_number) + ": " + e.what());
    }
    try {
      IntentExample ex;
      ex.id = j.at("id").get<std::string>();
      for (const auto& t : j.at("turns")) {
        DialogueTurn turn;
        turn.speaker = t.at("speaker").get<std::string>();
        turn.text = t.at("text").get<std::string>();
        ex.turns.push_back(std::move(turn));
      }
      ex.label = j.at("label").get<std::string>();
      if (ex.turns.empty())
        throw DataError("example '" + ex.id + "' has no turns");
      if (ex.label.empty())
        throw DataError("example '" + ex.id + "' has an empty label");
      examples.push_back(std::move(ex));
    } catch (const ordered_json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return examples;
}

ProbeResult run_probe(const DialogueModel& model, const Vocabulary& vocab,
                      const std::vector<IntentExample>& examples,
                      const ProbeConfig& config) {
  config.validate();
  if (examples.empty()) throw DataError("intent corpus is empty");

  std::set<std::string> class_set;
  for (const IntentExample& ex : examples) class_set.insert(ex.label);
  if (class_set.size() < 2)
    throw DataError("intent probe needs at least two classes");
  std::vector<std::string> classes(class_set.begin(), class_set.end());
  std::map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = i;

  std::vector<std::size_t> train_idx, dev_idx;
  for (std::size_t i = 0; i < examples.size(); ++i)
    (i % 4 == 3 ? dev_idx : train_idx).push_back(i);
  if (train_idx.empty()) throw DataError("training split is empty");

  std::set<std::string> train_classes;
  for (std::size_t i : train_idx) train_classes.insert(examples[i].label);
  for (const std::string& c : classes)
    if (!train_classes.count(c))
      throw DataError("class '" + c + "' never appears in the training split");

  const Split train = featurize(model, vocab, examples, train_idx, class_index,
                                config.max_dialogue_tokens);
  const Split dev = featurize(model, vocab, examples, dev_idx, class_index,
                              config.max_dialogue_tokens);

  const std::size_t dim = model.config().pooler_dim;
  const std::size_t num_classes = classes.size();
  Rng rng(config.seed);
  std::vector<Parameter> head;
  head.push_back({"probe.w",
                  Tensor::randn(dim, num_classes, rng, 0.02,
                                /*requires_grad=*/true),
                  true});
  head.push_back(
      {"probe.b", Tensor::zeros(1, num_classes, /*requires_grad=*/true), true});

  AdamWConfig oc;
  oc.lr = config.lr;
  oc.weight_decay = config.weight_decay;
  oc.total_steps = config.epochs;
  AdamW optimizer(head, oc);

  double last_loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    optimizer.zero_grad();
    const Tensor logits =
        intent_logits(train.features, head[0].tensor, head[1].tensor);
    const Tensor gold_lp = pick_per_row(log_softmax_rows(logits), train.gold);
    const Tensor loss = mul_scalar(sum_all(gold_lp), -inv_n);
    backward(loss);
    last_loss = loss.item();
    optimizer.step();
  }

  ProbeResult result;
  result.final_loss = last_loss;
  result.classes = classes;
  result.train_examples = train.size();
  result.dev_examples = dev.size();
  result.epochs = config.epochs;
  result.train_accuracy = accuracy(
      intent_logits(train.features, head[0].tensor, head[1].tensor), train.gold);
  result.dev_accuracy =
      dev.size() == 0
          ? 0.0
          : accuracy(intent_logits(dev.features, head[0].tensor, head[1].tensor),
                     dev.gold);
  return result;
}

}  // namespace sara
