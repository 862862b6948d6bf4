#include "sara/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "sara/checkpoint.hpp"
#include "sara/errors.hpp"
#include "sara/rng.hpp"
#include "sara/tensor.hpp"

namespace sara {
namespace {

using ordered_json = nlohmann::ordered_json;

// Salt so the dropout stream never collides with the masking stream for the
// same (seed, step, instance).
constexpr std::uint64_t kDropoutSalt = 0x64726f70756f7421ULL;

constexpr const char* kOptimizerPrefix = "adam.";

// Folds per-instance head losses into one batch-level sum + count.
struct LossAccumulator {
  Tensor sum;
  std::size_t count = 0;
  bool any = false;

  void add_head(const HeadLoss& h) {
    if (h.empty) return;
    sum = any ? add(sum, h.sum) : h.sum;
    count += h.count;
    any = true;
  }

  Tensor value(bool sum_losses) const {
    if (!any) return Tensor::scalar(0.0);
    if (sum_losses || count <= 1) return sum;
    return mul_scalar(sum, 1.0 / static_cast<double>(count));
  }
};

Tensor stack_rows(const std::vector<Tensor>& rows) {
  Tensor out = rows.front();
  for (std::size_t i = 1; i < rows.size(); ++i) out = concat_rows(out, rows[i]);
  return out;
}

std::string checkpoint_sidecar(const std::string& prefix) {
  return prefix + ".json";
}
std::string checkpoint_payload(const std::string& prefix) {
  return prefix + ".bin";
}

}  // namespace

void TrainingConfig::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw ConfigError("loss weights must be finite");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 ||
      adam_beta2 >= 1.0)
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (micro_batch < 2)
    throw ConfigError(
        "micro_batch must be at least 2 (the agreement loss needs in-batch "
        "negatives)");
  if (grad_accum == 0) throw ConfigError("grad_accum must be at least 1");
  if (epochs == 0 && max_steps == 0)
    throw ConfigError("either epochs or max_steps must be positive");
  if (log_every == 0) throw ConfigError("log_every must be at least 1");
  masking.validate();
}

std::string LossBreakdown::to_json() const {
  ordered_json j;
  j["step"] = step;
  j["sem_mlm"] = sem_mlm;
  j["rel"] = rel;
  j["sim"] = sim;
  j["total"] = total;
  j["lr"] = lr;
  j["masked_tokens"] = masked_tokens;
  j["triples"] = triples;
  j["unseen_labels"] = unseen_labels;
  return j.dump();
}

LossBreakdown LossBreakdown::from_json(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("bad metrics line: ") + e.what());
  }
  LossBreakdown b;
  try {
    b.step = j.at("step").get<std::size_t>();
    b.sem_mlm = j.at("sem_mlm").get<double>();
    b.rel = j.at("rel").get<double>();
    b.sim = j.at("sim").get<double>();
    b.total = j.at("total").get<double>();
    b.lr = j.at("lr").get<double>();
    b.masked_tokens = j.at("masked_tokens").get<std::size_t>();
    b.triples = j.at("triples").get<std::size_t>();
    b.unseen_labels = j.at("unseen_labels").get<std::size_t>();
  } catch (const ordered_json::exception& e) {
    throw DataError(std::string("bad metrics line: ") + e.what());
  }
  return b;
}

PreparedInstance prepare_instance(const DialogueInstance& instance,
                                  const Vocabulary& vocab,
                                  const TrainingConfig& config) {
  PreparedInstance out;
  out.id = instance.id;
  out.seq = format_dialogue(instance, vocab, config.max_dialogue_tokens);

  const std::size_t kept = out.seq.kept_turns;
  std::vector<AmrGraph> graphs(instance.graphs.begin(),
                               instance.graphs.begin() +
                                   static_cast<std::ptrdiff_t>(kept));
  std::vector<std::string> speakers;
  speakers.reserve(kept);
  for (std::size_t i = 0; i < kept; ++i)
    speakers.push_back(instance.turns[i].speaker);
  const AmrGraph dialogue = build_dialogue_graph(graphs, speakers);

  out.alignment = remap_alignments(instance, out.seq);
  out.alignment.validate(dialogue, out.seq.length());
  out.edges = project_edges(dialogue, out.alignment, config.projection);
  out.amr_ids = format_amr(linearize(dialogue), vocab, config.max_amr_tokens).ids;
  return out;
}

std::vector<PreparedInstance> prepare_corpus(
    const std::vector<DialogueInstance>& corpus, const Vocabulary& vocab,
    const TrainingConfig& config) {
  std::vector<PreparedInstance> out;
  out.reserve(corpus.size());
  for (const DialogueInstance& instance : corpus) {
    try {
      out.push_back(prepare_instance(instance, vocab, config));
    } catch (const DataError& e) {
      throw DataError("instance '" + instance.id + "': " + e.what());
    }
  }
  return out;
}

RelationLabelInventory collect_labels(
    const std::vector<DialogueInstance>& corpus) {
  std::set<std::string> labels;
  for (const DialogueInstance& instance : corpus) {
    std::vector<std::string> speakers;
    speakers.reserve(instance.turns.size());
    for (const DialogueTurn& turn : instance.turns)
      speakers.push_back(turn.speaker);
    const AmrGraph dialogue = build_dialogue_graph(instance.graphs, speakers);
    for (const AmrEdge& edge : dialogue.edges()) labels.insert(edge.label);
  }
  return RelationLabelInventory::from_labels(labels);
}

Trainer::Trainer(DialogueModel& model, const Vocabulary& vocab,
                 std::vector<PreparedInstance> corpus, TrainingConfig config)
    : model_(model),
      vocab_(vocab),
      corpus_(std::move(corpus)),
      config_(std::move(config)),
      total_steps_([&] {
        config_.validate();
        if (corpus_.empty()) throw DataError("training corpus is empty");
        if (config_.max_steps > 0) return config_.max_steps;
        const std::size_t per_step = config_.micro_batch * config_.grad_accum;
        const std::size_t steps_per_epoch =
            (corpus_.size() + per_step - 1) / per_step;
        return config_.epochs * std::max<std::size_t>(steps_per_epoch, 1);
      }()),
      optimizer_(model.parameters(), [&] {
        AdamWConfig oc;
        oc.lr = config_.lr;
        oc.beta1 = config_.adam_beta1;
        oc.beta2 = config_.adam_beta2;
        oc.eps = config_.adam_eps;
        oc.weight_decay = config_.weight_decay;
        oc.warmup_steps = config_.warmup_steps;
        oc.total_steps = total_steps_;
        return oc;
      }()) {}

std::vector<std::size_t> Trainer::next_micro_indices() {
  std::vector<std::size_t> indices(config_.micro_batch);
  if (config_.overfit_single_batch) {
    for (std::size_t i = 0; i < indices.size(); ++i)
      indices[i] = i % corpus_.size();
    return indices;
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    indices[i] = cursor_;
    cursor_ = (cursor_ + 1) % corpus_.size();
  }
  return indices;
}

LossBreakdown Trainer::train_step() {
  const std::size_t step = optimizer_.steps_taken();
  const double lr_now = optimizer_.current_lr();
  const bool sum_losses = model_.config().sum_losses;
  const bool use_dropout = model_.config().dropout > 0.0;

  optimizer_.zero_grad();

  double sem_sum = 0.0, rel_sum = 0.0, sim_sum = 0.0;
  std::size_t masked_tokens = 0, triples = 0, unseen_labels = 0;

  for (std::size_t micro = 0; micro < config_.grad_accum; ++micro) {
    const std::vector<std::size_t> indices = next_micro_indices();

    LossAccumulator mlm_acc, rel_acc;
    std::vector<Tensor> text_pooled, amr_pooled;
    text_pooled.reserve(indices.size());
    amr_pooled.reserve(indices.size());

    for (std::size_t idx : indices) {
      const PreparedInstance& inst = corpus_[idx];

      Rng mask_rng(derive_seed(config_.seed, step, inst.id));
      const MaskPattern pattern = sample_semantic_mask(
          inst.seq, vocab_, inst.alignment, config_.masking, mask_rng);

      Rng dropout_rng(derive_seed(config_.seed ^ kDropoutSalt, step, inst.id));
      Rng* drop = use_dropout ? &dropout_rng : nullptr;

      const EncoderOutput text_out =
          model_.encode(pattern.corrupted_ids, nullptr, drop);
      mlm_acc.add_head(model_.mlm_loss(text_out, pattern));
      masked_tokens += pattern.count();

      const HeadLoss rel = model_.relation_loss(text_out, inst.edges);
      rel_acc.add_head(rel);
      if (!rel.empty) {
        triples += inst.edges.triples.size();
        unseen_labels += rel.unseen_labels;
      }

      const EncoderOutput amr_out = model_.encode_amr(inst.amr_ids, nullptr, drop);
      text_pooled.push_back(model_.pool_text(text_out));
      amr_pooled.push_back(model_.pool_amr(amr_out));
    }

    const Tensor sem = mlm_acc.value(sum_losses);
    const Tensor rel = rel_acc.value(sum_losses);
    const HeadLoss agree = model_.agreement_loss(
        stack_rows(text_pooled), stack_rows(amr_pooled), config_.tau,
        config_.negatives_per_example);
    const Tensor sim = agree.value(sum_losses);

    // The joint objective, composed exactly as it is reported:
    // total = sem + alpha * rel + beta * sim.
    const Tensor total =
        add(add(sem, mul_scalar(rel, config_.alpha)), mul_scalar(sim, config_.beta));
    backward(config_.grad_accum > 1
                 ? mul_scalar(total, 1.0 / static_cast<double>(config_.grad_accum))
                 : total);

    sem_sum += sem.item();
    rel_sum += rel.item();
    sim_sum += sim.item();
  }

  optimizer_.step();

  LossBreakdown b;
  b.step = optimizer_.steps_taken();
  const double n = static_cast<double>(config_.grad_accum);
  b.sem_mlm = sem_sum / n;
  b.rel = rel_sum / n;
  b.sim = sim_sum / n;
  b.total = b.sem_mlm + config_.alpha * b.rel + config_.beta * b.sim;
  b.lr = lr_now;
  b.masked_tokens = masked_tokens;
  b.triples = triples;
  b.unseen_labels = unseen_labels;
  return b;
}

std::vector<LossBreakdown> Trainer::run(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string metrics_path = out_dir + "/metrics.jsonl";
  const bool resuming = optimizer_.steps_taken() > 0;
  std::ofstream metrics(metrics_path,
                        resuming ? std::ios::app : std::ios::trunc);
  if (!metrics) throw DataError("cannot open " + metrics_path + " for writing");

  std::vector<LossBreakdown> history;
  while (optimizer_.steps_taken() < total_steps_) {
    const LossBreakdown b = train_step();
    history.push_back(b);
    if (b.step % config_.log_every == 0 || b.step == total_steps_)
      metrics << b.to_json() << '\n';
    if (config_.checkpoint_every > 0 && b.step % config_.checkpoint_every == 0 &&
        b.step != total_steps_) {
      std::ostringstream name;
      name << out_dir << "/ckpt-step-" << b.step;
      save_checkpoint(name.str());
    }
  }
  metrics.flush();
  if (!metrics) throw DataError("failed writing " + metrics_path);
  save_checkpoint(out_dir + "/ckpt-final");
  return history;
}

void Trainer::save_checkpoint(const std::string& path_prefix) const {
  std::vector<TensorRecord> records = model_.state();
  for (TensorRecord& r : optimizer_.state()) records.push_back(std::move(r));
  save_tensor_file(checkpoint_payload(path_prefix), records);

  ordered_json sidecar;
  sidecar["model"] = ordered_json::parse(model_.config().to_json());
  sidecar["labels"] = model_.inventory().labels();
  sidecar["vocab_hash"] = vocab_.hash();
  sidecar["step"] = optimizer_.steps_taken();
  const std::string path = checkpoint_sidecar(path_prefix);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << sidecar.dump(2) << '\n';
  if (!out.flush()) throw DataError("failed writing " + path);
}

void Trainer::load_checkpoint(const std::string& path_prefix) {
  const LoadedCheckpoint loaded = read_checkpoint(path_prefix);
  if (loaded.vocab_hash != vocab_.hash())
    throw DataError("checkpoint was built against a different vocabulary");
  if (loaded.config.to_json() != model_.config().to_json())
    throw DataError("checkpoint model configuration does not match");
  if (loaded.inventory.labels() != model_.inventory().labels())
    throw DataError("checkpoint relation inventory does not match");
  model_.load_state(loaded.model_records);
  optimizer_.load_state(loaded.optimizer_records);
  // The batch cursor is a pure function of the number of completed steps.
  cursor_ = (optimizer_.steps_taken() * config_.grad_accum *
             config_.micro_batch) %
            corpus_.size();
}

LoadedCheckpoint read_checkpoint(const std::string& path_prefix) {
  const std::string sidecar_path = checkpoint_sidecar(path_prefix);
  std::ifstream in(sidecar_path);
  if (!in) throw DataError("cannot open " + sidecar_path);
  ordered_json sidecar;
  try {
    sidecar = ordered_json::parse(in);
  } catch (const ordered_json::exception& e) {
    throw DataError(sidecar_path + ": " + e.what());
  }

  LoadedCheckpoint out;
  try {
    out.config = ModelConfig::from_json(sidecar.at("model").dump());
    out.inventory = RelationLabelInventory::from_ordered(
        sidecar.at("labels").get<std::vector<std::string>>());
    out.vocab_hash = sidecar.at("vocab_hash").get<std::uint64_t>();
    out.step = sidecar.at("step").get<std::size_t>();
  } catch (const ordered_json::exception& e) {
    throw DataError(sidecar_path + ": " + e.what());
  }

  for (TensorRecord& r : load_tensor_file(checkpoint_payload(path_prefix))) {
    if (r.name.rfind(kOptimizerPrefix, 0) == 0)
      out.optimizer_records.push_back(std::move(r));
    else
      out.model_records.push_back(std::move(r));
  }
  return out;
}

DialogueModel load_model(const LoadedCheckpoint& loaded) {
  Rng rng(0);
  DialogueModel model(loaded.config, loaded.inventory, rng);
  model.load_state(loaded.model_records);
  return model;
}

double retrieval_accuracy(const DialogueModel& model,
                          const std::vector<PreparedInstance>& corpus,
                          std::size_t batch) {
  if (batch < 2) throw ConfigError("retrieval batch must be at least 2");
  const std::size_t batches = corpus.size() / batch;
  if (batches == 0)
    throw DataError("corpus smaller than one retrieval batch");

  const std::size_t dim = model.config().pooler_dim;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<std::vector<double>> text_rows, amr_rows;
    text_rows.reserve(batch);
    amr_rows.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const PreparedInstance& inst = corpus[b * batch + i];
      text_rows.push_back(model.pool_text(model.encode(inst.seq.ids)).values());
      amr_rows.push_back(model.pool_amr(model.encode_amr(inst.amr_ids)).values());
    }
    auto normalize = [dim](std::vector<double>& v) {
      double norm = 0.0;
      for (std::size_t k = 0; k < dim; ++k) norm += v[k] * v[k];
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (std::size_t k = 0; k < dim; ++k) v[k] /= norm;
    };
    for (auto& v : text_rows) normalize(v);
    for (auto& v : amr_rows) normalize(v);

    for (std::size_t i = 0; i < batch; ++i) {
      std::size_t best = 0;
      double best_sim = -2.0;
      for (std::size_t j = 0; j < batch; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k)
          dot += text_rows[i][k] * amr_rows[j][k];
        if (dot > best_sim) {
          best_sim = dot;
          best = j;
        }
      }
      if (best == i) ++correct;
    }
  }
  return static_cast<double>(correct) /
         static_cast<double>(batches * batch);
}

}  // namespace sara
