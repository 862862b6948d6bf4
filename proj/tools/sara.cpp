// Command-line front end: preprocess, stats, pretrain, probe, grad-check,
// mask-audit. Every flag can also come from a config file (--config, INI/TOML
// style) or from the environment with a SARA_ prefix.
//
// Exit codes: 0 success, 1 usage/configuration, 2 data error, 3 numeric
// failure (including internal shape errors).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sara/alignment.hpp"
#include "sara/corpus.hpp"
#include "sara/errors.hpp"
#include "sara/masking.hpp"
#include "sara/model.hpp"
#include "sara/probe.hpp"
#include "sara/rng.hpp"
#include "sara/stats.hpp"
#include "sara/synth.hpp"
#include "sara/tensor.hpp"
#include "sara/trainer.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

void emit(const std::string& text, const std::string& output_path) {
  if (output_path.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(output_path, std::ios::trunc);
  if (!out) throw sara::DataError("cannot open " + output_path + " for writing");
  out << text << '\n';
  if (!out.flush()) throw sara::DataError("failed writing " + output_path);
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessOptions {
  std::string input, vocab, output, report;
  bool lenient = false;
};

void run_preprocess(const PreprocessOptions& opt) {
  const sara::Vocabulary vocab = sara::Vocabulary::load(opt.vocab);
  sara::CorpusReader reader(opt.input, opt.lenient);
  std::ofstream out(opt.output, std::ios::trunc);
  if (!out) throw sara::DataError("cannot open " + opt.output + " for writing");

  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped;
  std::vector<std::string> warnings;
  while (auto instance = reader.next()) {
    const sara::FilterDecision decision =
        sara::filter_instance(instance->turns, vocab);
    if (!decision.keep) {
      for (sara::DropReason r : decision.reasons)
        ++dropped[sara::drop_reason_name(r)];
      continue;
    }
    for (std::size_t i = 0; i < instance->turns.size(); ++i)
      instance->turns[i].text = decision.rewritten_texts[i];
    try {
      instance->validate();
      // Dry-run the token-level remap so alignment problems surface here,
      // not mid-training.
      const sara::TokenSequence seq = sara::format_dialogue(*instance, vocab);
      sara::remap_alignments(*instance, seq);
    } catch (const sara::DataError& e) {
      if (!opt.lenient) throw;
      warnings.push_back("instance '" + instance->id + "': " + e.what());
      continue;
    }
    out << sara::corpus_record_to_json(*instance) << '\n';
    ++kept;
  }
  if (!out.flush()) throw sara::DataError("failed writing " + opt.output);

  ordered_json report;
  report["kept"] = kept;
  report["dropped"] = dropped;
  report["skipped_lines"] = reader.skipped();
  ordered_json warn = ordered_json::array();
  for (const std::string& w : reader.warnings()) warn.push_back(w);
  for (const std::string& w : warnings) warn.push_back(w);
  report["warnings"] = std::move(warn);
  emit(report.dump(2), opt.report);
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

struct StatsOptions {
  std::string input, output;
};

void run_stats(const StatsOptions& opt) {
  emit(sara::compute_stats_file(opt.input).to_json(), opt.output);
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct PretrainOptions {
  std::string corpus, vocab, out_dir, resume, projection = "first";
  sara::TrainingConfig train;
  std::size_t hidden = 128, layers = 4, heads = 4, ffn = 512, biaffine = 64,
              pooler = 128, max_positions = 512;
  double dropout = 0.0;
  bool sum_losses = false;
};

void run_pretrain(const PretrainOptions& opt) {
  sara::TrainingConfig tc = opt.train;
  if (opt.projection == "first")
    tc.projection = sara::ProjectionMode::FirstSubword;
  else if (opt.projection == "all")
    tc.projection = sara::ProjectionMode::AllPairs;
  else
    throw sara::ConfigError("projection must be 'first' or 'all'");

  const sara::Vocabulary vocab = sara::Vocabulary::load(opt.vocab);
  const std::vector<sara::DialogueInstance> raw =
      sara::load_corpus(opt.corpus, /*lenient=*/false);
  const std::vector<sara::PreparedInstance> prepared =
      sara::prepare_corpus(raw, vocab, tc);
  const sara::RelationLabelInventory inventory = sara::collect_labels(raw);

  sara::ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.hidden_dim = opt.hidden;
  mc.layers = opt.layers;
  mc.heads = opt.heads;
  mc.ffn_dim = opt.ffn;
  mc.max_positions = opt.max_positions;
  mc.biaffine_dim = opt.biaffine;
  mc.pooler_dim = opt.pooler;
  mc.num_labels = inventory.size();
  mc.dropout = opt.dropout;
  mc.sum_losses = opt.sum_losses;
  mc.validate();

  sara::Rng init_rng(tc.seed);
  sara::DialogueModel model(mc, inventory, init_rng);
  sara::Trainer trainer(model, vocab, prepared, tc);
  if (!opt.resume.empty()) trainer.load_checkpoint(opt.resume);

  const std::vector<sara::LossBreakdown> history = trainer.run(opt.out_dir);

  ordered_json summary;
  summary["steps"] = trainer.steps_done();
  summary["out_dir"] = opt.out_dir;
  if (!history.empty())
    summary["final"] = ordered_json::parse(history.back().to_json());
  std::cout << summary.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeOptions {
  std::string checkpoint, vocab, intents, output;
  sara::ProbeConfig config;
};

void run_probe_cmd(const ProbeOptions& opt) {
  const sara::Vocabulary vocab = sara::Vocabulary::load(opt.vocab);
  const sara::LoadedCheckpoint loaded = sara::read_checkpoint(opt.checkpoint);
  if (loaded.vocab_hash != vocab.hash())
    throw sara::DataError("checkpoint was built against a different vocabulary");
  const sara::DialogueModel model = sara::load_model(loaded);
  const std::vector<sara::IntentExample> examples =
      sara::load_intent_corpus(opt.intents);
  const sara::ProbeResult result =
      sara::run_probe(model, vocab, examples, opt.config);
  emit(result.to_json(), opt.output);
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

struct GradCheckOptions {
  std::uint64_t seed = 1;
  double eps = 1e-5, tolerance = 1e-4;
  std::string output;
};

// The four acceptance closures over a deterministic 2-instance toy batch.
void run_grad_check(const GradCheckOptions& opt) {
  const sara::SynthData data = sara::make_synth_data(opt.seed, 12, 0);
  const sara::Vocabulary vocab = sara::Vocabulary::from_tokens(data.vocab_tokens);
  sara::TrainingConfig tc;
  std::vector<sara::PreparedInstance> prepared =
      sara::prepare_corpus(data.corpus, vocab, tc);
  // Two shortest instances: the check's cost is quadratic in length and
  // linear in the parameter count, and short batches lose no coverage.
  std::sort(prepared.begin(), prepared.end(),
            [](const sara::PreparedInstance& a, const sara::PreparedInstance& b) {
              const std::size_t la = a.seq.length() + a.amr_ids.size();
              const std::size_t lb = b.seq.length() + b.amr_ids.size();
              return la != lb ? la < lb : a.id < b.id;
            });
  prepared.resize(2);
  const sara::RelationLabelInventory inventory =
      sara::collect_labels(data.corpus);

  sara::ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.hidden_dim = 12;
  mc.layers = 1;
  mc.heads = 2;
  mc.ffn_dim = 24;
  mc.max_positions = 128;
  mc.biaffine_dim = 8;
  mc.pooler_dim = 12;
  mc.num_labels = inventory.size();
  sara::Rng init_rng(opt.seed);
  sara::DialogueModel model(mc, inventory, init_rng);

  // Fixed masks so every finite-difference evaluation sees the same batch.
  std::vector<sara::MaskPattern> patterns;
  for (const sara::PreparedInstance& inst : prepared) {
    sara::Rng rng(sara::derive_seed(opt.seed, 0, inst.id));
    patterns.push_back(sara::sample_semantic_mask(inst.seq, vocab,
                                                  inst.alignment, tc.masking,
                                                  rng));
  }

  auto sem_loss = [&]() {
    sara::Tensor sum;
    std::size_t count = 0;
    bool any = false;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const sara::HeadLoss h =
          model.mlm_loss(model.encode(patterns[i].corrupted_ids), patterns[i]);
      if (h.empty) continue;
      sum = any ? add(sum, h.sum) : h.sum;
      count += h.count;
      any = true;
    }
    if (!any) return sara::Tensor::scalar(0.0);
    return count > 1 ? mul_scalar(sum, 1.0 / static_cast<double>(count)) : sum;
  };
  auto rel_loss = [&]() {
    sara::Tensor sum;
    std::size_t count = 0;
    bool any = false;
    for (const sara::PreparedInstance& inst : prepared) {
      const sara::HeadLoss h =
          model.relation_loss(model.encode(inst.seq.ids), inst.edges);
      if (h.empty) continue;
      sum = any ? add(sum, h.sum) : h.sum;
      count += h.count;
      any = true;
    }
    if (!any) return sara::Tensor::scalar(0.0);
    return count > 1 ? mul_scalar(sum, 1.0 / static_cast<double>(count)) : sum;
  };
  auto sim_loss = [&]() {
    sara::Tensor text = model.pool_text(model.encode(prepared[0].seq.ids));
    sara::Tensor amr = model.pool_amr(model.encode_amr(prepared[0].amr_ids));
    for (std::size_t i = 1; i < prepared.size(); ++i) {
      text = concat_rows(text,
                         model.pool_text(model.encode(prepared[i].seq.ids)));
      amr = concat_rows(
          amr, model.pool_amr(model.encode_amr(prepared[i].amr_ids)));
    }
    return model.agreement_loss(text, amr, tc.tau).mean();
  };
  auto joint_loss = [&]() {
    return add(add(sem_loss(), mul_scalar(rel_loss(), tc.alpha)),
               mul_scalar(sim_loss(), tc.beta));
  };

  ordered_json report;
  bool ok = true;
  auto run_one = [&](const char* name, auto&& fn) {
    const sara::GradCheckReport r = sara::gradient_check(
        fn, model.parameters(), opt.eps, opt.tolerance);
    ordered_json j;
    j["max_rel_err"] = r.max_rel_err;
    j["worst_parameter"] = r.worst_parameter;
    j["checked_entries"] = r.entries.size();
    j["failures"] = r.failures;
    j["ok"] = r.ok(opt.tolerance);
    report[name] = std::move(j);
    ok = ok && r.ok(opt.tolerance);
    std::cerr << name << ": max_rel_err=" << r.max_rel_err << " ("
              << (r.ok(opt.tolerance) ? "ok" : "FAIL") << ")\n";
  };
  run_one("sem_mlm", sem_loss);
  run_one("rel", rel_loss);
  run_one("sim", sim_loss);
  run_one("joint", joint_loss);
  report["tolerance"] = opt.tolerance;
  report["ok"] = ok;
  emit(report.dump(2), opt.output);
  if (!ok)
    throw sara::NumericError("gradient check failed, see report for details");
}

// ---------------------------------------------------------------------------
// mask-audit
// ---------------------------------------------------------------------------

struct MaskAuditOptions {
  std::string corpus, vocab, output;
  std::size_t trials = 100000;
  std::uint64_t seed = 9;
  sara::MaskingConfig masking;
};

void run_mask_audit(const MaskAuditOptions& opt) {
  sara::SynthData fallback;
  sara::Vocabulary vocab = [&] {
    if (!opt.vocab.empty()) return sara::Vocabulary::load(opt.vocab);
    fallback = sara::make_synth_data(opt.seed, 20, 0);
    return sara::Vocabulary::from_tokens(fallback.vocab_tokens);
  }();
  const std::vector<sara::DialogueInstance> raw =
      opt.corpus.empty() ? fallback.corpus
                         : sara::load_corpus(opt.corpus, /*lenient=*/false);
  if (raw.empty()) throw sara::DataError("mask-audit corpus is empty");

  struct Prepared {
    std::string id;
    sara::TokenSequence seq;
    sara::Alignment alignment;
    std::size_t semantic_tokens = 0;  // tokens inside aligned words
    std::size_t base_tokens = 0;      // remaining maskable tokens
  };
  std::vector<Prepared> prepared;
  for (const sara::DialogueInstance& instance : raw) {
    Prepared p;
    p.id = instance.id;
    p.seq = sara::format_dialogue(instance, vocab);
    p.alignment = sara::remap_alignments(instance, p.seq);
    std::set<std::pair<int, int>> sem_words;
    for (std::size_t pos : sara::semantic_token_set(p.alignment))
      if (p.seq.maskable(pos, vocab))
        sem_words.insert({p.seq.segment[pos], p.seq.word_of_token[pos]});
    for (std::size_t pos = 0; pos < p.seq.length(); ++pos) {
      if (!p.seq.maskable(pos, vocab)) continue;
      if (sem_words.count({p.seq.segment[pos], p.seq.word_of_token[pos]}))
        ++p.semantic_tokens;
      else
        ++p.base_tokens;
    }
    prepared.push_back(std::move(p));
  }

  std::size_t semantic_trials = 0, semantic_selected = 0;
  std::size_t base_trials = 0, base_selected = 0;
  std::size_t mask_n = 0, random_n = 0, keep_n = 0;
  std::size_t special_violations = 0;
  std::uint64_t step = 0;
  while (semantic_trials < opt.trials) {
    for (const Prepared& p : prepared) {
      sara::Rng rng(sara::derive_seed(opt.seed, step, p.id));
      const sara::MaskPattern pattern = sara::sample_semantic_mask(
          p.seq, vocab, p.alignment, opt.masking, rng);
      semantic_trials += p.semantic_tokens;
      base_trials += p.base_tokens;
      for (std::size_t i = 0; i < pattern.count(); ++i) {
        if (pattern.from_semantic[i])
          ++semantic_selected;
        else
          ++base_selected;
        switch (pattern.actions[i]) {
          case sara::MaskAction::Mask: ++mask_n; break;
          case sara::MaskAction::Random: ++random_n; break;
          case sara::MaskAction::Keep: ++keep_n; break;
        }
        if (vocab.is_special_id(pattern.original_ids[i]) ||
            !p.seq.maskable(pattern.positions[i], vocab))
          ++special_violations;
      }
    }
    ++step;
  }

  const std::size_t selected = semantic_selected + base_selected;
  ordered_json report;
  report["steps"] = step;
  report["semantic_trials"] = semantic_trials;
  report["semantic_rate_target"] = opt.masking.semantic_rate;
  report["semantic_rate_empirical"] =
      semantic_trials == 0
          ? 0.0
          : static_cast<double>(semantic_selected) /
                static_cast<double>(semantic_trials);
  report["base_trials"] = base_trials;
  report["base_rate_target"] = opt.masking.base_rate;
  report["base_rate_empirical"] =
      base_trials == 0 ? 0.0
                       : static_cast<double>(base_selected) /
                             static_cast<double>(base_trials);
  report["selected"] = selected;
  auto share = [selected](std::size_t n) {
    return selected == 0 ? 0.0
                         : static_cast<double>(n) / static_cast<double>(selected);
  };
  report["mask_share"] = share(mask_n);
  report["random_share"] = share(random_n);
  report["keep_share"] = share(keep_n);
  report["special_token_masks"] = special_violations;
  emit(report.dump(2), opt.output);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-graph dialogue pre-training toolkit"};
  app.set_version_flag("--version", "0.1.0");
  app.set_config("--config", "", "read options from an INI/TOML file");
  app.require_subcommand(1);

  PreprocessOptions pre;
  CLI::App* c_pre =
      app.add_subcommand("preprocess", "filter, validate and rewrite a corpus");
  c_pre->add_option("--input", pre.input, "raw corpus JSONL")
      ->required()
      ->envname("SARA_INPUT");
  c_pre->add_option("--vocab", pre.vocab, "vocabulary file")
      ->required()
      ->envname("SARA_VOCAB");
  c_pre->add_option("--output", pre.output, "cleaned corpus JSONL")
      ->required()
      ->envname("SARA_OUTPUT");
  c_pre->add_option("--report", pre.report, "write the summary JSON here")
      ->envname("SARA_REPORT");
  c_pre->add_flag("--lenient", pre.lenient,
                  "skip malformed records instead of failing")
      ->envname("SARA_LENIENT");
  c_pre->callback([&] { run_preprocess(pre); });

  StatsOptions st;
  CLI::App* c_st =
      app.add_subcommand("stats", "graph-complexity report for a corpus");
  c_st->add_option("--input", st.input, "corpus JSONL")
      ->required()
      ->envname("SARA_INPUT");
  c_st->add_option("--output", st.output, "write the report JSON here")
      ->envname("SARA_OUTPUT");
  c_st->callback([&] { run_stats(st); });

  PretrainOptions pt;
  CLI::App* c_pt = app.add_subcommand("pretrain", "run joint pre-training");
  c_pt->add_option("--corpus", pt.corpus, "training corpus JSONL")
      ->required()
      ->envname("SARA_CORPUS");
  c_pt->add_option("--vocab", pt.vocab, "vocabulary file")
      ->required()
      ->envname("SARA_VOCAB");
  c_pt->add_option("--out", pt.out_dir, "output directory")
      ->required()
      ->envname("SARA_OUT");
  c_pt->add_option("--resume", pt.resume, "checkpoint prefix to resume from")
      ->envname("SARA_RESUME");
  c_pt->add_option("--seed", pt.train.seed, "global seed")
      ->capture_default_str()
      ->envname("SARA_SEED");
  c_pt->add_option("--epochs", pt.train.epochs, "epochs over the corpus")
      ->capture_default_str()
      ->envname("SARA_EPOCHS");
  c_pt->add_option("--max-steps", pt.train.max_steps,
                   "hard step limit (0: derive from epochs)")
      ->capture_default_str()
      ->envname("SARA_MAX_STEPS");
  c_pt->add_option("--micro-batch", pt.train.micro_batch,
                   "instances per forward pass")
      ->capture_default_str()
      ->envname("SARA_MICRO_BATCH");
  c_pt->add_option("--grad-accum", pt.train.grad_accum,
                   "micro-batches per optimizer step")
      ->capture_default_str()
      ->envname("SARA_GRAD_ACCUM");
  c_pt->add_option("--lr", pt.train.lr, "peak learning rate")
      ->capture_default_str()
      ->envname("SARA_LR");
  c_pt->add_option("--weight-decay", pt.train.weight_decay, "AdamW decay")
      ->capture_default_str()
      ->envname("SARA_WEIGHT_DECAY");
  c_pt->add_option("--warmup", pt.train.warmup_steps, "linear warmup steps")
      ->capture_default_str()
      ->envname("SARA_WARMUP");
  c_pt->add_option("--alpha", pt.train.alpha, "relation loss weight")
      ->capture_default_str()
      ->envname("SARA_ALPHA");
  c_pt->add_option("--beta", pt.train.beta, "agreement loss weight")
      ->capture_default_str()
      ->envname("SARA_BETA");
  c_pt->add_option("--tau", pt.train.tau, "agreement temperature")
      ->capture_default_str()
      ->envname("SARA_TAU");
  c_pt->add_option("--semantic-rate", pt.train.masking.semantic_rate,
                   "whole-word semantic mask rate")
      ->capture_default_str()
      ->envname("SARA_SEMANTIC_RATE");
  c_pt->add_option("--base-rate", pt.train.masking.base_rate,
                   "base mask rate for unaligned tokens")
      ->capture_default_str()
      ->envname("SARA_BASE_RATE");
  c_pt->add_option("--negatives-per-example",
                   pt.train.negatives_per_example,
                   "agreement negatives per pair (0: whole micro-batch)")
      ->capture_default_str()
      ->envname("SARA_NEGATIVES_PER_EXAMPLE");
  c_pt->add_option("--projection", pt.projection,
                   "edge projection mode: first|all")
      ->capture_default_str()
      ->envname("SARA_PROJECTION");
  c_pt->add_option("--max-dialogue-tokens", pt.train.max_dialogue_tokens,
                   "dialogue length budget")
      ->capture_default_str()
      ->envname("SARA_MAX_DIALOGUE_TOKENS");
  c_pt->add_option("--max-amr-tokens", pt.train.max_amr_tokens,
                   "linearized AMR length budget")
      ->capture_default_str()
      ->envname("SARA_MAX_AMR_TOKENS");
  c_pt->add_option("--checkpoint-every", pt.train.checkpoint_every,
                   "checkpoint period in steps (0: final only)")
      ->capture_default_str()
      ->envname("SARA_CHECKPOINT_EVERY");
  c_pt->add_option("--log-every", pt.train.log_every, "metrics period in steps")
      ->capture_default_str()
      ->envname("SARA_LOG_EVERY");
  c_pt->add_flag("--overfit-single-batch", pt.train.overfit_single_batch,
                 "repeat the first micro-batch forever (debugging)")
      ->envname("SARA_OVERFIT_SINGLE_BATCH");
  c_pt->add_option("--hidden", pt.hidden, "encoder width")
      ->capture_default_str()
      ->envname("SARA_HIDDEN");
  c_pt->add_option("--layers", pt.layers, "encoder depth")
      ->capture_default_str()
      ->envname("SARA_LAYERS");
  c_pt->add_option("--heads", pt.heads, "attention heads")
      ->capture_default_str()
      ->envname("SARA_HEADS");
  c_pt->add_option("--ffn", pt.ffn, "feed-forward width")
      ->capture_default_str()
      ->envname("SARA_FFN");
  c_pt->add_option("--biaffine", pt.biaffine, "relation MLP width")
      ->capture_default_str()
      ->envname("SARA_BIAFFINE");
  c_pt->add_option("--pooler", pt.pooler, "pooled representation width")
      ->capture_default_str()
      ->envname("SARA_POOLER");
  c_pt->add_option("--max-positions", pt.max_positions,
                   "maximum encodable sequence length")
      ->capture_default_str()
      ->envname("SARA_MAX_POSITIONS");
  c_pt->add_option("--dropout", pt.dropout, "dropout rate")
      ->capture_default_str()
      ->envname("SARA_DROPOUT");
  c_pt->add_flag("--sum-losses", pt.sum_losses,
                 "report loss sums instead of means")
      ->envname("SARA_SUM_LOSSES");
  c_pt->callback([&] { run_pretrain(pt); });

  ProbeOptions pb;
  CLI::App* c_pb =
      app.add_subcommand("probe", "train a frozen-feature intent probe");
  c_pb->add_option("--checkpoint", pb.checkpoint, "checkpoint prefix")
      ->required()
      ->envname("SARA_CHECKPOINT");
  c_pb->add_option("--vocab", pb.vocab, "vocabulary file")
      ->required()
      ->envname("SARA_VOCAB");
  c_pb->add_option("--intents", pb.intents, "labeled intents JSONL")
      ->required()
      ->envname("SARA_INTENTS");
  c_pb->add_option("--epochs", pb.config.epochs, "probe epochs")
      ->capture_default_str()
      ->envname("SARA_EPOCHS");
  c_pb->add_option("--lr", pb.config.lr, "probe learning rate")
      ->capture_default_str()
      ->envname("SARA_LR");
  c_pb->add_option("--seed", pb.config.seed, "probe head seed")
      ->capture_default_str()
      ->envname("SARA_SEED");
  c_pb->add_option("--output", pb.output, "write the report JSON here")
      ->envname("SARA_OUTPUT");
  c_pb->callback([&] { run_probe_cmd(pb); });

  GradCheckOptions gc;
  CLI::App* c_gc = app.add_subcommand(
      "grad-check", "finite-difference audit of every loss head");
  c_gc->add_option("--seed", gc.seed, "toy batch / init seed")
      ->capture_default_str()
      ->envname("SARA_SEED");
  c_gc->add_option("--eps", gc.eps, "finite-difference step")
      ->capture_default_str()
      ->envname("SARA_EPS");
  c_gc->add_option("--tolerance", gc.tolerance, "max relative error allowed")
      ->capture_default_str()
      ->envname("SARA_TOLERANCE");
  c_gc->add_option("--output", gc.output, "write the report JSON here")
      ->envname("SARA_OUTPUT");
  c_gc->callback([&] { run_grad_check(gc); });

  MaskAuditOptions ma;
  CLI::App* c_ma = app.add_subcommand(
      "mask-audit", "Monte-Carlo report of empirical masking rates");
  c_ma->add_option("--corpus", ma.corpus,
                   "corpus JSONL (default: built-in synthetic data)")
      ->envname("SARA_CORPUS");
  c_ma->add_option("--vocab", ma.vocab, "vocabulary file")
      ->envname("SARA_VOCAB");
  c_ma->add_option("--trials", ma.trials, "minimum semantic-token trials")
      ->capture_default_str()
      ->envname("SARA_TRIALS");
  c_ma->add_option("--seed", ma.seed, "audit seed")
      ->capture_default_str()
      ->envname("SARA_SEED");
  c_ma->add_option("--semantic-rate", ma.masking.semantic_rate,
                   "whole-word semantic mask rate")
      ->capture_default_str()
      ->envname("SARA_SEMANTIC_RATE");
  c_ma->add_option("--base-rate", ma.masking.base_rate,
                   "base mask rate for unaligned tokens")
      ->capture_default_str()
      ->envname("SARA_BASE_RATE");
  c_ma->add_option("--output", ma.output, "write the report JSON here")
      ->envname("SARA_OUTPUT");
  c_ma->callback([&] { run_mask_audit(ma); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const sara::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const sara::ShapeError& e) {
    std::cerr << "internal shape error: " << e.what() << '\n';
    return 3;
  } catch (const sara::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const sara::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
