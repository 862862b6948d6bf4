#include <benchmark/benchmark.h>

#include "sara/model.hpp"
#include "sara/rng.hpp"
#include "sara/synth.hpp"
#include "sara/trainer.hpp"

namespace {

struct Fixture {
  sara::Vocabulary vocab;
  sara::RelationLabelInventory inventory;
  std::vector<sara::PreparedInstance> prepared;
  sara::TrainingConfig tc;

  static Fixture make() {
    const sara::SynthData data = sara::make_synth_data(5, 32, 0);
    sara::TrainingConfig tc;
    tc.micro_batch = 8;
    tc.grad_accum = 1;
    tc.max_steps = 1u << 20;
    return {sara::Vocabulary::from_tokens(data.vocab_tokens),
            sara::collect_labels(data.corpus),
            sara::prepare_corpus(
                data.corpus,
                sara::Vocabulary::from_tokens(data.vocab_tokens), tc),
            tc};
  }

  sara::ModelConfig model_config(std::size_t hidden, std::size_t layers) const {
    sara::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.hidden_dim = hidden;
    mc.layers = layers;
    mc.heads = 4;
    mc.ffn_dim = hidden * 4;
    mc.max_positions = 128;
    mc.biaffine_dim = hidden / 2;
    mc.pooler_dim = hidden;
    mc.num_labels = inventory.size();
    return mc;
  }
};

void BM_TrainStep(benchmark::State& state) {
  const Fixture fx = Fixture::make();
  sara::Rng rng(7);
  sara::DialogueModel model(
      fx.model_config(static_cast<std::size_t>(state.range(0)),
                      static_cast<std::size_t>(state.range(1))),
      fx.inventory, rng);
  sara::Trainer trainer(model, fx.vocab, fx.prepared, fx.tc);
  for (auto _ : state) {
    sara::LossBreakdown b = trainer.train_step();
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_TrainStep)->Args({32, 2})->Args({48, 2})->Args({64, 4})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
