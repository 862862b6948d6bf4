#include <benchmark/benchmark.h>

#include "sara/rng.hpp"
#include "sara/tensor.hpp"

namespace {

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sara::Rng rng(1);
  const sara::Tensor a = sara::Tensor::randn(n, n, rng, 1.0);
  const sara::Tensor b = sara::Tensor::randn(n, n, rng, 1.0);
  for (auto _ : state) {
    sara::Tensor c = sara::matmul(a, b);
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(BM_MatmulForward)->Arg(16)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sara::Rng rng(1);
  sara::Tensor a = sara::Tensor::randn(n, n, rng, 1.0, true);
  sara::Tensor b = sara::Tensor::randn(n, n, rng, 1.0, true);
  for (auto _ : state) {
    a.clear_grad();
    b.clear_grad();
    sara::Tensor loss = sara::sum_all(sara::matmul(a, b));
    sara::backward(loss);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64)->Arg(128);

void BM_SoftmaxXent(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sara::Rng rng(2);
  sara::Tensor logits = sara::Tensor::randn(n, 256, rng, 1.0, true);
  std::vector<std::size_t> gold(n);
  for (std::size_t i = 0; i < n; ++i) gold[i] = i % 256;
  for (auto _ : state) {
    logits.clear_grad();
    sara::Tensor loss = sara::mul_scalar(
        sara::sum_all(sara::pick_per_row(sara::log_softmax_rows(logits), gold)),
        -1.0 / static_cast<double>(n));
    sara::backward(loss);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_SoftmaxXent)->Arg(8)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
