#include <benchmark/benchmark.h>

#include <sstream>
#include <string>

#include "sara/amr_graph.hpp"

namespace {

// Left-leaning chain with a reentrancy back to the root at the leaf.
std::string make_penman(int depth) {
  std::ostringstream out;
  out << "(r / root-concept";
  for (int i = 0; i < depth; ++i)
    out << " :arg0 (n" << i << " / concept-" << i;
  out << " :arg1 r";
  for (int i = 0; i < depth; ++i) out << ")";
  out << ")";
  return out.str();
}

void BM_ParsePenman(benchmark::State& state) {
  const std::string text = make_penman(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    sara::AmrGraph g = sara::parse_penman(text);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_ParsePenman)->Arg(8)->Arg(64)->Arg(256);

void BM_RoundTrip(benchmark::State& state) {
  const std::string text = make_penman(static_cast<int>(state.range(0)));
  const sara::AmrGraph g = sara::parse_penman(text);
  for (auto _ : state) {
    std::string s = sara::serialize_penman(g);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_RoundTrip)->Arg(8)->Arg(64)->Arg(256);

void BM_Linearize(benchmark::State& state) {
  const sara::AmrGraph g =
      sara::parse_penman(make_penman(static_cast<int>(state.range(0))));
  for (auto _ : state) {
    auto tokens = sara::linearize(g);
    benchmark::DoNotOptimize(tokens);
  }
}
BENCHMARK(BM_Linearize)->Arg(8)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
