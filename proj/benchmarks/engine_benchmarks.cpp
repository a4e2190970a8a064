#include <benchmark/benchmark.h>

#include "reason_iad/knowledge.hpp"
#include "reason_iad/reasoning.hpp"
#include "reason_iad/toy_scenario.hpp"

namespace {

using namespace reason_iad;

std::vector<EmbeddingVector> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  auto rng = seeded_rng(seed, "bench_rows");
  std::vector<EmbeddingVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    rows.emplace_back(std::move(v));
  }
  return rows;
}

void BM_ToyEvaluate(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto len = static_cast<std::size_t>(state.range(1));
  ToyBackend backend(d, 0);
  EvaluationRequest r;
  r.sequence = random_rows(len, d, 1);
  for (std::size_t i = 1; i + 4 < len; ++i) r.patch_positions.push_back(i);
  r.latent_positions = {len - 4, len - 3, len - 2, len - 1};
  r.num_options = 4;
  for (auto _ : state) benchmark::DoNotOptimize(backend.evaluate(r));
}
BENCHMARK(BM_ToyEvaluate)->Args({16, 24})->Args({64, 72})->Args({256, 264});

void BM_RetrieveTopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  KnowledgeRepository repo;
  const auto rows = random_rows(n, 64, 2);
  for (std::size_t i = 0; i < n; ++i) repo.push_back({"l" + std::to_string(i), "d", rows[i]});
  const EmbeddingVector query = random_rows(1, 64, 3).front();
  for (auto _ : state) benchmark::DoNotOptimize(retrieve_top_k(query, repo, 2));
}
BENCHMARK(BM_RetrieveTopK)->Arg(16)->Arg(256)->Arg(4096);

void BM_RunReasoning(benchmark::State& state) {
  ToyBackend backend(16, 0);
  const auto suite = make_crafted_suite(backend);
  const auto repo = embed_labels(suite.knowledge, backend);
  Config config;
  config.iterations = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_reasoning(suite.instances[1].instance, repo, backend, config));
  }
}
BENCHMARK(BM_RunReasoning)->Arg(10)->Arg(50);

}  // namespace
BENCHMARK_MAIN();
