#include <benchmark/benchmark.h>

#include <random>

#include "corpus_gen.hpp"
#include "progres/rescoring.hpp"

namespace {

progres::Corpus sweep_corpus(int n_utts) {
  std::mt19937 rng(11);
  return progres::testing::make_random_corpus(
      rng, {.n_utts = n_utts, .min_hyps = 5, .max_hyps = 10});
}

void BM_SelectBest(benchmark::State& state) {
  const progres::Corpus corpus = sweep_corpus(1);
  const progres::NBestList& utt = corpus.utterances[0];
  for (auto _ : state) {
    auto idx = progres::select_best_index(utt, 0.3);
    benchmark::DoNotOptimize(idx);
  }
}
BENCHMARK(BM_SelectBest);

// The 21-point grid reuses per-hypothesis alignments; cost should grow with
// corpus size, not with grid resolution.
void BM_LineSearchAlpha(benchmark::State& state) {
  const progres::Corpus corpus = sweep_corpus(static_cast<int>(state.range(0)));
  const auto grid = progres::default_alpha_grid();
  for (auto _ : state) {
    auto sweep = progres::line_search_alpha(corpus, grid);
    benchmark::DoNotOptimize(sweep);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LineSearchAlpha)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_RunPipelineProgres(benchmark::State& state) {
  const progres::Corpus corpus = sweep_corpus(256);
  progres::PipelineConfig cfg;
  cfg.mode = progres::Mode::progres;
  cfg.alpha = 0.3;
  for (auto _ : state) {
    auto result = progres::run_pipeline(corpus, cfg);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_RunPipelineProgres);

}  // namespace
