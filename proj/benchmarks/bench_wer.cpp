#include <benchmark/benchmark.h>

#include <random>

#include "corpus_gen.hpp"
#include "progres/wer.hpp"

namespace {

std::vector<std::string> tokens_of_length(int n, int vocab, unsigned seed) {
  std::mt19937 rng(seed);
  return progres::testing::random_tokens(rng, n, vocab);
}

void BM_Align(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto ref = tokens_of_length(n, 12, 1);
  const auto hyp = tokens_of_length(n, 12, 2);
  for (auto _ : state) {
    auto result = progres::align(ref, hyp);
    benchmark::DoNotOptimize(result);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Align)->RangeMultiplier(4)->Range(8, 512)->Complexity();

void BM_NormalizeText(benchmark::State& state) {
  const std::string text =
      "The Quick, Brown Fox -- jumps over the lazy dog; twice! (Again and again and again.)";
  for (auto _ : state) {
    auto tokens = progres::normalize_text(text);
    benchmark::DoNotOptimize(tokens);
  }
}
BENCHMARK(BM_NormalizeText);

void BM_OracleSelect(benchmark::State& state) {
  std::mt19937 rng(7);
  const progres::Corpus corpus = progres::testing::make_random_corpus(
      rng, {.n_utts = 1, .min_hyps = 10, .max_hyps = 10, .max_ref_len = 16});
  const progres::NBestList& utt = corpus.utterances[0];
  for (auto _ : state) {
    auto pick = progres::oracle_select(utt);
    benchmark::DoNotOptimize(pick);
  }
}
BENCHMARK(BM_OracleSelect);

}  // namespace
