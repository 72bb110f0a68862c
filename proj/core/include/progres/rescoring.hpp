#pragma once

// Score interpolation, per-utterance selection, the alpha grid search on a
// validation split, and the named pipeline configurations.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "progres/nbest.hpp"
#include "progres/wer.hpp"

namespace progres {

enum class Mode { baseline, prompt_only, llm_rescoring, progres, oracle };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

// (1-alpha)*asr_score + alpha*llm_score. Throws on non-finite scores or
// alpha outside [0, 1].
double interpolate(double asr_score, double llm_score, double alpha);

// Index of the combined-score argmax. Ties break by prompt addition first,
// then lower ASR rank, then list position. Every hypothesis must carry an
// llm_score.
std::size_t select_best_index(const NBestList& list, double alpha);

struct AlphaSweepResult {
  std::vector<std::pair<double, double>> grid;  // (alpha, corpus WER)
  double best_alpha = 0.0;
  double best_wer = 0.0;
};

// {0.00, 0.05, ..., 1.00} — 21 points.
std::vector<double> default_alpha_grid();

// Evaluates corpus WER of select_best at every grid alpha; the argmin ties
// go to the smallest alpha. Per-hypothesis alignments are computed once and
// reused across the grid.
AlphaSweepResult line_search_alpha(const Corpus& corpus,
                                   std::span<const double> grid,
                                   NormPolicy policy = NormPolicy::lowercase_strip_punct);

struct PipelineConfig {
  Mode mode = Mode::progres;
  double alpha = 0.5;
  NormPolicy normalization = NormPolicy::lowercase_strip_punct;

  // baseline pins alpha to 0 (and ignores prompt additions); llm_rescoring
  // pins alpha to 1.
  double effective_alpha() const;
};

struct UttSelection {
  std::string utt_id;
  std::string text;
  HypSource source = HypSource::asr;
  std::optional<double> alpha;  // absent for modes that do not interpolate
  Mode mode = Mode::baseline;
  bool degraded = false;  // fell back to the rank-1 hypothesis
};

struct PipelineResult {
  std::vector<UttSelection> selections;
  std::optional<WerReport> report;  // present when references exist
  int degraded = 0;                 // utterances that fell back to rank-1
  int fallbacks = 0;                // prompt_only utterances without an addition
};

// Runs one configuration over a (scored, possibly extended) corpus.
// Utterances missing required llm_scores degrade to the rank-1 hypothesis
// and are tallied; they never abort the run.
PipelineResult run_pipeline(const Corpus& corpus, const PipelineConfig& cfg);

}  // namespace progres
