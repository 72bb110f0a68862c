#pragma once

// Evaluation artifacts: the configuration grid, alpha-sweep curve CSV, and
// the novel-token contamination probe over selected prompt additions.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "progres/nbest.hpp"
#include "progres/rescoring.hpp"
#include "progres/wer.hpp"

namespace progres {

struct EvalRow {
  std::string config_name;  // hypothesis-set variant (grid row)
  Mode mode = Mode::baseline;
  double corpus_wer = 0.0;
  int n_utts = 0;
  int prompt_fallbacks = 0;
  int cache_hits = 0;
};

struct EvalTable {
  std::string text;      // aligned plain-text grid, WER as percentages
  nlohmann::json json;   // machine-readable rows
  std::vector<std::string> warnings;
};

// Rows are hypothesis-set variants, columns selection strategies; cells show
// WER percentages with two decimals. Duplicate (config, mode) pairs warn and
// are all emitted.
EvalTable build_table(const std::vector<EvalRow>& rows);

// Header line, one "alpha,corpus_wer" row per grid point, and a trailing
// "# best_alpha=..." marker.
std::string emit_sweep_curve(const AlphaSweepResult& sweep);

struct ContaminationFinding {
  std::string utt_id;
  std::vector<std::string> novel_tokens;  // in the addition, in no ASR hypothesis
  std::vector<bool> matches_reference;    // parallel to novel_tokens
};

// For each utterance whose selection is the prompt addition, lists tokens
// the addition introduced beyond every ASR hypothesis and whether each one
// appears in the reference (reference support without n-best support is the
// pattern worth human review). Token membership uses the WER normalization
// policy.
std::vector<ContaminationFinding> contamination_probe(
    const std::vector<UttSelection>& selections, const Corpus& corpus,
    NormPolicy policy = NormPolicy::lowercase_strip_punct);

nlohmann::json finding_to_json(const ContaminationFinding& f);

}  // namespace progres
