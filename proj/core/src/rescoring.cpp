#include "progres/rescoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace progres {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::prompt_only: return "prompt_only";
    case Mode::llm_rescoring: return "llm_rescoring";
    case Mode::progres: return "progres";
    case Mode::oracle: return "oracle";
  }
  return "baseline";
}

Mode mode_from_string(std::string_view s) {
  if (s == "baseline") return Mode::baseline;
  if (s == "prompt_only") return Mode::prompt_only;
  if (s == "llm_rescoring") return Mode::llm_rescoring;
  if (s == "progres") return Mode::progres;
  if (s == "oracle") return Mode::oracle;
  throw std::invalid_argument("unknown mode \"" + std::string(s) + "\"");
}

double interpolate(double asr_score, double llm_score, double alpha) {
  if (!std::isfinite(asr_score) || !std::isfinite(llm_score))
    throw std::invalid_argument("interpolate: scores must be finite");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("interpolate: alpha must lie in [0, 1]");
  return (1.0 - alpha) * asr_score + alpha * llm_score;
}

namespace {

// Tie order: prompt addition, then lower ASR rank, then list position.
std::tuple<int, int, std::size_t> tie_key(const Hypothesis& h, std::size_t idx) {
  return {h.source == HypSource::prompt_addition ? 0 : 1, h.asr_rank, idx};
}

const Hypothesis& rank1_of(const NBestList& list) {
  const Hypothesis* top = list.top_asr();
  if (!top) throw std::invalid_argument("utterance \"" + list.utt_id + "\" has no ASR hypotheses");
  return *top;
}

bool fully_scored(const NBestList& list) {
  return std::all_of(list.hyps.begin(), list.hyps.end(),
                     [](const Hypothesis& h) { return h.llm_score.has_value(); });
}

}  // namespace

std::size_t select_best_index(const NBestList& list, double alpha) {
  if (list.hyps.empty()) throw std::invalid_argument("select_best: empty hypothesis list");
  std::size_t best = 0;
  double best_score = 0.0;
  bool have = false;
  for (std::size_t i = 0; i < list.hyps.size(); ++i) {
    const Hypothesis& h = list.hyps[i];
    if (!h.llm_score)
      throw std::invalid_argument("select_best: unscored hypothesis in utterance \"" +
                                  list.utt_id + "\"");
    const double combined = interpolate(h.asr_score, *h.llm_score, alpha);
    if (!have || combined > best_score ||
        (combined == best_score && tie_key(h, i) < tie_key(list.hyps[best], best))) {
      have = true;
      best = i;
      best_score = combined;
    }
  }
  return best;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  grid.reserve(21);
  for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
  return grid;
}

AlphaSweepResult line_search_alpha(const Corpus& corpus, std::span<const double> grid,
                                   NormPolicy policy) {
  if (corpus.split != Split::validation)
    throw std::invalid_argument("line_search_alpha: corpus is not a validation split");
  if (grid.empty()) throw std::invalid_argument("line_search_alpha: empty alpha grid");
  for (const auto& utt : corpus.utterances) {
    if (!utt.reference)
      throw std::invalid_argument("line_search_alpha: utterance \"" + utt.utt_id +
                                  "\" has no reference");
    if (!fully_scored(utt))
      throw std::invalid_argument("line_search_alpha: unscored hypotheses present in \"" +
                                  utt.utt_id + "\"");
  }

  // Alignments per hypothesis are alpha-independent; compute them once.
  std::vector<std::vector<EditCounts>> counts_per_hyp(corpus.utterances.size());
  for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
    const auto& utt = corpus.utterances[u];
    const auto ref_tokens = normalize_text(*utt.reference, policy);
    counts_per_hyp[u].reserve(utt.hyps.size());
    for (const auto& h : utt.hyps)
      counts_per_hyp[u].push_back(align(ref_tokens, normalize_text(h.text, policy)).second);
  }

  AlphaSweepResult result;
  result.grid.reserve(grid.size());
  for (const double alpha : grid) {
    std::vector<EditCounts> selected;
    selected.reserve(corpus.utterances.size());
    for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
      const std::size_t idx = select_best_index(corpus.utterances[u], alpha);
      selected.push_back(counts_per_hyp[u][idx]);
    }
    result.grid.emplace_back(alpha, corpus_wer(selected));
  }

  result.best_alpha = result.grid.front().first;
  result.best_wer = result.grid.front().second;
  for (const auto& [alpha, wer] : result.grid) {
    if (wer < result.best_wer) {  // strict: ties keep the smallest alpha
      result.best_wer = wer;
      result.best_alpha = alpha;
    }
  }
  return result;
}

double PipelineConfig::effective_alpha() const {
  switch (mode) {
    case Mode::baseline: return 0.0;
    case Mode::llm_rescoring: return 1.0;
    default: return alpha;
  }
}

PipelineResult run_pipeline(const Corpus& corpus, const PipelineConfig& cfg) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
    throw std::invalid_argument("run_pipeline: alpha must lie in [0, 1]");

  PipelineResult result;
  result.selections.reserve(corpus.utterances.size());
  std::map<std::string, EditCounts> per_utt;

  for (const auto& utt : corpus.utterances) {
    UttSelection sel;
    sel.utt_id = utt.utt_id;
    sel.mode = cfg.mode;

    const Hypothesis* chosen = nullptr;
    switch (cfg.mode) {
      case Mode::baseline: {
        chosen = &rank1_of(utt);
        sel.alpha = 0.0;
        break;
      }
      case Mode::prompt_only: {
        if (const Hypothesis* add = utt.prompt_addition()) {
          chosen = add;
        } else {
          chosen = &rank1_of(utt);
          ++result.fallbacks;
        }
        break;
      }
      case Mode::llm_rescoring:
      case Mode::progres: {
        const double alpha = cfg.effective_alpha();
        sel.alpha = alpha;
        if (fully_scored(utt)) {
          chosen = &utt.hyps[select_best_index(utt, alpha)];
        } else {
          chosen = &rank1_of(utt);
          sel.degraded = true;
          ++result.degraded;
        }
        break;
      }
      case Mode::oracle: {
        const OracleSelection oracle = oracle_select(utt, cfg.normalization);
        chosen = &utt.hyps[oracle.index];
        break;
      }
    }

    sel.text = chosen->text;
    sel.source = chosen->source;

    if (utt.reference) {
      const auto ref_tokens = normalize_text(*utt.reference, cfg.normalization);
      const auto hyp_tokens = normalize_text(sel.text, cfg.normalization);
      per_utt[utt.utt_id] = align(ref_tokens, hyp_tokens).second;
    }
    result.selections.push_back(std::move(sel));
  }

  if (!per_utt.empty()) result.report = WerReport::from_counts(std::move(per_utt));
  return result;
}

}  // namespace progres
