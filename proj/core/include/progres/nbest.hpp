#pragma once

// Corpus data model for n-best rescoring: ranked ASR hypotheses per utterance,
// JSON Lines ingestion/serialization, and hypothesis-set extension.

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace progres {

enum class Split { validation, test, unlabeled };

enum class HypSource { asr, prompt_addition };

std::string_view to_string(Split s);
std::string_view to_string(HypSource s);
Split split_from_string(std::string_view s);

/// One candidate transcription with its acoustic confidence (log domain,
/// higher is better).
struct Hypothesis {
  std::string text;
  double asr_score = 0.0;
  HypSource source = HypSource::asr;
  int asr_rank = 0;  // 1-based among ASR hypotheses, 0 for prompt additions
  std::optional<double> llm_score;

  bool operator==(const Hypothesis&) const = default;
};

/// Ranked hypotheses for one utterance, optionally with the ground-truth
/// transcript. ASR hypotheses are kept in non-increasing score order; at most
/// one prompt addition is stored after them.
struct NBestList {
  std::string utt_id;
  std::vector<Hypothesis> hyps;
  std::optional<std::string> reference;

  std::size_t asr_count() const;
  const Hypothesis* top_asr() const;          // rank-1 ASR hypothesis
  const Hypothesis* prompt_addition() const;  // nullptr when not extended

  bool operator==(const NBestList&) const = default;
};

struct Corpus {
  Split split = Split::unlabeled;
  std::vector<NBestList> utterances;

  const NBestList* find(std::string_view utt_id) const;

  bool operator==(const Corpus&) const = default;
};

/// Fatal ingestion failure; the message carries the 1-based line number.
class CorpusFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParsedCorpus {
  Corpus corpus;
  std::vector<std::string> warnings;  // non-fatal canonicalizations
};

// One utterance per line:
//   {"utt_id": "...", "reference": "..."|null,
//    "hyps": [{"text": "...", "asr_score": -1.0}, ...]}
// Extended corpora additionally carry "source" and optional "llm_score" per
// hypothesis. Hypotheses listed out of score order are re-sorted (stable,
// descending asr_score) and a warning is recorded.
ParsedCorpus parse_nbest_jsonl(std::istream& in, Split split = Split::unlabeled);

void serialize_nbest_jsonl(const Corpus& corpus, std::ostream& out);

// Appends `correction` as a prompt addition carrying the best ASR score of
// the list. A correction that trims to the empty string leaves the list
// unchanged.
NBestList extend_with_generated(const NBestList& list, const std::string& correction);

struct Diagnostic {
  std::string utt_id;  // empty for corpus-level findings
  std::string message;
};

/// Reports every invariant violation and suspicious record without mutating
/// the corpus.
std::vector<Diagnostic> validate_corpus(const Corpus& corpus);

}  // namespace progres
