#pragma once

// Word error rate machinery: text normalization, minimum-edit alignment,
// per-utterance and corpus-level WER, oracle hypothesis selection.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "progres/nbest.hpp"

namespace progres {

enum class NormPolicy { lowercase_strip_punct, verbatim };

std::string_view to_string(NormPolicy p);
NormPolicy norm_policy_from_string(std::string_view s);

// lowercase_strip_punct lowercases ASCII letters and deletes ASCII
// punctuation before whitespace tokenization; verbatim only tokenizes.
// Neither policy ever yields empty tokens.
std::vector<std::string> normalize_text(std::string_view raw,
                                        NormPolicy policy = NormPolicy::lowercase_strip_punct);

struct EditCounts {
  int subs = 0;
  int dels = 0;
  int ins = 0;
  int ref_len = 0;

  int total() const { return subs + dels + ins; }
  bool operator==(const EditCounts&) const = default;
};

enum class EditOp { match, sub, del, ins };

struct AlignStep {
  EditOp op;
  std::optional<std::string> ref_token;  // present for match/sub/del
  std::optional<std::string> hyp_token;  // present for match/sub/ins
};

struct Alignment {
  std::vector<AlignStep> ops;
};

// Unit-cost minimum edit alignment. Backtrace ties prefer
// match > sub > del > ins.
std::pair<Alignment, EditCounts> align(std::span<const std::string> ref,
                                       std::span<const std::string> hyp);

// (subs+dels+ins)/ref_len; for an empty reference this is 0 when there are
// no edits and the raw edit total otherwise.
double utterance_wer(const EditCounts& counts);

// Micro-average: total edits over total reference words. Throws when every
// reference is empty.
double corpus_wer(std::span<const EditCounts> per_utt);

struct WerReport {
  std::map<std::string, EditCounts> per_utt;
  double corpus_wer = 0.0;

  int n_utts() const { return static_cast<int>(per_utt.size()); }
  EditCounts totals() const;
  nlohmann::json summary_json() const;

  static WerReport from_counts(std::map<std::string, EditCounts> per_utt);
};

struct OracleSelection {
  Hypothesis hyp;
  EditCounts counts;
  std::size_t index = 0;  // position in the hypothesis list
};

// Picks the hypothesis with the lowest utterance WER against the reference.
// Ties break by lower edit total, then ASR rank with the prompt addition
// treated as rank 0, then list position.
OracleSelection oracle_select(const NBestList& list,
                              NormPolicy policy = NormPolicy::lowercase_strip_punct);

}  // namespace progres
