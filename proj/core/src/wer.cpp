#include "progres/wer.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <tuple>

namespace progres {

std::string_view to_string(NormPolicy p) {
  return p == NormPolicy::verbatim ? "verbatim" : "lowercase_strip_punct";
}

NormPolicy norm_policy_from_string(std::string_view s) {
  if (s == "lowercase_strip_punct") return NormPolicy::lowercase_strip_punct;
  if (s == "verbatim") return NormPolicy::verbatim;
  throw std::invalid_argument("unknown normalization policy \"" + std::string(s) + "\"");
}

std::vector<std::string> normalize_text(std::string_view raw, NormPolicy policy) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (char c : raw) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      flush();
      continue;
    }
    if (policy == NormPolicy::lowercase_strip_punct) {
      if (uc < 0x80 && std::ispunct(uc)) continue;  // non-ASCII bytes pass through
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

std::pair<Alignment, EditCounts> align(std::span<const std::string> ref,
                                       std::span<const std::string> hyp) {
  const std::size_t m = ref.size();
  const std::size_t n = hyp.size();

  // d[i][j] = minimum edits aligning ref[0..i) with hyp[0..j).
  std::vector<std::vector<int>> d(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 1; j <= n; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const int sub_cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j - 1] + sub_cost, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }

  Alignment alignment;
  EditCounts counts;
  counts.ref_len = static_cast<int>(m);

  std::size_t i = m;
  std::size_t j = n;
  std::vector<AlignStep> rev;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      rev.push_back({EditOp::match, ref[i - 1], hyp[j - 1]});
      --i;
      --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      rev.push_back({EditOp::sub, ref[i - 1], hyp[j - 1]});
      ++counts.subs;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      rev.push_back({EditOp::del, ref[i - 1], std::nullopt});
      ++counts.dels;
      --i;
    } else {
      rev.push_back({EditOp::ins, std::nullopt, hyp[j - 1]});
      ++counts.ins;
      --j;
    }
  }
  alignment.ops.assign(rev.rbegin(), rev.rend());
  return {std::move(alignment), counts};
}

double utterance_wer(const EditCounts& counts) {
  if (counts.ref_len == 0) return counts.total() == 0 ? 0.0 : static_cast<double>(counts.total());
  return static_cast<double>(counts.total()) / static_cast<double>(counts.ref_len);
}

double corpus_wer(std::span<const EditCounts> per_utt) {
  long long edits = 0;
  long long ref = 0;
  for (const auto& c : per_utt) {
    edits += c.total();
    ref += c.ref_len;
  }
  if (ref == 0) throw std::invalid_argument("corpus_wer: every reference is empty");
  return static_cast<double>(edits) / static_cast<double>(ref);
}

EditCounts WerReport::totals() const {
  EditCounts t;
  for (const auto& [id, c] : per_utt) {
    t.subs += c.subs;
    t.dels += c.dels;
    t.ins += c.ins;
    t.ref_len += c.ref_len;
  }
  return t;
}

nlohmann::json WerReport::summary_json() const {
  const EditCounts t = totals();
  return nlohmann::json{{"corpus_wer", corpus_wer},
                        {"n_utts", n_utts()},
                        {"edits", {{"sub", t.subs}, {"del", t.dels}, {"ins", t.ins}}},
                        {"ref_words", t.ref_len}};
}

WerReport WerReport::from_counts(std::map<std::string, EditCounts> per_utt) {
  WerReport report;
  report.per_utt = std::move(per_utt);
  std::vector<EditCounts> flat;
  flat.reserve(report.per_utt.size());
  for (const auto& [id, c] : report.per_utt) flat.push_back(c);
  report.corpus_wer = progres::corpus_wer(flat);
  return report;
}

OracleSelection oracle_select(const NBestList& list, NormPolicy policy) {
  if (!list.reference) throw std::invalid_argument("oracle_select: utterance has no reference");
  if (list.hyps.empty()) throw std::invalid_argument("oracle_select: empty hypothesis list");

  const auto ref_tokens = normalize_text(*list.reference, policy);

  OracleSelection best;
  double best_wer = 0.0;
  std::tuple<int, int, std::size_t> best_key;  // (edit total, rank key, position)
  bool have = false;
  for (std::size_t idx = 0; idx < list.hyps.size(); ++idx) {
    const Hypothesis& h = list.hyps[idx];
    const auto hyp_tokens = normalize_text(h.text, policy);
    const EditCounts counts = align(ref_tokens, hyp_tokens).second;
    const double wer = utterance_wer(counts);
    const int rank_key = h.source == HypSource::prompt_addition ? 0 : h.asr_rank;
    const std::tuple<int, int, std::size_t> key{counts.total(), rank_key, idx};
    if (!have || wer < best_wer || (wer == best_wer && key < best_key)) {
      have = true;
      best_wer = wer;
      best_key = key;
      best = {h, counts, idx};
    }
  }
  return best;
}

}  // namespace progres
