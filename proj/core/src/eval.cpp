#include "progres/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace progres {

namespace {

std::string pct2(double wer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", wer * 100.0);
  return buf;
}

constexpr Mode kColumnOrder[] = {Mode::baseline, Mode::prompt_only, Mode::llm_rescoring,
                                 Mode::progres, Mode::oracle};

}  // namespace

EvalTable build_table(const std::vector<EvalRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("build_table: no runs");

  EvalTable table;

  std::set<std::pair<std::string, Mode>> seen;
  for (const auto& r : rows) {
    if (!seen.insert({r.config_name, r.mode}).second)
      table.warnings.push_back("duplicate run for config \"" + r.config_name + "\" mode " +
                               std::string(to_string(r.mode)));
  }

  // Row labels in order of first appearance; fixed strategy column order.
  std::vector<std::string> labels;
  for (const auto& r : rows)
    if (std::find(labels.begin(), labels.end(), r.config_name) == labels.end())
      labels.push_back(r.config_name);
  std::vector<Mode> columns;
  for (Mode m : kColumnOrder)
    if (std::any_of(rows.begin(), rows.end(), [m](const EvalRow& r) { return r.mode == m; }))
      columns.push_back(m);

  auto cell = [&](const std::string& label, Mode m) {
    std::string out;
    for (const auto& r : rows) {
      if (r.config_name != label || r.mode != m) continue;
      if (!out.empty()) out += "/";
      out += pct2(r.corpus_wer);
    }
    return out.empty() ? std::string("-") : out;
  };

  std::size_t label_w = std::string("Configuration").size();
  for (const auto& l : labels) label_w = std::max(label_w, l.size());
  std::vector<std::size_t> col_w(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    col_w[c] = std::string(to_string(columns[c])).size();
    for (const auto& l : labels) col_w[c] = std::max(col_w[c], cell(l, columns[c]).size());
  }

  std::ostringstream text;
  const std::string title = "Configuration";
  text << title << std::string(label_w - title.size(), ' ');
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const std::string head{to_string(columns[c])};
    text << "  " << std::string(col_w[c] - head.size(), ' ') << head;
  }
  text << '\n';
  for (const auto& l : labels) {
    text << l << std::string(label_w - l.size(), ' ');
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string v = cell(l, columns[c]);
      text << "  " << std::string(col_w[c] - v.size(), ' ') << v;
    }
    text << '\n';
  }
  table.text = text.str();

  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"config_name", r.config_name},
                     {"mode", std::string(to_string(r.mode))},
                     {"corpus_wer", r.corpus_wer},
                     {"wer_pct", pct2(r.corpus_wer)},
                     {"n_utts", r.n_utts},
                     {"prompt_fallbacks", r.prompt_fallbacks}});
  }
  table.json = nlohmann::json{{"rows", jrows}, {"warnings", table.warnings}};
  return table;
}

std::string emit_sweep_curve(const AlphaSweepResult& sweep) {
  std::ostringstream out;
  out << "alpha,corpus_wer\n";
  char buf[64];
  for (const auto& [alpha, wer] : sweep.grid) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.6f\n", alpha, wer);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "# best_alpha=%.2f best_wer=%.6f\n", sweep.best_alpha,
                sweep.best_wer);
  out << buf;
  return out.str();
}

std::vector<ContaminationFinding> contamination_probe(const std::vector<UttSelection>& selections,
                                                      const Corpus& corpus, NormPolicy policy) {
  std::vector<ContaminationFinding> findings;
  for (const auto& sel : selections) {
    if (sel.source != HypSource::prompt_addition) continue;
    const NBestList* utt = corpus.find(sel.utt_id);
    if (!utt)
      throw std::invalid_argument("contamination_probe: selection for unknown utterance \"" +
                                  sel.utt_id + "\"");
    if (!utt->reference)
      throw std::invalid_argument("contamination_probe: utterance \"" + sel.utt_id +
                                  "\" has no reference");

    std::unordered_set<std::string> asr_tokens;
    for (const auto& h : utt->hyps) {
      if (h.source != HypSource::asr) continue;
      for (auto& tok : normalize_text(h.text, policy)) asr_tokens.insert(std::move(tok));
    }
    std::unordered_set<std::string> ref_tokens;
    for (auto& tok : normalize_text(*utt->reference, policy)) ref_tokens.insert(std::move(tok));

    ContaminationFinding finding;
    finding.utt_id = sel.utt_id;
    std::unordered_set<std::string> emitted;
    for (const auto& tok : normalize_text(sel.text, policy)) {
      if (asr_tokens.count(tok) || emitted.count(tok)) continue;
      emitted.insert(tok);
      finding.matches_reference.push_back(ref_tokens.count(tok) > 0);
      finding.novel_tokens.push_back(tok);
    }
    if (!finding.novel_tokens.empty()) findings.push_back(std::move(finding));
  }
  return findings;
}

nlohmann::json finding_to_json(const ContaminationFinding& f) {
  return nlohmann::json{{"utt_id", f.utt_id},
                        {"novel_tokens", f.novel_tokens},
                        {"matches_reference", f.matches_reference}};
}

}  // namespace progres
