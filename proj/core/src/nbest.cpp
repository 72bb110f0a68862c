#include "progres/nbest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace progres {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw CorpusFormatError("line " + std::to_string(line_no) + ": " + what);
}

Hypothesis parse_hypothesis(const json& h, std::size_t line_no) {
  if (!h.is_object()) fail(line_no, "hypothesis entry is not an object");
  if (!h.contains("text") || !h["text"].is_string()) fail(line_no, "hypothesis missing string \"text\"");
  Hypothesis out;
  out.text = h["text"].get<std::string>();
  if (trim(out.text).empty()) fail(line_no, "empty hypothesis text");
  if (!h.contains("asr_score") || !h["asr_score"].is_number())
    fail(line_no, "hypothesis missing numeric \"asr_score\"");
  out.asr_score = h["asr_score"].get<double>();
  if (!std::isfinite(out.asr_score)) fail(line_no, "non-finite asr_score");
  if (h.contains("source")) {
    if (!h["source"].is_string()) fail(line_no, "hypothesis source is not a string");
    const auto src = h["source"].get<std::string>();
    if (src == "asr") {
      out.source = HypSource::asr;
    } else if (src == "prompt_addition") {
      out.source = HypSource::prompt_addition;
    } else {
      fail(line_no, "unknown hypothesis source \"" + src + "\"");
    }
  }
  if (h.contains("llm_score") && !h["llm_score"].is_null()) {
    if (!h["llm_score"].is_number()) fail(line_no, "llm_score is not a number");
    out.llm_score = h["llm_score"].get<double>();
    if (!std::isfinite(*out.llm_score)) fail(line_no, "non-finite llm_score");
  }
  return out;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::validation: return "validation";
    case Split::test: return "test";
    case Split::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view to_string(HypSource s) {
  return s == HypSource::asr ? "asr" : "prompt_addition";
}

Split split_from_string(std::string_view s) {
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  if (s == "unlabeled") return Split::unlabeled;
  throw std::invalid_argument("unknown split \"" + std::string(s) + "\"");
}

std::size_t NBestList::asr_count() const {
  std::size_t n = 0;
  for (const auto& h : hyps)
    if (h.source == HypSource::asr) ++n;
  return n;
}

const Hypothesis* NBestList::top_asr() const {
  for (const auto& h : hyps)
    if (h.source == HypSource::asr && h.asr_rank == 1) return &h;
  return nullptr;
}

const Hypothesis* NBestList::prompt_addition() const {
  for (const auto& h : hyps)
    if (h.source == HypSource::prompt_addition) return &h;
  return nullptr;
}

const NBestList* Corpus::find(std::string_view utt_id) const {
  for (const auto& u : utterances)
    if (u.utt_id == utt_id) return &u;
  return nullptr;
}

ParsedCorpus parse_nbest_jsonl(std::istream& in, Split split) {
  ParsedCorpus result;
  result.corpus.split = split;
  std::unordered_set<std::string> seen_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {  // parse errors and numeric overflow
      fail(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) fail(line_no, "record is not an object");
    if (!rec.contains("utt_id") || !rec["utt_id"].is_string())
      fail(line_no, "missing string \"utt_id\"");

    NBestList utt;
    utt.utt_id = rec["utt_id"].get<std::string>();
    if (utt.utt_id.empty()) fail(line_no, "empty utt_id");
    if (!seen_ids.insert(utt.utt_id).second)
      fail(line_no, "duplicate utt_id \"" + utt.utt_id + "\"");

    if (rec.contains("reference") && !rec["reference"].is_null()) {
      if (!rec["reference"].is_string()) fail(line_no, "reference is not a string");
      utt.reference = rec["reference"].get<std::string>();
    }

    if (!rec.contains("hyps") || !rec["hyps"].is_array() || rec["hyps"].empty())
      fail(line_no, "empty hypothesis list");

    std::vector<Hypothesis> asr_hyps;
    std::optional<Hypothesis> addition;
    for (const auto& h : rec["hyps"]) {
      Hypothesis hyp = parse_hypothesis(h, line_no);
      if (hyp.source == HypSource::prompt_addition) {
        if (addition) fail(line_no, "more than one prompt_addition hypothesis");
        addition = std::move(hyp);
      } else {
        asr_hyps.push_back(std::move(hyp));
      }
    }

    // Canonical order: ASR hypotheses by descending score, addition last.
    const bool sorted = std::is_sorted(
        asr_hyps.begin(), asr_hyps.end(),
        [](const Hypothesis& a, const Hypothesis& b) { return a.asr_score > b.asr_score; });
    if (!sorted) {
      std::stable_sort(asr_hyps.begin(), asr_hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
        return a.asr_score > b.asr_score;
      });
      result.warnings.push_back("utterance \"" + utt.utt_id +
                                "\": hypotheses were out of score order; re-sorted by asr_score");
    }
    for (std::size_t i = 0; i < asr_hyps.size(); ++i) asr_hyps[i].asr_rank = static_cast<int>(i + 1);

    utt.hyps = std::move(asr_hyps);
    if (addition) {
      addition->asr_rank = 0;
      utt.hyps.push_back(std::move(*addition));
    }

    if (split != Split::unlabeled && !utt.reference)
      result.warnings.push_back("utterance \"" + utt.utt_id + "\": missing reference on " +
                                std::string(to_string(split)) + " split");

    result.corpus.utterances.push_back(std::move(utt));
  }
  return result;
}

void serialize_nbest_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& utt : corpus.utterances) {
    ordered_json rec;
    rec["utt_id"] = utt.utt_id;
    rec["reference"] = utt.reference ? ordered_json(*utt.reference) : ordered_json(nullptr);
    ordered_json hyps = ordered_json::array();
    for (const auto& h : utt.hyps) {
      ordered_json hj;
      hj["text"] = h.text;
      hj["asr_score"] = h.asr_score;
      hj["source"] = std::string(to_string(h.source));
      if (h.llm_score) hj["llm_score"] = *h.llm_score;
      hyps.push_back(std::move(hj));
    }
    rec["hyps"] = std::move(hyps);
    out << rec.dump() << '\n';
  }
}

NBestList extend_with_generated(const NBestList& list, const std::string& correction) {
  if (trim(correction).empty()) return list;
  if (list.asr_count() == 0)
    throw std::invalid_argument("extend_with_generated: list has no ASR hypotheses");

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& h : list.hyps)
    if (h.source == HypSource::asr) best = std::max(best, h.asr_score);

  NBestList out = list;
  Hypothesis added;
  added.text = correction;
  added.asr_score = best;
  added.source = HypSource::prompt_addition;
  added.asr_rank = 0;
  out.hyps.push_back(std::move(added));
  return out;
}

std::vector<Diagnostic> validate_corpus(const Corpus& corpus) {
  std::vector<Diagnostic> diags;
  std::unordered_set<std::string> seen_ids;
  const bool labeled = corpus.split != Split::unlabeled;

  for (const auto& utt : corpus.utterances) {
    if (utt.utt_id.empty()) diags.push_back({utt.utt_id, "empty utt_id"});
    if (!seen_ids.insert(utt.utt_id).second)
      diags.push_back({utt.utt_id, "duplicate utt_id"});
    if (labeled && (!utt.reference || trim(*utt.reference).empty()))
      diags.push_back({utt.utt_id, "missing or empty reference on labeled split"});

    std::size_t additions = 0;
    int expected_rank = 1;
    double prev_score = std::numeric_limits<double>::infinity();
    std::size_t asr_seen = 0;
    for (const auto& h : utt.hyps) {
      if (trim(h.text).empty()) diags.push_back({utt.utt_id, "empty hypothesis text"});
      if (!std::isfinite(h.asr_score)) diags.push_back({utt.utt_id, "non-finite asr_score"});
      if (h.llm_score && !std::isfinite(*h.llm_score))
        diags.push_back({utt.utt_id, "non-finite llm_score"});
      if (h.source == HypSource::prompt_addition) {
        ++additions;
        if (h.asr_rank != 0) diags.push_back({utt.utt_id, "prompt_addition carries an ASR rank"});
        continue;
      }
      ++asr_seen;
      if (h.asr_rank != expected_rank)
        diags.push_back({utt.utt_id, "ASR rank does not match list position"});
      if (h.asr_score > prev_score)
        diags.push_back({utt.utt_id, "ASR hypotheses out of score order"});
      prev_score = h.asr_score;
      ++expected_rank;
    }
    if (asr_seen == 0) diags.push_back({utt.utt_id, "no ASR hypotheses"});
    if (additions > 1) diags.push_back({utt.utt_id, "more than one prompt_addition"});
  }
  return diags;
}

}  // namespace progres
