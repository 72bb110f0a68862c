#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "corpus_gen.hpp"
#include "fixtures.hpp"
#include "progres/nbest.hpp"

using namespace progres;

namespace {

ParsedCorpus parse_text(const std::string& text, Split split = Split::unlabeled) {
  std::istringstream in(text);
  return parse_nbest_jsonl(in, split);
}

}  // namespace

TEST_SUITE("nbest") {

TEST_CASE("single record round-trips") {
  const std::string line =
      R"({"utt_id":"u1","reference":"a b","hyps":[{"text":"a b","asr_score":-1.0}]})"
      "\n";
  const ParsedCorpus parsed = parse_text(line);
  CHECK(parsed.warnings.empty());
  REQUIRE(parsed.corpus.utterances.size() == 1);
  const NBestList& utt = parsed.corpus.utterances[0];
  CHECK(utt.utt_id == "u1");
  CHECK(utt.reference == "a b");
  REQUIRE(utt.hyps.size() == 1);
  CHECK(utt.hyps[0].asr_rank == 1);
  CHECK(utt.hyps[0].source == HypSource::asr);

  std::ostringstream out;
  serialize_nbest_jsonl(parsed.corpus, out);
  const ParsedCorpus again = parse_text(out.str());
  CHECK(again.corpus == parsed.corpus);
}

TEST_CASE("duplicate utt_id is fatal and names the id") {
  const std::string text =
      R"({"utt_id":"u1","hyps":[{"text":"a","asr_score":-1}]})"
      "\n"
      R"({"utt_id":"u1","hyps":[{"text":"b","asr_score":-2}]})"
      "\n";
  CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("\"u1\""), CorpusFormatError);
}

TEST_CASE("out-of-order scores are re-sorted with a warning") {
  const std::string text =
      R"({"utt_id":"u1","hyps":[{"text":"low","asr_score":-3.0},{"text":"high","asr_score":-1.0}]})"
      "\n";
  const ParsedCorpus parsed = parse_text(text);
  REQUIRE(parsed.warnings.size() == 1);
  CHECK(parsed.warnings[0].find("re-sorted") != std::string::npos);

  const auto& hyps = parsed.corpus.utterances[0].hyps;
  REQUIRE(hyps.size() == 2);
  CHECK(hyps[0].asr_score == -1.0);
  CHECK(hyps[0].asr_rank == 1);
  CHECK(hyps[1].asr_rank == 2);

  // Sort oracle: descending score order must match an independent sort.
  std::vector<double> scores;
  for (const auto& h : hyps) scores.push_back(h.asr_score);
  std::vector<double> sorted = scores;
  std::sort(sorted.rbegin(), sorted.rend());
  CHECK(scores == sorted);
}

TEST_CASE("in-order files produce no warning") {
  const std::string text =
      R"({"utt_id":"u1","hyps":[{"text":"high","asr_score":-1.0},{"text":"low","asr_score":-3.0}]})"
      "\n";
  CHECK(parse_text(text).warnings.empty());
}

TEST_CASE("malformed line reports its line number") {
  const std::string text =
      R"({"utt_id":"u1","hyps":[{"text":"a","asr_score":-1}]})"
      "\n{nonsense\n";
  CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("line 2"), CorpusFormatError);
}

TEST_CASE("overflowing scores are rejected at ingestion") {
  // JSON cannot carry non-finite numbers; overflow is how they appear.
  const std::string text = R"({"utt_id":"u1","hyps":[{"text":"a","asr_score":1e999}]})";
  CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("line 1"), CorpusFormatError);
}

TEST_CASE("empty hypothesis list is rejected") {
  CHECK_THROWS_WITH_AS(parse_text(R"({"utt_id":"u1","hyps":[]})"),
                       doctest::Contains("empty hypothesis list"), CorpusFormatError);
}

TEST_CASE("whitespace-only hypothesis text is rejected") {
  CHECK_THROWS_WITH_AS(parse_text(R"({"utt_id":"u1","hyps":[{"text":"  ","asr_score":-1}]})"),
                       doctest::Contains("empty hypothesis text"), CorpusFormatError);
}

TEST_CASE("a non-string source field is a format error") {
  CHECK_THROWS_WITH_AS(
      parse_text(R"({"utt_id":"u1","hyps":[{"text":"a","asr_score":-1,"source":7}]})"),
      doctest::Contains("source"), CorpusFormatError);
}

TEST_CASE("two prompt additions on one utterance are rejected") {
  const std::string text =
      R"({"utt_id":"u1","hyps":[{"text":"a","asr_score":-1},)"
      R"({"text":"b","asr_score":-1,"source":"prompt_addition"},)"
      R"({"text":"c","asr_score":-1,"source":"prompt_addition"}]})";
  CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("prompt_addition"), CorpusFormatError);
}

TEST_CASE("null and missing references both parse") {
  const ParsedCorpus a = parse_text(R"({"utt_id":"u1","reference":null,"hyps":[{"text":"a","asr_score":-1}]})");
  CHECK_FALSE(a.corpus.utterances[0].reference.has_value());
  const ParsedCorpus b = parse_text(R"({"utt_id":"u1","hyps":[{"text":"a","asr_score":-1}]})");
  CHECK_FALSE(b.corpus.utterances[0].reference.has_value());
}

TEST_CASE("labeled split without reference warns") {
  const ParsedCorpus parsed =
      parse_text(R"({"utt_id":"u1","hyps":[{"text":"a","asr_score":-1}]})", Split::validation);
  REQUIRE(parsed.warnings.size() == 1);
  CHECK(parsed.warnings[0].find("missing reference") != std::string::npos);
}

TEST_CASE("extend_with_generated appends the correction at the top ASR score") {
  NBestList utt = progres::testing::placename_utterance();
  const NBestList extended = extend_with_generated(utt, progres::testing::kPlacenameCorrection);
  REQUIRE(extended.hyps.size() == 6);
  const Hypothesis& added = extended.hyps.back();
  CHECK(added.source == HypSource::prompt_addition);
  CHECK(added.text == progres::testing::kPlacenameCorrection);
  CHECK(added.asr_score == utt.hyps[0].asr_score);  // rank-1 confidence
  CHECK(added.asr_rank == 0);
}

TEST_CASE("a correction equal to the rank-1 text is still appended") {
  NBestList utt = progres::testing::placename_utterance();
  const NBestList extended = extend_with_generated(utt, utt.hyps[0].text);
  CHECK(extended.hyps.size() == utt.hyps.size() + 1);
  CHECK(extended.prompt_addition() != nullptr);
}

TEST_CASE("empty or whitespace corrections leave the list unchanged") {
  const NBestList utt = progres::testing::placename_utterance();
  CHECK(extend_with_generated(utt, "") == utt);
  CHECK(extend_with_generated(utt, "   \t") == utt);
}

TEST_CASE("extension never alters existing hypotheses and adds at most one") {
  std::mt19937 rng(42);
  const Corpus corpus =
      progres::testing::make_random_corpus(rng, {.n_utts = 40, .with_addition = false});
  std::uniform_int_distribution<int> len(0, 4);
  for (const auto& utt : corpus.utterances) {
    const auto correction = progres::testing::join(progres::testing::random_tokens(rng, len(rng), 5));
    const NBestList extended = extend_with_generated(utt, correction);
    const std::size_t delta = extended.hyps.size() - utt.hyps.size();
    REQUIRE((delta == 0 || delta == 1));
    for (std::size_t i = 0; i < utt.hyps.size(); ++i) REQUIRE(extended.hyps[i] == utt.hyps[i]);
    if (delta == 1) {
      double best = utt.hyps[0].asr_score;
      for (const auto& h : utt.hyps)
        if (h.source == HypSource::asr) best = std::max(best, h.asr_score);
      REQUIRE(extended.hyps.back().asr_score == best);
    }
  }
}

TEST_CASE("serialize-parse is the identity on valid corpora") {
  std::mt19937 rng(1234);
  for (int i = 0; i < 10; ++i) {
    const Corpus corpus = progres::testing::make_random_corpus(rng, {.n_utts = 15});
    std::ostringstream out;
    serialize_nbest_jsonl(corpus, out);
    std::istringstream in(out.str());
    const ParsedCorpus parsed = parse_nbest_jsonl(in, corpus.split);
    REQUIRE(parsed.warnings.empty());
    REQUIRE(parsed.corpus == corpus);
  }
}

TEST_CASE("validate_corpus reports violations without mutating") {
  std::mt19937 rng(5);
  Corpus corpus = progres::testing::make_random_corpus(rng, {.n_utts = 5});
  CHECK(validate_corpus(corpus).empty());

  SUBCASE("missing reference on a labeled split") {
    corpus.utterances[1].reference.reset();
    const auto diags = validate_corpus(corpus);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].utt_id == corpus.utterances[1].utt_id);
    CHECK(diags[0].message.find("reference") != std::string::npos);
  }
  SUBCASE("utterance with no ASR hypotheses") {
    auto& utt = corpus.utterances[0];
    std::erase_if(utt.hyps, [](const Hypothesis& h) { return h.source == HypSource::asr; });
    const auto diags = validate_corpus(corpus);
    REQUIRE_FALSE(diags.empty());
    CHECK(std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) {
      return d.utt_id == utt.utt_id && d.message.find("no ASR hypotheses") != std::string::npos;
    }));
  }
  SUBCASE("duplicate ids and out-of-order scores") {
    corpus.utterances[2].utt_id = corpus.utterances[0].utt_id;
    auto& hyps = corpus.utterances[3].hyps;
    if (hyps.size() >= 2) std::swap(hyps[0].asr_score, hyps[1].asr_score);
    const auto diags = validate_corpus(corpus);
    CHECK_FALSE(diags.empty());
  }
}

}  // TEST_SUITE
