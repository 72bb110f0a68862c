#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "progres/nbest.hpp"
#include "stub_server.hpp"
#include "temp_dir.hpp"

using nlohmann::json;
using progres::stub::StubServer;
using progres::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

progres::Corpus parse_file(const fs::path& path, progres::Split split) {
  std::ifstream in(path);
  REQUIRE(in);
  return progres::parse_nbest_jsonl(in, split).corpus;
}

// Drives the installed binary against an in-process stub endpoint.
struct CliRunner {
  TempDir tmp{"cli"};
  StubServer server;
  fs::path config_path;
  fs::path out;
  fs::path errlog;

  CliRunner() {
    server.start();
    out = tmp / "out";
    config_path = tmp / "config.json";
    errlog = tmp / "stderr.log";
  }

  void write_config(json extra = json::object()) {
    json endpoint{{"base_url", server.base_url()},
                  {"model_id", "stub-model"},
                  {"max_retries", 2},
                  {"retry_base_ms", 5},
                  {"timeout_ms", 5000}};
    json cfg{{"generation_endpoint", endpoint},
             {"scoring_endpoint", endpoint},
             {"cache_dir", (tmp / "cache").string()},
             {"output_dir", out.string()},
             {"parallelism_limit", 3},
             {"alpha", 0.5},
             {"mode", "progres"}};
    for (auto& [k, v] : extra.items()) cfg[k] = v;
    std::ofstream(config_path) << cfg.dump(2);
  }

  int run(const std::string& args, const std::string& env_prefix = "") {
    const std::string cmd = env_prefix + "\"" + PROGRES_CLI_PATH + "\" " + args + " --config \"" +
                            config_path.string() + "\" >>\"" + (tmp / "stdout.log").string() +
                            "\" 2>>\"" + errlog.string() + "\"";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
  }

  std::string stderr_text() const { return read_file(errlog); }
};

std::string fixture(const char* name) {
  return std::string(PROGRES_TEST_SRC_DIR) + "/fixtures/" + name;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate extends every utterance and reruns from cache byte-identically") {
  CliRunner cli;
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")}});

  REQUIRE(cli.run("generate") == 0);
  const fs::path extended = cli.out / "validation.extended.jsonl";
  const progres::Corpus corpus = parse_file(extended, progres::Split::validation);
  REQUIRE(corpus.utterances.size() == 3);
  for (const auto& utt : corpus.utterances) {
    const progres::Hypothesis* add = utt.prompt_addition();
    REQUIRE(add != nullptr);
    // Default stub behavior brackets the second-ranked hypothesis.
    CHECK(add->text == utt.hyps[1].text);
    CHECK(add->asr_score == utt.hyps[0].asr_score);
  }

  const std::string first_bytes = read_file(extended);
  const auto requests_after_first = cli.server.request_count();
  REQUIRE(cli.run("generate") == 0);
  CHECK(read_file(extended) == first_bytes);
  CHECK(cli.server.request_count() == requests_after_first);  // warm cache, no network
}

TEST_CASE("a bracket-free reply leaves that utterance unextended") {
  CliRunner cli;
  cli.server.set_generate_handler([](const std::string& prompt) {
    if (prompt.find("zebra") != std::string::npos) return std::string("no brackets here");
    return StubServer::default_generate(prompt);
  });
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")}});

  REQUIRE(cli.run("generate") == 0);
  const progres::Corpus corpus =
      parse_file(cli.out / "validation.extended.jsonl", progres::Split::validation);
  int additions = 0;
  for (const auto& utt : corpus.utterances)
    if (utt.prompt_addition()) ++additions;
  CHECK(additions == 2);
  CHECK(cli.stderr_text().find("1 fallbacks") != std::string::npos);
}

TEST_CASE("scoring issues one call per unique hypothesis text") {
  CliRunner cli;
  const fs::path corpus_path = cli.tmp / "two.jsonl";
  std::ofstream(corpus_path)
      << R"({"utt_id":"u1","reference":"a b","hyps":[{"text":"a b","asr_score":-1},{"text":"a c","asr_score":-2},{"text":"b c","asr_score":-3}]})"
      << "\n"
      << R"({"utt_id":"u2","reference":"d e","hyps":[{"text":"d e","asr_score":-1},{"text":"d f","asr_score":-2},{"text":"e f","asr_score":-3}]})"
      << "\n";
  cli.write_config({{"validation_corpus", corpus_path.string()}});

  REQUIRE(cli.run("score") == 0);
  CHECK(cli.server.scoring_requests() == 6);  // six distinct texts, cold cache

  const progres::Corpus corpus =
      parse_file(cli.out / "validation.scored.jsonl", progres::Split::validation);
  for (const auto& utt : corpus.utterances)
    for (const auto& h : utt.hyps) REQUIRE(h.llm_score.has_value());

  const auto before = cli.server.request_count();
  REQUIRE(cli.run("score") == 0);
  CHECK(cli.server.request_count() == before);  // fully cached rerun
}

TEST_CASE("duplicate hypothesis texts deduplicate through the cache key") {
  CliRunner cli;
  const fs::path corpus_path = cli.tmp / "dup.jsonl";
  std::ofstream(corpus_path)
      << R"({"utt_id":"u1","reference":"a b","hyps":[{"text":"a b","asr_score":-1},{"text":"shared text","asr_score":-2}]})"
      << "\n"
      << R"({"utt_id":"u2","reference":"a b","hyps":[{"text":"shared text","asr_score":-1},{"text":"a b","asr_score":-2}]})"
      << "\n";
  cli.write_config({{"validation_corpus", corpus_path.string()}});

  REQUIRE(cli.run("score") == 0);
  CHECK(cli.server.scoring_requests() == 2);  // four hypotheses, two unique texts
}

TEST_CASE("sweep on rank-identical scores settles on alpha zero") {
  CliRunner cli;
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")}});
  fs::create_directories(cli.out);
  // Hand-written scored corpus: llm_score mirrors asr_score exactly.
  std::ofstream(cli.out / "validation.scored.jsonl")
      << R"({"utt_id":"u1","reference":"a b","hyps":[{"text":"a b","asr_score":-1,"source":"asr","llm_score":-1},{"text":"a c","asr_score":-2,"source":"asr","llm_score":-2}]})"
      << "\n"
      << R"({"utt_id":"u2","reference":"d e","hyps":[{"text":"d x","asr_score":-1,"source":"asr","llm_score":-1},{"text":"d e","asr_score":-2,"source":"asr","llm_score":-2}]})"
      << "\n";

  REQUIRE(cli.run("sweep") == 0);
  const json sweep = json::parse(read_file(cli.out / "sweep.json"));
  CHECK(sweep["best_alpha"] == 0.0);

  const std::string csv = read_file(cli.out / "sweep.csv");
  int data_rows = 0;
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) ++data_rows;
  CHECK(data_rows == 21);
}

TEST_CASE("missing prerequisites name the stage to run") {
  CliRunner cli;
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")}});

  SUBCASE("rescore before anything") {
    CHECK(cli.run("rescore") == 1);
    CHECK(cli.stderr_text().find("run `generate` then `score` first") != std::string::npos);
  }
  SUBCASE("rescore after generate but before score") {
    REQUIRE(cli.run("generate") == 0);
    CHECK(cli.run("rescore") == 1);
    CHECK(cli.stderr_text().find("run `score` first") != std::string::npos);
  }
  SUBCASE("progres without alpha and without a sweep") {
    cli.write_config({{"validation_corpus", fixture("sample3.jsonl")}, {"alpha", "sweep"}});
    REQUIRE(cli.run("generate") == 0);
    REQUIRE(cli.run("score") == 0);
    CHECK(cli.run("rescore") == 1);
    CHECK(cli.stderr_text().find("run `sweep` first") != std::string::npos);
  }
}

TEST_CASE("sweep demands a validation corpus") {
  CliRunner cli;
  cli.write_config({{"test_corpus", fixture("sample3.jsonl")}});
  CHECK(cli.run("sweep") == 1);
  CHECK(cli.stderr_text().find("validation") != std::string::npos);
}

TEST_CASE("an unreachable endpoint fails fast with a diagnostic") {
  CliRunner cli;
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")},
                    {"generation_endpoint",
                     {{"base_url", "http://127.0.0.1:1"},
                      {"model_id", "stub-model"},
                      {"max_retries", 0},
                      {"retry_base_ms", 5},
                      {"timeout_ms", 300}}}});
  CHECK(cli.run("generate") == 1);
  CHECK(cli.stderr_text().find("unreachable") != std::string::npos);
}

TEST_CASE("a server lacking logprobs is a fatal configuration error") {
  CliRunner cli;
  cli.server.set_omit_logprobs(true);
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")}});
  CHECK(cli.run("score") == 1);
  CHECK(cli.stderr_text().find("logprob") != std::string::npos);
}

TEST_CASE("api keys come from the configured environment variable") {
  CliRunner cli;
  cli.server.set_required_api_key("sk-right");
  json endpoint{{"base_url", cli.server.base_url()},
                {"model_id", "stub-model"},
                {"max_retries", 0},
                {"retry_base_ms", 5},
                {"timeout_ms", 5000},
                {"api_key_env", "PROGRES_TEST_KEY"}};
  cli.write_config(
      {{"validation_corpus", fixture("sample3.jsonl")}, {"generation_endpoint", endpoint}});

  SUBCASE("without the key every utterance degrades but the run completes") {
    REQUIRE(cli.run("generate") == 0);
    const progres::Corpus corpus =
        parse_file(cli.out / "validation.extended.jsonl", progres::Split::validation);
    for (const auto& utt : corpus.utterances) CHECK(utt.prompt_addition() == nullptr);
    CHECK(cli.stderr_text().find("auth") != std::string::npos);
  }
  SUBCASE("with the key all utterances extend") {
    REQUIRE(cli.run("generate", "PROGRES_TEST_KEY=sk-right ") == 0);
    const progres::Corpus corpus =
        parse_file(cli.out / "validation.extended.jsonl", progres::Split::validation);
    for (const auto& utt : corpus.utterances) CHECK(utt.prompt_addition() != nullptr);
  }
}

TEST_CASE("full pipeline on the bundled fixture reproduces the golden table") {
  CliRunner cli;
  cli.write_config({{"validation_corpus", fixture("fixture20.jsonl")},
                    {"test_corpus", fixture("fixture20.jsonl")},
                    {"alpha", "sweep"}});

  REQUIRE(cli.run("generate") == 0);
  REQUIRE(cli.run("score") == 0);
  REQUIRE(cli.run("sweep") == 0);
  REQUIRE(cli.run("rescore") == 0);
  REQUIRE(cli.run("oracle") == 0);
  REQUIRE(cli.run("evaluate") == 0);

  fs::path eval_dir;
  for (const auto& entry : fs::directory_iterator(cli.out))
    if (entry.is_directory() && entry.path().filename().string().rfind("eval-", 0) == 0)
      eval_dir = entry.path();
  REQUIRE_FALSE(eval_dir.empty());

  const json table = json::parse(read_file(eval_dir / "table.json"));
  REQUIRE(table["rows"].size() == 5);

  double baseline = -1, prompt_only = -1, oracle = -1, progres_wer = -1, llm = -1;
  for (const auto& row : table["rows"]) {
    const std::string mode = row["mode"];
    const double wer = row["corpus_wer"];
    if (mode == "baseline") baseline = wer;
    if (mode == "prompt_only") prompt_only = wer;
    if (mode == "oracle") oracle = wer;
    if (mode == "progres") progres_wer = wer;
    if (mode == "llm_rescoring") llm = wer;
  }
  // Hand-counted: rank-1 hypotheses carry 13 edits over 120 reference words;
  // the stub's additions (second-ranked texts) also carry 13; the oracle over
  // the extended sets reaches 4.
  CHECK(baseline == doctest::Approx(13.0 / 120.0).epsilon(1e-12));
  CHECK(prompt_only == doctest::Approx(13.0 / 120.0).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(4.0 / 120.0).epsilon(1e-12));
  CHECK(oracle <= progres_wer);
  CHECK(oracle <= llm);
  CHECK(oracle <= baseline);

  const std::string golden_path = std::string(PROGRES_TEST_SRC_DIR) + "/golden/eval_table.golden.txt";
  if (fs::exists(golden_path)) {
    CHECK(read_file(eval_dir / "table.txt") == read_file(golden_path));
  } else {
    // Bootstrap helper: freeze the first reviewed table as the golden copy.
    std::cerr << "golden table missing; current table:\n" << read_file(eval_dir / "table.txt");
    FAIL("golden file missing: eval_table.golden.txt");
  }
}

TEST_CASE("flags override the config: mode, output dir, per-utterance detail") {
  CliRunner cli;
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")}});
  const fs::path other_out = cli.tmp / "other-out";
  REQUIRE(cli.run("rescore --mode baseline --per-utt --out \"" + other_out.string() + "\"") == 0);

  // Baseline needs no pipeline intermediates; it reads the raw corpus.
  const fs::path selections = other_out / "selections.baseline.jsonl";
  REQUIRE(fs::exists(selections));
  CHECK(fs::exists(other_out / "per_utt.baseline.jsonl"));
  CHECK(fs::exists(other_out / "report.baseline.json"));
  CHECK_FALSE(fs::exists(cli.out / "selections.baseline.jsonl"));

  std::istringstream lines(read_file(selections));
  std::string line;
  std::vector<json> rows;
  while (std::getline(lines, line))
    if (!line.empty()) rows.push_back(json::parse(line));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0]["text"] == "hello word today");  // rank-1, not the reference
  CHECK(rows[0]["mode"] == "baseline");
  CHECK(rows[0]["source"] == "asr");
}

TEST_CASE("evaluate honors oracle-vs-baseline ordering on a two-mode grid") {
  CliRunner cli;
  cli.write_config({{"validation_corpus", fixture("sample3.jsonl")},
                    {"eval_modes", json::array({"baseline", "oracle"})}});
  REQUIRE(cli.run("generate") == 0);
  REQUIRE(cli.run("evaluate") == 0);

  fs::path eval_dir;
  for (const auto& entry : fs::directory_iterator(cli.out))
    if (entry.is_directory() && entry.path().filename().string().rfind("eval-", 0) == 0)
      eval_dir = entry.path();
  REQUIRE_FALSE(eval_dir.empty());
  const json table = json::parse(read_file(eval_dir / "table.json"));
  REQUIRE(table["rows"].size() == 2);
  double baseline = -1, oracle = -1;
  for (const auto& row : table["rows"]) {
    if (row["mode"] == "baseline") baseline = row["corpus_wer"];
    if (row["mode"] == "oracle") oracle = row["corpus_wer"];
  }
  CHECK(oracle <= baseline);
  // Every sample utterance has an exact hypothesis available.
  CHECK(oracle == 0.0);
}

}  // TEST_SUITE
