// progres: batch pipeline for extending ASR n-best lists with LLM-generated
// corrections and rescoring them with interpolated acoustic/linguistic
// scores.
//
// Subcommands mirror the pipeline stages and persist their intermediates so
// the expensive endpoint stages run once while rescoring and evaluation
// iterate freely:
//   generate -> {split}.extended.jsonl
//   score    -> {split}.scored.jsonl
//   sweep    -> sweep.csv, sweep.json
//   rescore  -> selections.{mode}.jsonl, report.{mode}.json, findings.{mode}.jsonl
//   evaluate -> eval-{hash}-{timestamp}/{table.txt,table.json,findings.jsonl,stats.json}
//   oracle   -> selections.oracle.jsonl, report.oracle.json

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "progres/cache.hpp"
#include "progres/eval.hpp"
#include "progres/gateway.hpp"
#include "progres/nbest.hpp"
#include "progres/prompts.hpp"
#include "progres/rescoring.hpp"
#include "progres/run_config.hpp"
#include "progres/wer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

struct FatalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small helpers

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

progres::ParsedCorpus load_corpus(const fs::path& path, progres::Split split) {
  std::ifstream in(path);
  if (!in) throw FatalError("cannot open corpus: " + path.string());
  try {
    return progres::parse_nbest_jsonl(in, split);
  } catch (const progres::CorpusFormatError& e) {
    throw FatalError(path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FatalError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw FatalError("write failed: " + path.string());
}

void write_corpus(const fs::path& path, const progres::Corpus& corpus) {
  std::ostringstream buf;
  progres::serialize_nbest_jsonl(corpus, buf);
  write_text_file(path, buf.str());
}

void report_warnings(const progres::ParsedCorpus& parsed) {
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& d : progres::validate_corpus(parsed.corpus))
    std::cerr << "warning: corpus check: " << (d.utt_id.empty() ? "corpus" : d.utt_id) << ": "
              << d.message << "\n";
}

std::string utc_compact_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Per-invocation context

struct SplitSlot {
  progres::Split split;
  fs::path input;  // raw corpus from the config
};

struct Ctx {
  progres::RunConfig cfg;
  fs::path out;

  std::vector<SplitSlot> splits() const {
    std::vector<SplitSlot> slots;
    if (cfg.validation_corpus) slots.push_back({progres::Split::validation, *cfg.validation_corpus});
    if (cfg.test_corpus) slots.push_back({progres::Split::test, *cfg.test_corpus});
    return slots;
  }

  fs::path extended_path(progres::Split s) const {
    return out / (std::string(progres::to_string(s)) + ".extended.jsonl");
  }
  fs::path scored_path(progres::Split s) const {
    return out / (std::string(progres::to_string(s)) + ".scored.jsonl");
  }

  // The split evaluation-style commands operate on: test when configured,
  // otherwise validation.
  SplitSlot eval_slot() const {
    if (cfg.test_corpus) return {progres::Split::test, *cfg.test_corpus};
    return {progres::Split::validation, *cfg.validation_corpus};
  }
};

// Stage fallback: prefer the furthest stage the pipeline has produced.
// `need` names the stages that are acceptable.
enum class Stage { raw, extended, scored };

progres::ParsedCorpus load_stage(const Ctx& ctx, const SplitSlot& slot, Stage minimum) {
  const fs::path scored = ctx.scored_path(slot.split);
  const fs::path extended = ctx.extended_path(slot.split);
  if (fs::exists(scored)) return load_corpus(scored, slot.split);
  if (minimum == Stage::scored) {
    if (fs::exists(extended))
      throw FatalError("corpus not scored (" + scored.string() + " missing) - run `score` first");
    throw FatalError("corpus not generated or scored - run `generate` then `score` first");
  }
  if (fs::exists(extended)) return load_corpus(extended, slot.split);
  if (minimum == Stage::extended)
    throw FatalError("corpus not extended (" + extended.string() + " missing) - run `generate` first");
  std::cerr << "note: no pipeline intermediates found; reading raw corpus " << slot.input << "\n";
  return load_corpus(slot.input, slot.split);
}

double resolve_alpha(const Ctx& ctx) {
  if (ctx.cfg.alpha) return *ctx.cfg.alpha;
  const fs::path sweep_json = ctx.out / "sweep.json";
  std::ifstream in(sweep_json);
  if (!in)
    throw FatalError("alpha not determined - run `sweep` first or pass --alpha");
  json j;
  in >> j;
  return j.at("best_alpha").get<double>();
}

// ---------------------------------------------------------------------------
// Artifact writers

void write_selections(const fs::path& path, const std::vector<progres::UttSelection>& selections) {
  std::ostringstream buf;
  for (const auto& sel : selections) {
    ordered_json rec;
    rec["utt_id"] = sel.utt_id;
    rec["text"] = sel.text;
    rec["source"] = std::string(progres::to_string(sel.source));
    rec["alpha"] = sel.alpha ? ordered_json(*sel.alpha) : ordered_json(nullptr);
    rec["mode"] = std::string(progres::to_string(sel.mode));
    buf << rec.dump() << '\n';
  }
  write_text_file(path, buf.str());
}

void write_findings(const fs::path& path, const std::vector<progres::ContaminationFinding>& findings) {
  std::ostringstream buf;
  for (const auto& f : findings) buf << progres::finding_to_json(f).dump() << '\n';
  write_text_file(path, buf.str());
}

void write_per_utt_detail(const fs::path& path, const progres::WerReport& report) {
  std::ostringstream buf;
  for (const auto& [utt_id, c] : report.per_utt) {
    ordered_json rec;
    rec["utt_id"] = utt_id;
    rec["sub"] = c.subs;
    rec["del"] = c.dels;
    rec["ins"] = c.ins;
    rec["ref_len"] = c.ref_len;
    rec["wer"] = progres::utterance_wer(c);
    buf << rec.dump() << '\n';
  }
  write_text_file(path, buf.str());
}

// Recompute the corpus WER from persisted selections; guards every table
// cell against drift between selection and reporting.
double recompute_wer_from_selections(const std::vector<progres::UttSelection>& selections,
                                     const progres::Corpus& corpus, progres::NormPolicy policy) {
  std::vector<progres::EditCounts> counts;
  for (const auto& sel : selections) {
    const progres::NBestList* utt = corpus.find(sel.utt_id);
    if (!utt || !utt->reference) continue;
    counts.push_back(progres::align(progres::normalize_text(*utt->reference, policy),
                                    progres::normalize_text(sel.text, policy))
                         .second);
  }
  return progres::corpus_wer(counts);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(Ctx& ctx) {
  progres::ResponseCache cache(ctx.cfg.cache_dir);
  progres::LlmGateway gateway(ctx.cfg.generation, cache);

  for (const auto& slot : ctx.splits()) {
    progres::ParsedCorpus parsed = load_corpus(slot.input, slot.split);
    report_warnings(parsed);
    progres::Corpus& corpus = parsed.corpus;
    const std::size_t n = corpus.utterances.size();

    std::vector<std::string> prompts(n);
    for (std::size_t i = 0; i < n; ++i)
      prompts[i] = progres::build_prompt(corpus.utterances[i], ctx.cfg.prompt_template);

    std::size_t misses = 0;
    for (const auto& p : prompts)
      if (!cache.contains(gateway.generation_digest(p))) ++misses;
    if (misses > 0) gateway.probe_reachable();  // fatal when unreachable

    std::atomic<int> extended{0}, fallbacks{0};
    std::atomic<int> err_transport{0}, err_auth{0}, err_truncated{0}, err_other{0};
    std::vector<progres::NBestList> out(n);
    parallel_for(n, ctx.cfg.parallelism_limit, [&](std::size_t i) {
      out[i] = corpus.utterances[i];
      try {
        const progres::GenerationResult r = gateway.generate_correction(prompts[i]);
        if (r.extracted) {
          out[i] = progres::extend_with_generated(corpus.utterances[i], *r.extracted);
          if (out[i].hyps.size() > corpus.utterances[i].hyps.size())
            ++extended;
          else
            ++fallbacks;  // correction trimmed to nothing
        } else {
          ++fallbacks;
        }
      } catch (const progres::GatewayError& e) {
        switch (e.kind()) {
          case progres::GatewayErrorKind::transport: ++err_transport; break;
          case progres::GatewayErrorKind::auth: ++err_auth; break;
          case progres::GatewayErrorKind::truncated: ++err_truncated; break;
          default: ++err_other; break;
        }
        std::cerr << "warning: " << corpus.utterances[i].utt_id << ": generation failed ("
                  << progres::to_string(e.kind()) << "): " << e.what() << "\n";
      }
    });

    progres::Corpus result;
    result.split = slot.split;
    result.utterances = std::move(out);
    write_corpus(ctx.extended_path(slot.split), result);

    std::cerr << "generate[" << progres::to_string(slot.split) << "]: " << n << " utterances, "
              << extended << " extended, " << fallbacks << " fallbacks, errors"
              << " transport=" << err_transport << " auth=" << err_auth
              << " truncated=" << err_truncated << " other=" << err_other
              << "; network_requests=" << gateway.network_requests()
              << " cache_hits=" << gateway.cache_hits() << "\n";
  }
  return 0;
}

int cmd_score(Ctx& ctx) {
  progres::ResponseCache cache(ctx.cfg.cache_dir);
  progres::LlmGateway gateway(ctx.cfg.scoring, cache);

  for (const auto& slot : ctx.splits()) {
    progres::ParsedCorpus parsed = load_stage(ctx, slot, Stage::raw);
    progres::Corpus& corpus = parsed.corpus;
    const std::size_t n = corpus.utterances.size();

    std::size_t misses = 0;
    for (const auto& utt : corpus.utterances)
      for (const auto& h : utt.hyps)
        if (!cache.contains(gateway.scoring_digest(h.text))) ++misses;
    if (misses > 0) gateway.probe_reachable();

    std::atomic<int> scored{0}, failed{0};
    parallel_for(n, ctx.cfg.parallelism_limit, [&](std::size_t i) {
      auto& utt = corpus.utterances[i];
      try {
        for (auto& h : utt.hyps) {
          h.llm_score = gateway.score_sequence(h.text).total;
        }
        ++scored;
      } catch (const progres::GatewayError& e) {
        // Missing logprob support condemns the whole run, not one utterance.
        if (e.kind() == progres::GatewayErrorKind::config) throw;
        ++failed;
        std::cerr << "warning: " << utt.utt_id << ": scoring failed ("
                  << progres::to_string(e.kind()) << "): " << e.what() << "\n";
      }
    });

    write_corpus(ctx.scored_path(slot.split), corpus);
    std::cerr << "score[" << progres::to_string(slot.split) << "]: " << scored << "/" << n
              << " utterances scored, " << failed << " degraded"
              << "; network_requests=" << gateway.network_requests()
              << " cache_hits=" << gateway.cache_hits() << "\n";
  }
  return 0;
}

int cmd_sweep(Ctx& ctx) {
  if (!ctx.cfg.validation_corpus)
    throw FatalError("sweep requires a validation corpus in the config");
  const SplitSlot slot{progres::Split::validation, *ctx.cfg.validation_corpus};
  progres::ParsedCorpus parsed = load_stage(ctx, slot, Stage::scored);

  const auto grid = progres::default_alpha_grid();
  progres::AlphaSweepResult sweep;
  try {
    sweep = progres::line_search_alpha(parsed.corpus, grid, ctx.cfg.normalization);
  } catch (const std::invalid_argument& e) {
    throw FatalError(e.what());
  }

  write_text_file(ctx.out / "sweep.csv", progres::emit_sweep_curve(sweep));
  ordered_json j;
  j["best_alpha"] = sweep.best_alpha;
  j["best_wer"] = sweep.best_wer;
  ordered_json curve = ordered_json::array();
  for (const auto& [a, w] : sweep.grid) curve.push_back(ordered_json::array({a, w}));
  j["grid"] = curve;
  write_text_file(ctx.out / "sweep.json", j.dump(2) + "\n");

  std::cerr << "sweep: " << sweep.grid.size() << " grid points, best_alpha=" << sweep.best_alpha
            << " best_wer=" << sweep.best_wer << "\n";
  return 0;
}

struct ModeRun {
  progres::PipelineResult result;
  std::optional<double> alpha_used;
};

ModeRun run_mode(const Ctx& ctx, const progres::Corpus& corpus, progres::Mode mode) {
  progres::PipelineConfig pcfg;
  pcfg.mode = mode;
  pcfg.normalization = ctx.cfg.normalization;
  ModeRun run;
  if (mode == progres::Mode::progres) {
    pcfg.alpha = resolve_alpha(ctx);
    run.alpha_used = pcfg.alpha;
  }
  run.result = progres::run_pipeline(corpus, pcfg);
  return run;
}

int emit_mode_artifacts(const Ctx& ctx, const progres::Corpus& corpus, progres::Mode mode,
                        const ModeRun& run, bool per_utt) {
  const std::string mode_name{progres::to_string(mode)};
  write_selections(ctx.out / ("selections." + mode_name + ".jsonl"), run.result.selections);
  if (run.result.report) {
    write_text_file(ctx.out / ("report." + mode_name + ".json"),
                    run.result.report->summary_json().dump(2) + "\n");
    if (per_utt)
      write_per_utt_detail(ctx.out / ("per_utt." + mode_name + ".jsonl"), *run.result.report);
  }
  const bool probe_ready =
      corpus.split != progres::Split::unlabeled &&
      std::any_of(run.result.selections.begin(), run.result.selections.end(),
                  [](const progres::UttSelection& s) {
                    return s.source == progres::HypSource::prompt_addition;
                  });
  if (probe_ready) {
    const auto findings =
        progres::contamination_probe(run.result.selections, corpus, ctx.cfg.normalization);
    write_findings(ctx.out / ("findings." + mode_name + ".jsonl"), findings);
  }

  std::cerr << "rescore[" << mode_name << "]: " << run.result.selections.size() << " utterances";
  if (run.alpha_used) std::cerr << ", alpha=" << *run.alpha_used;
  if (run.result.report) std::cerr << ", corpus_wer=" << run.result.report->corpus_wer;
  std::cerr << ", degraded=" << run.result.degraded << ", fallbacks=" << run.result.fallbacks
            << "\n";
  return 0;
}

int cmd_rescore(Ctx& ctx, bool per_utt) {
  const SplitSlot slot = ctx.eval_slot();
  const progres::Mode mode = ctx.cfg.mode;
  const Stage need = (mode == progres::Mode::progres || mode == progres::Mode::llm_rescoring)
                         ? Stage::scored
                         : Stage::raw;
  progres::ParsedCorpus parsed = load_stage(ctx, slot, need);
  const ModeRun run = run_mode(ctx, parsed.corpus, mode);
  return emit_mode_artifacts(ctx, parsed.corpus, mode, run, per_utt);
}

int cmd_oracle(Ctx& ctx, bool per_utt) {
  const SplitSlot slot = ctx.eval_slot();
  progres::ParsedCorpus parsed = load_stage(ctx, slot, Stage::raw);
  for (const auto& utt : parsed.corpus.utterances)
    if (!utt.reference)
      throw FatalError("oracle requires references; utterance \"" + utt.utt_id + "\" has none");
  const ModeRun run = run_mode(ctx, parsed.corpus, progres::Mode::oracle);
  return emit_mode_artifacts(ctx, parsed.corpus, progres::Mode::oracle, run, per_utt);
}

int cmd_evaluate(Ctx& ctx) {
  const SplitSlot slot = ctx.eval_slot();
  const bool needs_scores =
      std::any_of(ctx.cfg.eval_modes.begin(), ctx.cfg.eval_modes.end(), [](progres::Mode m) {
        return m == progres::Mode::progres || m == progres::Mode::llm_rescoring;
      });
  progres::ParsedCorpus parsed = load_stage(ctx, slot, needs_scores ? Stage::scored : Stage::raw);
  const progres::Corpus& corpus = parsed.corpus;

  const bool has_additions =
      std::any_of(corpus.utterances.begin(), corpus.utterances.end(),
                  [](const progres::NBestList& u) { return u.prompt_addition() != nullptr; });
  const std::string config_name =
      has_additions
          ? "asr_nbest+prompt_" + std::string(progres::to_string(ctx.cfg.prompt_template))
          : "asr_nbest";

  int prompt_fallbacks = 0;
  for (const auto& u : corpus.utterances)
    if (!u.prompt_addition()) ++prompt_fallbacks;
  if (!has_additions) prompt_fallbacks = 0;  // nothing was ever prompted

  std::vector<progres::EvalRow> rows;
  std::vector<progres::ContaminationFinding> probe_findings;
  for (const progres::Mode mode : ctx.cfg.eval_modes) {
    const ModeRun run = run_mode(ctx, corpus, mode);
    if (!run.result.report)
      throw FatalError("evaluate requires references on the corpus");
    emit_mode_artifacts(ctx, corpus, mode, run, false);

    // Every cell must be reproducible from its persisted selections.
    const double recomputed =
        recompute_wer_from_selections(run.result.selections, corpus, ctx.cfg.normalization);
    if (recomputed != run.result.report->corpus_wer)
      throw FatalError("internal error: table cell does not match recomputation for mode " +
                       std::string(progres::to_string(mode)));

    progres::EvalRow row;
    row.config_name = config_name;
    row.mode = mode;
    row.corpus_wer = run.result.report->corpus_wer;
    row.n_utts = run.result.report->n_utts();
    row.prompt_fallbacks = prompt_fallbacks;
    row.cache_hits = 0;  // endpoint stages already ran; see stats.json
    rows.push_back(row);

    if (mode == progres::Mode::progres)
      probe_findings =
          progres::contamination_probe(run.result.selections, corpus, ctx.cfg.normalization);
  }

  const progres::EvalTable table = progres::build_table(rows);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";

  fs::path run_dir =
      ctx.out / ("eval-" + ctx.cfg.config_hash().substr(0, 8) + "-" + utc_compact_timestamp());
  for (int suffix = 2; fs::exists(run_dir); ++suffix)
    run_dir = fs::path(run_dir.string() + "-" + std::to_string(suffix));
  fs::create_directories(run_dir);

  write_text_file(run_dir / "table.txt", table.text);
  write_text_file(run_dir / "table.json", table.json.dump(2) + "\n");
  write_findings(run_dir / "findings.jsonl", probe_findings);
  ordered_json stats;
  stats["n_utts"] = static_cast<int>(corpus.utterances.size());
  stats["prompt_fallbacks"] = prompt_fallbacks;
  ordered_json mode_names = ordered_json::array();
  for (const progres::Mode m : ctx.cfg.eval_modes)
    mode_names.push_back(std::string(progres::to_string(m)));
  stats["modes"] = mode_names;
  write_text_file(run_dir / "stats.json", stats.dump(2) + "\n");

  std::cout << table.text;
  std::cerr << "evaluate: wrote " << run_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ProGRes: prompted generative rescoring for ASR n-best lists"};
  app.require_subcommand(1);

  struct Shared {
    std::string config_path;
    std::optional<double> alpha;
    std::optional<std::string> mode;
    std::optional<std::string> tmpl;
    std::optional<std::string> cache_dir;
    std::optional<std::string> out;
    bool per_utt = false;
  } shared;

  auto add_common = [&shared](CLI::App* sub, bool with_per_utt = false) {
    sub->add_option("--config", shared.config_path, "run configuration JSON")->required();
    sub->add_option("--alpha", shared.alpha, "interpolation weight in [0,1]; overrides the config");
    sub->add_option("--mode", shared.mode,
                    "baseline|prompt_only|llm_rescoring|progres|oracle; overrides the config");
    sub->add_option("--template", shared.tmpl, "primary|alternate; overrides the config");
    sub->add_option("--cache-dir", shared.cache_dir, "response cache directory override");
    sub->add_option("--out", shared.out, "output directory override");
    if (with_per_utt)
      sub->add_flag("--per-utt", shared.per_utt, "also write per-utterance WER detail");
  };

  CLI::App* generate = app.add_subcommand("generate", "extend corpora with prompted corrections");
  CLI::App* score = app.add_subcommand("score", "fill llm_score for every hypothesis");
  CLI::App* sweep = app.add_subcommand("sweep", "alpha grid search on the validation split");
  CLI::App* rescore = app.add_subcommand("rescore", "select output hypotheses at a fixed alpha");
  CLI::App* evaluate = app.add_subcommand("evaluate", "build the configuration grid table");
  CLI::App* oracle = app.add_subcommand("oracle", "lowest-WER selection (lower bound)");
  add_common(generate);
  add_common(score);
  add_common(sweep);
  add_common(rescore, true);
  add_common(evaluate);
  add_common(oracle, true);

  CLI11_PARSE(app, argc, argv);

  try {
    Ctx ctx;
    ctx.cfg = progres::RunConfig::load_file(shared.config_path);
    if (shared.alpha) {
      if (!(*shared.alpha >= 0.0 && *shared.alpha <= 1.0))
        throw FatalError("--alpha must lie in [0, 1]");
      ctx.cfg.alpha = *shared.alpha;
    }
    if (shared.mode) ctx.cfg.mode = progres::mode_from_string(*shared.mode);
    if (shared.tmpl) ctx.cfg.prompt_template = progres::prompt_template_from_string(*shared.tmpl);
    if (shared.cache_dir) ctx.cfg.cache_dir = *shared.cache_dir;
    if (shared.out) ctx.cfg.output_dir = *shared.out;
    ctx.cfg.resolve_api_keys();
    ctx.cfg.validate();
    ctx.out = ctx.cfg.output_dir;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw FatalError("cannot create output directory " + ctx.out.string());

    if (generate->parsed()) return cmd_generate(ctx);
    if (score->parsed()) return cmd_score(ctx);
    if (sweep->parsed()) return cmd_sweep(ctx);
    if (rescore->parsed()) return cmd_rescore(ctx, shared.per_utt);
    if (evaluate->parsed()) return cmd_evaluate(ctx);
    if (oracle->parsed()) return cmd_oracle(ctx, shared.per_utt);
    return 2;
  } catch (const progres::GatewayError& e) {
    std::cerr << "error (" << progres::to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
