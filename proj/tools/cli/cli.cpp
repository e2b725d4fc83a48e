#include "cli.hpp"

#include <algorithm>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "stancekit/error.hpp"

namespace stancekit::cli {
namespace {

void print_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

// First argument that is neither a global option nor its value.
std::optional<std::string> first_word(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--config" || a == "--set" || a == "--seed") {
      ++i;
    } else if (a.rfind("-", 0) != 0) {
      return a;
    }
  }
  return std::nullopt;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stance classification toolkit for migration tweets", "stancekit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> sets;
  std::uint64_t seed = 42;
  app.add_option("--config", config_file, "Pipeline settings file (YAML)")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override a pipeline setting, e.g. --set split.k=10")->allow_extra_args(false);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random choice (default 42)");

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Normalize, filter and deduplicate raw tweets");
  ingest_cmd->add_option("--in", ingest_args.in, "Raw records (JSONL)");
  ingest_cmd->add_option("--out", ingest_args.out, "Cleaned corpus (JSONL)");
  ingest_cmd->add_option("--stats", ingest_args.stats, "Corpus statistics report (JSON)");
  ingest_cmd->add_option("--lang", ingest_args.lang, "Language to keep (default en)");

  WeakLabelArgs wl_args;
  auto* wl_cmd = app.add_subcommand("weak-label", "Assign lexicon-based silver labels");
  wl_cmd->add_option("--in", wl_args.in, "Corpus (JSONL)");
  wl_cmd->add_option("--lexicon", wl_args.lexicon, "Lexicon (YAML)");
  wl_cmd->add_option("--out", wl_args.out, "Silver labels (JSONL)");
  wl_cmd->add_option("--abstain", wl_args.abstain, "Write abstained tweet ids here, one per line");
  wl_cmd->add_option("--threads", wl_args.threads);

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve-annotation", "Run the annotation service, or export gold labels");
  serve_cmd->add_option("--journal", serve_args.journal, "Task journal (created if missing)");
  serve_cmd->add_option("--silver", serve_args.silver, "Silver labels to turn into tasks");
  serve_cmd->add_option("--corpus", serve_args.corpus, "Corpus holding the tweet texts");
  serve_cmd->add_option("--required", serve_args.required, "Annotators per task (default 2)");
  serve_cmd->add_option("--host", serve_args.host);
  serve_cmd->add_option("--port", serve_args.port, "0 picks a free port");
  serve_cmd->add_option("--static", serve_args.static_dir, "UI assets to serve at /");
  serve_cmd->add_option("--export-gold", serve_args.export_gold, "Finalize the journal into gold records and exit");
  serve_cmd->add_option("--agreement", serve_args.agreement, "With --export-gold: agreement report (JSON)");
  serve_cmd->add_flag("--allow-partial", serve_args.allow_partial, "Export even when tasks are unfinished");

  ZeroShotArgs zs_args;
  auto* zs_cmd = app.add_subcommand("zeroshot", "Classify with an NLI model and label descriptions");
  zs_cmd->add_option("--gold", zs_args.gold, "Gold records to classify");
  zs_cmd->add_option("--backend", zs_args.backend, "mock, an http:// scoring URL, or a score table");
  zs_cmd->add_option("--strategy", zs_args.strategy, "Tag set: single, double or multi");
  zs_cmd->add_option("--template", zs_args.templ, "Hypothesis template containing {tag}");
  zs_cmd->add_option("--aggregation", zs_args.aggregation, "mean or max over a class's tags");
  zs_cmd->add_option("--subset", zs_args.subset, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
  zs_cmd->add_option("--split", zs_args.split, "Split file (default: split the gold set)");
  zs_cmd->add_option("--out", zs_args.out, "Predictions (JSONL)");
  zs_cmd->add_option("--report", zs_args.report, "Evaluation report (JSON)");
  zs_cmd->add_option("--summary", zs_args.summary, "Result row for `report` (TSV)");
  zs_cmd->add_option("--threads", zs_args.threads);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier on the training split");
  train_cmd->add_option("--gold", train_args.gold, "Gold records");
  train_cmd->add_option("--arch", train_args.arch, "cnn_embed, bilstm_embed, bert, roberta, bert_cnn_layerwise, bert_cnn_final");
  train_cmd->add_option("--lr", train_args.learning_rate);
  train_cmd->add_option("--batch-size", train_args.batch_size);
  train_cmd->add_option("--dropout", train_args.dropout);
  auto* epochs_opt = train_cmd->add_option("--epochs", train_args.epochs);
  train_cmd->add_option("--encoder", train_args.encoder, "Encoder .skt file or name in $STANCEKIT_MODEL_CACHE, or mock");
  train_cmd->add_option("--embedding", train_args.embedding, "Embedding .vec file, mock or mock:DIM");
  train_cmd->add_option("--precision", train_args.precision, "float or double");
  train_cmd->add_flag("--freeze-encoder", train_args.freeze_encoder);
  train_cmd->add_option("--mode", train_args.mode, "split: fit and score the test set; cv: k-fold on the training split")
      ->check(CLI::IsMember({"split", "cv"}));
  train_cmd->add_option("--split", train_args.split, "Split file (default: split the gold set)");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path");
  train_cmd->add_option("--history", train_args.history, "Per-epoch history (JSON)");
  train_cmd->add_option("--predictions", train_args.predictions, "Test-set predictions (JSONL)");
  train_cmd->add_option("--report", train_args.report, "Evaluation report (JSON)");
  train_cmd->add_option("--summary", train_args.summary, "Result row for `report` (TSV)");
  train_cmd->add_option("--threads", train_args.threads);

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions (or a checkpoint) against gold labels");
  eval_cmd->add_option("--pred", eval_args.pred, "Predictions (JSONL)");
  eval_cmd->add_option("--model", eval_args.model, "Checkpoint to predict with instead of --pred");
  eval_cmd->add_option("--gold", eval_args.gold, "Gold records");
  eval_cmd->add_option("--subset", eval_args.subset, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
  eval_cmd->add_option("--split", eval_args.split);
  eval_cmd->add_option("--pred-out", eval_args.pred_out, "With --model: write the predictions here");
  eval_cmd->add_option("--out", eval_args.out, "Evaluation report (JSON)");
  eval_cmd->add_option("--errors", eval_args.errors, "Misclassification report (JSON)");
  eval_cmd->add_option("--max-cases", eval_args.max_cases, "Cases per error cell (default 5)");
  eval_cmd->add_option("--bootstrap", eval_args.bootstrap, "Resamples for the F1 interval, 0 to skip (default 1000)");
  eval_cmd->add_option("--summary", eval_args.summary, "Result row for `report` (TSV)");
  eval_cmd->add_option("--threads", eval_args.threads);

  GridArgs grid_args;
  auto* grid_cmd = app.add_subcommand("grid", "Train and score every cell of a hyperparameter grid");
  grid_cmd->add_option("--gold", grid_args.gold, "Gold records");
  grid_cmd->add_option("--manifest", grid_args.manifest, "Grid manifest (default config/grid.yaml)");
  grid_cmd->add_option("--out-dir", grid_args.out_dir, "Cell results, summary.tsv and report.md");
  grid_cmd->add_option("--split", grid_args.split);
  grid_cmd->add_option("--override", grid_args.overrides, "Model setting for every cell, e.g. epochs=3")->allow_extra_args(false);
  grid_cmd->add_option("--jobs", grid_args.jobs, "Cells trained at once");
  grid_cmd->add_flag("--force", grid_args.force, "Rerun cells that already have results");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Merge result tables and add the published reference rows");
  report_cmd->add_option("--in", report_args.inputs, "Result tables (TSV); default: the grid summary")->allow_extra_args(false);
  report_cmd->add_option("--out", report_args.out, "Markdown report");
  report_cmd->add_option("--tsv", report_args.tsv, "Also write the merged table as TSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return 0;
    }
    const auto word = first_word(args);
    if (word && !app.get_subcommand_no_throw(*word)) {
      err << "error: unknown subcommand '" << *word << "'\n\n" << app.help();
    } else {
      err << "error: " << e.what() << "\n\n" << (word ? app.get_subcommand(*word)->help() : app.help());
    }
    return 2;
  }

  try {
    std::optional<std::filesystem::path> config;
    if (!config_file.empty()) config = config_file;
    std::optional<std::uint64_t> seed_override;
    if (seed_opt->count() > 0) seed_override = seed;
    const Pipeline pipeline = Pipeline::load(config, sets, seed_override);
    train_args.epochs_given = epochs_opt->count() > 0;

    if (*ingest_cmd) return ingest(pipeline, ingest_args, out);
    if (*wl_cmd) return weak_label(pipeline, wl_args, out);
    if (*serve_cmd) return serve_annotation(pipeline, serve_args, out);
    if (*zs_cmd) return zeroshot(pipeline, zs_args, out);
    if (*train_cmd) return train(pipeline, train_args, out);
    if (*eval_cmd) return evaluate(pipeline, eval_args, out);
    if (*grid_cmd) return grid(pipeline, grid_args, out);
    if (*report_cmd) return report(pipeline, report_args, out);
  } catch (const Error& e) {
    print_error(err, to_string(e.code()), e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    print_error(err, to_string(ErrorCode::kIo), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal_error", e.what());
    return 1;
  }
  return 2;
}

}  // namespace stancekit::cli
