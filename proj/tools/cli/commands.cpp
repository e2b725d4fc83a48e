#include "commands.hpp"

#include <csignal>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "stancekit/annotation_service.hpp"
#include "stancekit/config_file.hpp"
#include "stancekit/corpus.hpp"
#include "stancekit/error.hpp"
#include "stancekit/eval.hpp"
#include "stancekit/jsonl.hpp"
#include "stancekit/models/grid.hpp"
#include "stancekit/models/model.hpp"
#include "stancekit/report.hpp"
#include "stancekit/weak_label.hpp"
#include "stancekit/zeroshot.hpp"

namespace stancekit::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_json(const fs::path& path, const json& doc) { jsonl::write_text_atomic(path, doc.dump(2) + "\n"); }

unsigned threads_or(unsigned flag, const Pipeline& p) {
  if (flag > 0) return flag;
  const auto& v = p.at("threads");
  return v.is_number() ? std::max(1u, v.get<unsigned>()) : 1u;
}

std::string or_setting(const std::string& flag, const Pipeline& p, std::string_view key) {
  return flag.empty() ? p.text(key) : flag;
}

std::vector<annotation::GoldExample> subset(const Pipeline& p, std::vector<annotation::GoldExample> gold,
                                            const std::string& which, const std::string& split_file) {
  if (which == "all") return gold;
  const auto split = p.split(gold, split_file);
  const auto& ids = which == "test" ? split.test_ids : split.train_ids;
  std::unordered_set<std::string> keep(ids.begin(), ids.end());
  std::vector<annotation::GoldExample> out;
  for (auto& g : gold) {
    if (keep.count(g.tweet_id)) out.push_back(std::move(g));
  }
  return out;
}

// A one-section results file that `report` can merge.
void write_summary(const fs::path& path, std::string name, std::string title, const eval::TableRow& row) {
  const report::Section section{std::move(name), std::move(title), {row}};
  jsonl::write_text_atomic(path, report::render_tsv(std::span(&section, 1), report::utc_timestamp()));
}

void write_error_report(const fs::path& path, std::span<const annotation::GoldExample> gold,
                        std::span<const eval::Prediction> predictions, std::size_t max_cases) {
  write_json(path, eval::to_json(eval::error_report(gold, predictions, max_cases)));
}

eval::EvalResult score(std::span<const annotation::GoldExample> gold, std::span<const eval::Prediction> predictions,
                       std::size_t bootstrap, std::uint64_t seed) {
  eval::EvalResult result = eval::evaluate(gold, predictions);
  if (bootstrap > 0) {
    const auto aligned = eval::align(gold, predictions);
    result.ci_f1 =
        eval::bootstrap_ci(aligned.y_true, aligned.y_pred, eval::Metric::kF1Weighted, bootstrap, 0.95, seed);
  }
  return result;
}

std::string section_for(models::Architecture arch) {
  return models::uses_encoder(arch) ? "transformer" : "static_embedding";
}
std::string title_for(models::Architecture arch) {
  return models::uses_encoder(arch) ? "Transformers" : "Static embeddings";
}

bool has_labels(std::span<const annotation::GoldExample> gold) {
  for (const auto& g : gold) {
    if (!g.excluded && g.label) return true;
  }
  return false;
}

}  // namespace

int ingest(const Pipeline& p, const IngestArgs& a, std::ostream& out) {
  const auto in = p.path(a.in, "paths.raw", "--in");
  const auto dest = p.path(a.out, "paths.corpus", "--out");
  corpus::IngestOptions options;
  options.language = a.lang.empty() ? p.text("ingest.language") : a.lang;
  if (options.language.empty()) options.language = "en";

  auto result = corpus::ingest(corpus::read_records(in), options);
  corpus::write_records(dest, result.records);
  if (auto stats = p.optional_path(a.stats, "paths.stats")) {
    write_json(*stats, {{"input_count", result.input_count},
                        {"dropped_empty", result.dropped_empty},
                        {"dropped_language", result.dropped_language},
                        {"stats", corpus::to_json(result.stats)}});
  }
  out << "ingested " << result.records.size() << " of " << result.input_count << " records (duplicates removed: "
      << result.stats.dedup_removed_fraction << ")\n";
  return 0;
}

int weak_label(const Pipeline& p, const WeakLabelArgs& a, std::ostream& out) {
  const auto in = p.path(a.in, "paths.corpus", "--in");
  const auto lexicon_path = p.path(a.lexicon, "paths.lexicon", "--lexicon");
  const auto dest = p.path(a.out, "paths.silver", "--out");
  const auto lexicon = weak_label::load_lexicon(lexicon_path);
  const auto labeled = weak_label::label_corpus(corpus::read_records(in), lexicon, threads_or(a.threads, p));

  std::vector<json> rows;
  for (const auto& s : labeled.silver) rows.push_back(weak_label::to_json(s));
  jsonl::write(dest, rows);
  if (!a.abstain.empty()) {
    std::string text;
    for (const auto& id : labeled.abstain_queue) text += id + "\n";
    jsonl::write_text_atomic(a.abstain, text);
  }
  out << "labeled " << labeled.silver.size() << " records, " << labeled.abstain_queue.size() << " abstained\n";
  return 0;
}

namespace {
annotation::AnnotationService* g_service = nullptr;
extern "C" void stop_service(int) {
  if (g_service) g_service->stop();
}
}  // namespace

int serve_annotation(const Pipeline& p, const ServeArgs& a, std::ostream& out) {
  const auto journal = p.path(a.journal, "paths.journal", "--journal");
  const auto lease = std::chrono::minutes(p.at("annotation.lease_minutes").get<int>());
  annotation::AnnotationStore store(journal, lease);

  if (auto silver_path = p.optional_path(a.silver, "paths.silver"); silver_path && a.export_gold.empty()) {
    const auto corpus_path = p.path(a.corpus, "paths.corpus", "--corpus");
    std::unordered_map<std::string, std::string> texts;
    for (auto& r : corpus::read_records(corpus_path)) texts.emplace(r.id, std::move(r.text));
    std::vector<weak_label::SilverLabel> silver;
    jsonl::for_each(*silver_path, [&](const json& row, std::size_t) { silver.push_back(weak_label::silver_from_json(row)); });
    const std::size_t required = a.required > 0 ? a.required : p.at("annotation.required_annotators").get<std::size_t>();
    const auto added = store.add_tasks(annotation::create_tasks(silver, texts, required));
    out << "added " << added << " tasks (" << store.size() << " total)\n";
  }

  if (!a.export_gold.empty()) {
    const auto result = store.finalize(a.allow_partial);
    annotation::write_gold(a.export_gold, result.gold);
    json kappa = json::array();
    for (const auto& pair : result.kappa_report) {
      kappa.push_back({{"annotator_a", pair.annotator_a},
                       {"annotator_b", pair.annotator_b},
                       {"co_labeled", pair.co_labeled},
                       {"kappa", pair.kappa ? json(*pair.kappa) : json()}});
    }
    const json summary = {{"gold", result.gold.size()},
                          {"adjudication_queue", result.adjudication_queue},
                          {"agreement", kappa}};
    if (!a.agreement.empty()) write_json(a.agreement, summary);
    out << summary.dump() << "\n";
    return 0;
  }

  annotation::AnnotationService::Options options;
  if (!a.static_dir.empty()) options.static_dir = a.static_dir;
  annotation::AnnotationService service(store, options);
  const std::string host = a.host.empty() ? p.text("annotation.host") : a.host;
  const int port = a.port >= 0 ? a.port : p.at("annotation.port").get<int>();
  const int bound = port == 0 ? service.bind_any_port(host) : port;
  if (bound < 0) fail(ErrorCode::kIo, "cannot bind " + host);
  g_service = &service;
  std::signal(SIGINT, stop_service);
  std::signal(SIGTERM, stop_service);
  out << "serving " << store.size() << " tasks on http://" << host << ":" << bound << std::endl;
  const bool ok = port == 0 ? service.listen_after_bind() : service.listen(host, port);
  g_service = nullptr;
  if (!ok) fail(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

int zeroshot(const Pipeline& p, const ZeroShotArgs& a, std::ostream& out) {
  const auto gold_path = p.path(a.gold, "paths.gold", "--gold");
  const auto dest = p.path(a.out, "paths.zeroshot_predictions", "--out");

  zeroshot::Config config;
  const auto strategy = or_setting(a.strategy, p, "zeroshot.strategy");
  const auto tag_set = zeroshot::parse_tag_set(strategy);
  if (!tag_set) fail(ErrorCode::kConfig, "unknown strategy " + strategy + " (single, double or multi)");
  config.tag_set = *tag_set;
  config.hypothesis_template = or_setting(a.templ, p, "zeroshot.template");
  zeroshot::hypothesis(config.hypothesis_template, "x");
  const auto aggregation = or_setting(a.aggregation, p, "zeroshot.aggregation");
  const auto parsed = zeroshot::parse_aggregation(aggregation);
  if (!parsed) fail(ErrorCode::kConfig, "unknown aggregation " + aggregation);
  config.aggregation = *parsed;
  config.threads = threads_or(a.threads, p);

  const auto gold = subset(p, annotation::read_gold(gold_path), a.subset, a.split);
  const auto backend_spec = or_setting(a.backend, p, "zeroshot.backend");
  auto backend = zeroshot::make_backend(backend_spec, p.seed());
  const auto predictions = zeroshot::predict(gold, config, *backend);
  eval::write_predictions(dest, predictions);
  out << "scored " << predictions.size() << " texts with " << backend->name() << "\n";

  if (has_labels(gold) && (!a.report.empty() || !a.summary.empty())) {
    const auto result = score(gold, predictions, 1000, p.seed());
    if (!a.report.empty()) {
      write_json(a.report, {{"backend", backend_spec},
                            {"strategy", strategy},
                            {"template", config.hypothesis_template},
                            {"aggregation", aggregation},
                            {"evaluation", eval::to_json(result)}});
    }
    if (!a.summary.empty()) {
      auto row = eval::table_row(result, backend_spec, "-", "-", "-", strategy);
      write_summary(a.summary, "zero_shot", "Zero-shot NLI", row);
    }
    out << "weighted F1 " << result.f1_weighted << "\n";
  }
  return 0;
}

int train(const Pipeline& p, const TrainArgs& a, std::ostream& out) {
  const auto gold_path = p.path(a.gold, "paths.gold", "--gold");

  json settings = p.at("model").is_object() ? p.at("model") : json::object();
  if (!a.arch.empty()) settings["architecture"] = a.arch;
  const auto arch_name = settings.value("architecture", std::string());
  const auto arch = models::parse_architecture(arch_name);
  if (!arch) fail(ErrorCode::kConfig, "unknown architecture '" + arch_name + "'");
  const json known = models::to_json(models::default_config(*arch));
  for (const auto& [key, value] : settings.items()) {
    if (!known.contains(key)) fail(ErrorCode::kConfig, "unknown model setting '" + key + "'");
  }
  if (a.learning_rate > 0) settings["learning_rate"] = a.learning_rate;
  if (a.dropout >= 0) settings["dropout"] = a.dropout;
  if (a.batch_size > 0) settings["batch_size"] = a.batch_size;
  if (a.epochs_given) settings["epochs"] = a.epochs;
  if (!a.encoder.empty()) settings["encoder_name"] = a.encoder;
  if (!a.embedding.empty()) settings["embedding_name"] = a.embedding;
  if (!a.precision.empty()) settings["precision"] = a.precision;
  if (a.freeze_encoder) settings["freeze_encoder"] = true;
  settings["seed"] = p.seed();
  const models::ModelConfig config = models::model_config_from_json(settings);
  config.validate();
  for (const auto& v : config.grid_violations()) out << "note: " << v << "\n";

  const auto gold = annotation::read_gold(gold_path);
  const auto split = p.split(gold, a.split);
  std::unordered_set<std::string> train_ids(split.train_ids.begin(), split.train_ids.end());
  std::vector<annotation::GoldExample> train_gold, test_gold;
  for (const auto& g : gold) {
    if (train_ids.count(g.tweet_id)) train_gold.push_back(g);
  }
  std::unordered_set<std::string> test_ids(split.test_ids.begin(), split.test_ids.end());
  for (const auto& g : gold) {
    if (test_ids.count(g.tweet_id)) test_gold.push_back(g);
  }

  const auto row_for = [&](eval::TableRow row) {
    row.model = std::string(models::to_string(config.architecture));
    row.learning_rate = models::format_number(config.learning_rate);
    row.batch_size = std::to_string(config.batch_size);
    row.dropout = models::format_number(config.dropout);
    return row;
  };

  if (a.mode == "cv") {
    const auto cv = models::cross_validate_model(config, train_gold, split.folds, threads_or(a.threads, p));
    if (!a.report.empty()) write_json(a.report, {{"config", models::to_json(config)}, {"cross_validation", eval::to_json(cv)}});
    if (!a.summary.empty()) {
      eval::TableRow row;
      row.precision = cv.precision.mean;
      row.recall = cv.recall.mean;
      row.f1 = cv.f1.mean;
      row.auc = cv.auc.mean;
      write_summary(a.summary, section_for(config.architecture), title_for(config.architecture), row_for(row));
    }
    out << "cross-validated F1 " << cv.f1.mean << " +/- " << cv.f1.stddev << " over " << cv.folds.size()
        << " folds\n";
    return 0;
  }
  if (a.mode != "split") fail(ErrorCode::kConfig, "--mode must be split or cv");

  const fs::path checkpoint =
      !a.out.empty() ? fs::path(a.out) : p.path("", "paths.checkpoints", "--out") / (arch_name + ".skt");
  auto sets = models::hold_out_validation(models::labeled(train_gold), config, 100);
  models::Model model = models::Model::create(config);
  model.fit(sets.train, sets.validation, [&](const models::EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << r.train_loss << " acc " << r.train_accuracy;
    if (r.validation_f1) out << " val_f1 " << *r.validation_f1;
    out << "\n";
  });
  model.save(checkpoint);
  if (!a.history.empty()) write_json(a.history, models::to_json(model.history()));
  if (!model.skipped_ids().empty()) out << "skipped " << model.skipped_ids().size() << " texts too short to use\n";
  out << "saved " << checkpoint.string() << "\n";

  if (test_gold.empty()) return 0;
  std::vector<models::TextItem> items;
  for (const auto& g : test_gold) items.push_back({g.tweet_id, g.text});
  const auto predictions = model.predict(items, threads_or(a.threads, p));
  if (!a.predictions.empty()) eval::write_predictions(a.predictions, predictions);
  const auto result = score(test_gold, predictions, 1000, p.seed());
  if (!a.report.empty()) {
    write_json(a.report, {{"config", models::to_json(config)},
                          {"history", models::to_json(model.history())},
                          {"evaluation", eval::to_json(result)}});
  }
  if (!a.summary.empty()) {
    write_summary(a.summary, section_for(config.architecture), title_for(config.architecture),
                  row_for(eval::table_row(result, "", "", "", "")));
  }
  out << "test weighted F1 " << result.f1_weighted << " on " << result.n << " examples\n";
  return 0;
}

int evaluate(const Pipeline& p, const EvaluateArgs& a, std::ostream& out) {
  const auto gold_path = p.path(a.gold, "paths.gold", "--gold");
  const auto gold = subset(p, annotation::read_gold(gold_path), a.subset, a.split);
  if (a.pred.empty() == a.model.empty()) fail(ErrorCode::kConfig, "give exactly one of --pred and --model");

  std::vector<eval::Prediction> predictions;
  std::string model_name = "predictions";
  if (!a.pred.empty()) {
    predictions = eval::read_predictions(a.pred);
  } else {
    const auto model = models::Model::load(models::resolve_model_file(a.model));
    std::vector<models::TextItem> items;
    for (const auto& g : gold) {
      if (!g.excluded) items.push_back({g.tweet_id, g.text});
    }
    predictions = model.predict(items, threads_or(a.threads, p));
    if (!a.pred_out.empty()) eval::write_predictions(a.pred_out, predictions);
    model_name = std::string(models::to_string(model.config().architecture));
  }

  const auto result = score(gold, predictions, a.bootstrap, p.seed());
  if (!a.out.empty()) write_json(a.out, eval::to_json(result));
  if (!a.errors.empty()) write_error_report(a.errors, gold, predictions, a.max_cases);
  if (!a.summary.empty()) {
    write_summary(a.summary, "evaluation", "Evaluation", eval::table_row(result, model_name, "-", "-", "-"));
  }
  out << eval::tsv_header() << "\n" << eval::to_tsv(eval::table_row(result, model_name, "-", "-", "-")) << "\n";
  return 0;
}

int grid(const Pipeline& p, const GridArgs& a, std::ostream& out) {
  const auto gold_path = p.path(a.gold, "paths.gold", "--gold");
  const auto manifest_path = p.path(a.manifest, "grid.manifest", "--manifest");
  const fs::path out_dir = p.path(a.out_dir, "grid.out_dir", "--out-dir");

  std::vector<std::string> overrides;
  if (p.at("grid.overrides").is_array()) {
    for (const auto& o : p.at("grid.overrides")) overrides.push_back(o.get<std::string>());
  }
  overrides.insert(overrides.end(), a.overrides.begin(), a.overrides.end());
  const auto grid = models::expand_grid(load_config(manifest_path), overrides, p.seed());

  const auto gold = annotation::read_gold(gold_path);
  const auto split = p.split(gold, a.split);

  models::GridRunOptions options;
  options.cells_dir = out_dir / "cells";
  options.jobs = a.jobs > 0 ? a.jobs : p.at("grid.jobs").get<unsigned>();
  options.force = a.force;
  options.on_cell = [&](const models::CellOutcome& o) {
    static constexpr const char* kState[] = {"ran", "cached", "FAILED"};
    out << kState[static_cast<int>(o.state)] << "\t" << o.id;
    if (o.state == models::CellOutcome::State::kFailed) {
      out << "\t" << o.error;
    } else {
      out << "\tF1 " << o.row.f1;
    }
    out << std::endl;
  };
  const auto outcomes = models::run_grid(grid, gold, split, options);

  const auto sections = report::with_reference(models::grid_sections(grid, outcomes));
  const auto stamp = report::utc_timestamp();
  jsonl::write_text_atomic(out_dir / "summary.tsv", report::render_tsv(sections, stamp));
  jsonl::write_text_atomic(out_dir / "report.md", report::render_markdown(sections, stamp));

  std::vector<std::string> failed;
  for (const auto& o : outcomes) {
    if (o.state == models::CellOutcome::State::kFailed) failed.push_back(o.id + " (" + o.error + ")");
  }
  out << "wrote " << (out_dir / "summary.tsv").string() << "\n";
  if (!failed.empty()) {
    std::string list;
    for (const auto& f : failed) list += (list.empty() ? "" : "; ") + f;
    fail(ErrorCode::kIncomplete, std::to_string(failed.size()) + " of " + std::to_string(outcomes.size()) +
                                     " grid cells failed: " + list);
  }
  return 0;
}

int report(const Pipeline& p, const ReportArgs& a, std::ostream& out) {
  std::vector<std::string> inputs = a.inputs;
  if (inputs.empty()) inputs.push_back((fs::path(p.text("grid.out_dir")) / "summary.tsv").string());
  const fs::path dest = !a.out.empty() ? fs::path(a.out) : p.path("", "paths.reports", "--out") / "report.md";

  // Merge sections by name in first-seen order; reference rows are added
  // back once at the end.
  std::vector<report::Section> merged;
  std::map<std::string, std::size_t> index;
  for (const auto& input : inputs) {
    for (auto& section : report::parse_tsv_report(jsonl::read_text(input))) {
      auto [it, inserted] = index.emplace(section.name, merged.size());
      if (inserted) merged.push_back({section.name, section.title, {}});
      for (auto& row : section.rows) {
        if (row.status != report::kReferenceStatus) merged[it->second].rows.push_back(std::move(row));
      }
    }
  }
  const auto sections = report::with_reference(std::move(merged));
  const auto stamp = report::utc_timestamp();
  jsonl::write_text_atomic(dest, report::render_markdown(sections, stamp));
  if (!a.tsv.empty()) jsonl::write_text_atomic(a.tsv, report::render_tsv(sections, stamp));
  out << "wrote " << dest.string() << "\n";
  return 0;
}

}  // namespace stancekit::cli
