#include "stancekit/models/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "stancekit/config_file.hpp"
#include "stancekit/error.hpp"
#include "stancekit/jsonl.hpp"
#include "stancekit/models/model.hpp"

namespace stancekit::models {
namespace {

using nlohmann::json;

// Axes listed here come first, in this order, so cell ids and rows follow
// the layout of the published tables.
constexpr std::string_view kAxisOrder[] = {"batch_size", "learning_rate", "dropout"};

std::string axis_label(const std::string& key) {
  if (key == "batch_size") return "bs";
  if (key == "learning_rate") return "lr";
  if (key == "dropout") return "do";
  return key + "=";
}

std::string value_text(const json& v) {
  if (v.is_number_float()) return format_number(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void merge_settings(json& target, const json& source, const std::string& where) {
  if (source.is_null()) return;
  if (!source.is_object()) fail(ErrorCode::kConfig, where + " must be a mapping");
  for (const auto& [key, value] : source.items()) target[key] = value;
}

void check_keys(const json& settings, const json& known, const std::string& where) {
  for (const auto& [key, value] : settings.items()) {
    if (!known.contains(key)) fail(ErrorCode::kConfig, "unknown model setting '" + key + "' in " + where);
  }
}

std::vector<std::string> ordered_axes(const json& axes) {
  std::vector<std::string> keys;
  for (auto k : kAxisOrder) {
    if (axes.contains(std::string(k))) keys.emplace_back(k);
  }
  for (const auto& [key, value] : axes.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  return keys;
}

std::vector<json> as_list(const json& node, const std::string& where) {
  if (node.is_null()) return {};
  if (!node.is_array()) return {node};
  if (node.empty()) fail(ErrorCode::kConfig, where + " must not be empty");
  return node.get<std::vector<json>>();
}

void expand_supervised(const json& table, const GridTable& info, const json& global_base,
                       std::span<const std::string> overrides, std::optional<std::uint64_t> seed,
                       std::vector<GridCell>& cells) {
  const std::string where = "table " + info.name;
  const auto architectures = as_list(table.value("architectures", json()), where + " architectures");
  if (architectures.empty()) fail(ErrorCode::kConfig, where + " lists no architectures");
  const json axes = table.value("axes", json::object());
  if (!axes.is_object()) fail(ErrorCode::kConfig, where + " axes must be a mapping");
  const auto axis_keys = ordered_axes(axes);

  for (const auto& arch_node : architectures) {
    const auto name = arch_node.is_string() ? arch_node.get<std::string>() : arch_node.dump();
    const auto arch = parse_architecture(name);
    if (!arch) fail(ErrorCode::kConfig, "unknown architecture " + name + " in " + where);
    const json known = to_json(default_config(*arch));

    json base = known;
    json layered = json::object();
    merge_settings(layered, global_base, "base");
    merge_settings(layered, table.value("base", json()), where + " base");
    for (const auto& o : overrides) apply_override(layered, o);
    check_keys(layered, known, where);
    base.update(layered);
    base["architecture"] = name;

    // Cartesian product over the axes, last axis varying fastest.
    std::vector<std::vector<json>> values;
    for (const auto& key : axis_keys) {
      if (!known.contains(key) || key == "architecture") {
        fail(ErrorCode::kConfig, "unknown axis '" + key + "' in " + where);
      }
      values.push_back(as_list(axes[key], where + " axis " + key));
    }
    std::vector<std::size_t> index(values.size(), 0);
    while (true) {
      json settings = base;
      std::string id = name;
      for (std::size_t a = 0; a < values.size(); ++a) {
        settings[axis_keys[a]] = values[a][index[a]];
        id += "-" + axis_label(axis_keys[a]) + value_text(values[a][index[a]]);
      }
      if (seed) settings["seed"] = *seed;
      ModelConfig config = model_config_from_json(settings);
      config.validate();
      cells.push_back({id, info.name, config, std::nullopt});

      std::size_t a = values.size();
      while (a > 0) {
        if (++index[a - 1] < values[a - 1].size()) break;
        index[a - 1] = 0;
        --a;
      }
      if (a == 0) break;
    }
  }
}

void expand_zeroshot(const json& table, const GridTable& info, std::vector<GridCell>& cells) {
  const std::string where = "table " + info.name;
  const auto backends = as_list(table.value("backends", json()), where + " backends");
  if (backends.empty()) fail(ErrorCode::kConfig, where + " lists no backends");
  auto tag_sets = as_list(table.value("tag_sets", json::array({"single", "double", "multi"})), where + " tag_sets");

  zeroshot::Config base;
  base.hypothesis_template = table.value("template", base.hypothesis_template);
  zeroshot::hypothesis(base.hypothesis_template, "x");  // validates the placeholder
  const auto aggregation = table.value("aggregation", std::string("mean"));
  const auto parsed = zeroshot::parse_aggregation(aggregation);
  if (!parsed) fail(ErrorCode::kConfig, "unknown aggregation " + aggregation + " in " + where);
  base.aggregation = *parsed;

  for (const auto& backend : backends) {
    if (!backend.is_object() || !backend.contains("name") || !backend.contains("spec")) {
      fail(ErrorCode::kConfig, where + " backends need a name and a spec");
    }
    for (const auto& tag_node : tag_sets) {
      const auto tag_name = tag_node.get<std::string>();
      const auto tag_set = zeroshot::parse_tag_set(tag_name);
      if (!tag_set) fail(ErrorCode::kConfig, "unknown tag set " + tag_name + " in " + where);
      ZeroShotCell cell{backend["name"].get<std::string>(), backend["spec"].get<std::string>(), base};
      cell.config.tag_set = *tag_set;
      cells.push_back({"zs-" + cell.backend_name + "-" + tag_name, info.name, std::nullopt, cell});
    }
  }
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string data_digest(std::span<const annotation::GoldExample> gold, const annotation::DatasetSplit& split) {
  std::uint64_t h = fnv1a(annotation::to_json(split).dump());
  for (const auto& g : gold) h = fnv1a(annotation::to_json(g).dump(), h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<annotation::GoldExample> select(std::span<const annotation::GoldExample> gold,
                                            std::span<const std::string> ids) {
  std::unordered_map<std::string_view, const annotation::GoldExample*> by_id;
  for (const auto& g : gold) by_id.emplace(g.tweet_id, &g);
  std::vector<annotation::GoldExample> out;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      missing.push_back(id);
    } else {
      out.push_back(*it->second);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    fail(ErrorCode::kValidation, std::to_string(missing.size()) + " split ids are not in the gold set: " + list);
  }
  return out;
}

eval::TableRow cv_row(const eval::CvResult& cv) {
  eval::TableRow row;
  row.precision = cv.precision.mean;
  row.recall = cv.recall.mean;
  row.f1 = cv.f1.mean;
  const bool all_auc = std::all_of(cv.folds.begin(), cv.folds.end(),
                                   [](const eval::EvalResult& r) { return r.auc_ovr_weighted.has_value(); });
  if (all_auc && !cv.folds.empty()) row.auc = cv.auc.mean;
  return row;
}

struct CellRun {
  eval::TableRow row;
  json result;
};

CellRun run_cell(const GridCell& cell, GridMode mode, std::span<const annotation::GoldExample> gold,
                 const annotation::DatasetSplit& split) {
  const auto train_gold = select(gold, split.train_ids);
  CellRun out;

  // Split mode: score the test-set predictions, with a bootstrap CI on F1.
  auto evaluate_split = [&](const std::vector<eval::Prediction>& predictions,
                            const std::vector<annotation::GoldExample>& test_gold, std::uint64_t seed) {
    eval::EvalResult r = eval::evaluate(test_gold, predictions);
    const auto aligned = eval::align(test_gold, predictions);
    r.ci_f1 = eval::bootstrap_ci(aligned.y_true, aligned.y_pred, eval::Metric::kF1Weighted, 1000, 0.95, seed);
    out.result = {{"evaluation", eval::to_json(r)}};
    out.row = eval::table_row(r, "", "", "", "");
  };

  if (cell.model) {
    const ModelConfig& config = *cell.model;
    if (mode == GridMode::kSplit) {
      const auto test_gold = select(gold, split.test_ids);
      HeldOut sets = hold_out_validation(labeled(train_gold), config, 100);
      Model model = train(config, sets.train, sets.validation);
      std::vector<TextItem> items;
      for (const auto& g : test_gold) items.push_back({g.tweet_id, g.text});
      evaluate_split(model.predict(items), test_gold, config.seed);
      out.result["history"] = to_json(model.history());
      if (!model.skipped_ids().empty()) out.result["skipped_ids"] = model.skipped_ids();
    } else {
      const auto cv = cross_validate_model(config, train_gold, split.folds);
      out.result = {{"cross_validation", eval::to_json(cv)}};
      out.row = cv_row(cv);
    }
    out.row.model = std::string(to_string(config.architecture));
    out.row.learning_rate = format_number(config.learning_rate);
    out.row.batch_size = std::to_string(config.batch_size);
    out.row.dropout = format_number(config.dropout);
  } else {
    const ZeroShotCell& zs = *cell.zeroshot;
    auto backend = zeroshot::make_backend(zs.backend_spec);
    if (mode == GridMode::kSplit) {
      const auto test_gold = select(gold, split.test_ids);
      evaluate_split(zeroshot::predict(test_gold, zs.config, *backend), test_gold, split.seed);
    } else {
      auto runner = [&](std::span<const annotation::GoldExample>, std::span<const annotation::GoldExample> test,
                        std::size_t) { return zeroshot::predict(test, zs.config, *backend); };
      const auto cv = eval::cross_validate(train_gold, split.folds, runner);
      out.result = {{"cross_validation", eval::to_json(cv)}};
      out.row = cv_row(cv);
    }
    out.row.model = zs.backend_name;
    out.row.learning_rate = out.row.batch_size = out.row.dropout = "-";
    out.row.tags = std::string(zeroshot::to_string(zs.config.tag_set));
  }
  return out;
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", value);
  return buf;
}

json GridCell::describe() const {
  if (model) return {{"kind", "supervised"}, {"config", to_json(*model)}};
  return {{"kind", "zeroshot"},
          {"backend", zeroshot->backend_spec},
          {"name", zeroshot->backend_name},
          {"tag_set", zeroshot::to_string(zeroshot->config.tag_set)},
          {"template", zeroshot->config.hypothesis_template},
          {"aggregation", zeroshot->config.aggregation == zeroshot::Aggregation::kMean ? "mean" : "max"}};
}

Grid expand_grid(const json& manifest, std::span<const std::string> overrides, std::optional<std::uint64_t> seed) {
  if (!manifest.is_object()) fail(ErrorCode::kConfig, "grid manifest must be a mapping");
  Grid grid;
  const auto mode = manifest.value("mode", std::string("split"));
  if (mode == "split") {
    grid.mode = GridMode::kSplit;
  } else if (mode == "cv") {
    grid.mode = GridMode::kCrossValidation;
  } else {
    fail(ErrorCode::kConfig, "grid mode must be split or cv, got " + mode);
  }
  const json global_base = manifest.value("base", json());
  const json tables = manifest.value("tables", json());
  if (!tables.is_array() || tables.empty()) fail(ErrorCode::kConfig, "grid manifest needs a list of tables");

  try {
    for (const auto& table : tables) {
      if (!table.is_object() || !table.contains("name")) fail(ErrorCode::kConfig, "every grid table needs a name");
      GridTable info{table["name"].get<std::string>(), table.value("title", std::string())};
      const auto kind = table.value("kind", std::string("supervised"));
      if (kind == "supervised") {
        expand_supervised(table, info, global_base, overrides, seed, grid.cells);
      } else if (kind == "zeroshot") {
        expand_zeroshot(table, info, grid.cells);
      } else {
        fail(ErrorCode::kConfig, "unknown table kind " + kind);
      }
      grid.tables.push_back(std::move(info));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed grid manifest: ") + e.what());
  }

  std::set<std::string> ids;
  for (const auto& c : grid.cells) {
    if (!ids.insert(c.id).second) fail(ErrorCode::kConfig, "duplicate grid cell " + c.id);
  }
  return grid;
}

json to_json(const eval::TableRow& row) {
  json out = {{"model", row.model},       {"learning_rate", row.learning_rate},
              {"batch_size", row.batch_size}, {"dropout", row.dropout},
              {"tags", row.tags},         {"precision", row.precision},
              {"recall", row.recall},     {"f1", row.f1},
              {"auc", nullptr},           {"status", row.status}};
  if (row.auc) out["auc"] = *row.auc;
  return out;
}

eval::TableRow table_row_from_json(const json& row) {
  eval::TableRow out;
  out.model = row.at("model").get<std::string>();
  out.learning_rate = row.at("learning_rate").get<std::string>();
  out.batch_size = row.at("batch_size").get<std::string>();
  out.dropout = row.at("dropout").get<std::string>();
  out.tags = row.value("tags", std::string());
  out.precision = row.at("precision").get<double>();
  out.recall = row.at("recall").get<double>();
  out.f1 = row.at("f1").get<double>();
  if (row.contains("auc") && !row["auc"].is_null()) out.auc = row["auc"].get<double>();
  out.status = row.value("status", std::string("run"));
  return out;
}

std::vector<CellOutcome> run_grid(const Grid& grid, std::span<const annotation::GoldExample> gold,
                                  const annotation::DatasetSplit& split, const GridRunOptions& options) {
  std::filesystem::create_directories(options.cells_dir);
  const std::string digest = data_digest(gold, split);
  const std::string mode = grid.mode == GridMode::kSplit ? "split" : "cv";

  std::vector<CellOutcome> outcomes(grid.cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < grid.cells.size(); i = next++) {
      const GridCell& cell = grid.cells[i];
      CellOutcome& outcome = outcomes[i];
      outcome.id = cell.id;
      outcome.table = cell.table;
      const json fingerprint = {{"cell", cell.describe()}, {"mode", mode}, {"data", digest}};
      const auto path = options.cells_dir / (cell.id + ".json");

      bool cached = false;
      if (!options.force && std::filesystem::exists(path)) {
        try {
          const json stored = json::parse(jsonl::read_text(path));
          if (stored.at("fingerprint") == fingerprint) {
            outcome.row = table_row_from_json(stored.at("row"));
            outcome.state = CellOutcome::State::kCached;
            cached = true;
          }
        } catch (const std::exception&) {
          // Unreadable cache entries are recomputed.
        }
      }
      if (!cached) {
        try {
          CellRun run = run_cell(cell, grid.mode, gold, split);
          outcome.row = run.row;
          outcome.state = CellOutcome::State::kRan;
          const json stored = {{"id", cell.id},
                               {"table", cell.table},
                               {"fingerprint", fingerprint},
                               {"row", to_json(run.row)},
                               {"result", run.result}};
          jsonl::write_text_atomic(path, stored.dump(2) + "\n");
        } catch (const Error& e) {
          outcome.state = CellOutcome::State::kFailed;
          outcome.error = std::string(to_string(e.code())) + ": " + e.what();
        } catch (const std::exception& e) {
          outcome.state = CellOutcome::State::kFailed;
          outcome.error = std::string("error: ") + e.what();
        }
      }
      if (options.on_cell) {
        std::lock_guard lock(report_mutex);
        options.on_cell(outcome);
      }
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(grid.cells.size())));
  std::vector<std::thread> workers;
  for (unsigned j = 1; j < jobs; ++j) workers.emplace_back(work);
  work();
  for (auto& w : workers) w.join();
  return outcomes;
}

std::vector<report::Section> grid_sections(const Grid& grid, std::span<const CellOutcome> outcomes) {
  std::vector<report::Section> sections;
  for (const auto& t : grid.tables) {
    report::Section s{t.name, t.title, {}};
    for (const auto& o : outcomes) {
      if (o.table == t.name && o.state != CellOutcome::State::kFailed) s.rows.push_back(o.row);
    }
    sections.push_back(std::move(s));
  }
  return sections;
}

}  // namespace stancekit::models
