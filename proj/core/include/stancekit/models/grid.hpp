#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/annotation.hpp"
#include "stancekit/eval.hpp"
#include "stancekit/models/config.hpp"
#include "stancekit/report.hpp"
#include "stancekit/zeroshot.hpp"

// Hyperparameter grids: a manifest of tables, each expanding into cells
// that are trained (or, for zero-shot tables, scored) and evaluated
// independently. Cell results are cached on disk so an interrupted grid
// resumes where it stopped.
namespace stancekit::models {

enum class GridMode { kSplit, kCrossValidation };

struct ZeroShotCell {
  std::string backend_name;  // shown in the model column
  std::string backend_spec;  // see zeroshot::make_backend
  zeroshot::Config config;
};

struct GridCell {
  std::string id;
  std::string table;
  std::optional<ModelConfig> model;    // supervised cells
  std::optional<ZeroShotCell> zeroshot;

  nlohmann::json describe() const;
};

struct GridTable {
  std::string name;
  std::string title;
};

struct Grid {
  GridMode mode = GridMode::kSplit;
  std::vector<GridTable> tables;
  std::vector<GridCell> cells;  // grouped by table, in manifest order
};

// Expands a manifest. `overrides` ("key=value") apply to every supervised
// cell before the table axes, and `seed` replaces every cell's seed.
// Unknown keys, architectures or tag sets raise kConfig.
Grid expand_grid(const nlohmann::json& manifest, std::span<const std::string> overrides = {},
                 std::optional<std::uint64_t> seed = std::nullopt);

// "%g" formatting used for the LR and dropout columns (2e-05, 0.4).
std::string format_number(double value);

struct CellOutcome {
  enum class State { kRan, kCached, kFailed };
  std::string id;
  std::string table;
  State state = State::kRan;
  eval::TableRow row;
  std::string error;  // "<code>: message" when failed
};

struct GridRunOptions {
  std::filesystem::path cells_dir;  // one <id>.json per finished cell
  unsigned jobs = 1;                // cells trained concurrently
  bool force = false;               // rerun cached cells
  std::function<void(const CellOutcome&)> on_cell;  // called from worker threads, serialized
};

// Runs every cell. Split mode trains on split.train_ids and evaluates on
// split.test_ids; cross-validation mode reports fold means over
// split.folds. A cached cell is reused when its stored fingerprint (cell
// description plus a digest of the data) matches. Failed cells are
// reported and not cached.
std::vector<CellOutcome> run_grid(const Grid& grid, std::span<const annotation::GoldExample> gold,
                                  const annotation::DatasetSplit& split, const GridRunOptions& options);

// Report sections for the outcomes (failed cells omitted), in table order.
std::vector<report::Section> grid_sections(const Grid& grid, std::span<const CellOutcome> outcomes);

nlohmann::json to_json(const eval::TableRow& row);
eval::TableRow table_row_from_json(const nlohmann::json& row);

}  // namespace stancekit::models
