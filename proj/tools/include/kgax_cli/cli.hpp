#pragma once

// Command surface: prepare, train, eval, recommend, gradcheck, gridsearch.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgax/config.hpp"

namespace kgax::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitGradcheck = 5,
};

/// Axes swept by gridsearch; an empty axis is not swept.
struct GridAxes {
  std::vector<std::size_t> batch_size;
  std::vector<std::size_t> dim;
  std::vector<double> lr;
  std::vector<std::size_t> neighbor_cap;
  std::vector<std::size_t> depth;

  bool any() const noexcept {
    return !batch_size.empty() || !dim.empty() || !lr.empty() || !neighbor_cap.empty() || !depth.empty();
  }
};

/// The grid used when no grid.* key is set.
GridAxes default_grid();

struct RunConfig {
  ModelConfig model;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = ".";
  std::filesystem::path model_path;  // defaults to <out>/model.kgax
  std::vector<std::size_t> ks;       // empty: command default
  std::string user;
  std::size_t max_cells = 64;
  GridAxes grid;

  std::filesystem::path resolved_model_path() const {
    return model_path.empty() ? out_dir / "model.kgax" : model_path;
  }
};

/// Applies one key: a model key, a path key (data_dir, out, model), k, user,
/// max_cells or grid.<axis>. Throws ConfigError for unknown keys and bad values.
void set_run_value(RunConfig& config, std::string_view key, std::string_view value);

/// Config file text, then overrides in order. The model config is validated.
RunConfig parse_run_config(std::string_view file_text, std::string_view source,
                           const std::vector<std::pair<std::string, std::string>>& overrides);

/// Configured prefix of layer_dims, extended by halving to `depth` layers.
std::vector<std::size_t> layer_dims_for_depth(const ModelConfig& config, std::size_t depth);

struct GridCell {
  ModelConfig config;
  double val_recall20 = 0.0;
};

/// Cartesian product of the configured axes (or all defaults), cell seeds derived from (seed, index).
std::vector<ModelConfig> grid_cells(const RunConfig& config);

/// Argmax of validation Recall@20, ties to the lowest lr, then the lowest index.
std::size_t best_cell(const std::vector<GridCell>& cells);

/// Runs argv[1..] and returns the exit code. Output goes to `out`, diagnostics to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kgax::cli
