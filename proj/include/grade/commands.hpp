#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "grade/run_config.hpp"

namespace grade {

/// Windowed pairs, two negatives per pair, idf table and toy vocabulary.
/// Returns the stats object that is also written to `<output_dir>/stats.json`.
nlohmann::json cmd_build_data(const RunConfig& config, std::ostream& log);

struct TrainCommandOptions {
  bool resume = false;
};
/// Trains from the tuple cache; writes per-epoch checkpoints, `latest.ckpt`
/// and `metrics.csv` into the output directory.
void cmd_train(RunConfig config, const TrainCommandOptions& options, std::ostream& log);

struct ScoreCommandOptions {
  std::filesystem::path input;
  std::filesystem::path output;  // defaults to <output_dir>/scored.jsonl
  std::optional<std::filesystem::path> dump_graph;
  bool diagnostics = false;
};
void cmd_score(RunConfig config, const ScoreCommandOptions& options, std::ostream& log);

struct EvaluateCommandOptions {
  std::filesystem::path scored;
  std::filesystem::path judgments;
};
/// Writes `report.json` and `scatter.csv` into the output directory.
nlohmann::json cmd_evaluate(const RunConfig& config, const EvaluateCommandOptions& options, std::ostream& log);

}  // namespace grade
