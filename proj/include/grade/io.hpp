#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grade/coherence_model.hpp"
#include "grade/evaluation.hpp"
#include "grade/training.hpp"

namespace grade {

/// Dialogue corpus: one `{"utterances": [...]}` object per line.
std::vector<Dialogue> read_dialogues(const std::filesystem::path& path);

/// Tuple cache: one TrainingTuple object per line.
void write_tuples(const std::filesystem::path& path, const std::vector<TrainingTuple>& tuples);
std::vector<TrainingTuple> read_tuples(const std::filesystem::path& path);

/// Scoring input: `{"context": [str, str], "response": str}` per line.
std::vector<EncoderInput> read_score_inputs(const std::filesystem::path& path);
nlohmann::json scored_record(const ScoredPair& scored);
/// Reads scored JSONL back as metric scores.
std::vector<MetricScore> read_scored(const std::filesystem::path& path);

nlohmann::json graph_json(const PreparedPair<double>& pair, const ForwardCache<double>& cache);

/// RFC 4180 style CSV (quoted fields, doubled quotes).
std::vector<std::vector<std::string>> parse_csv(std::istream& in);
/// Header `context_1,context_2,response,human_score`; extra `annotator*`
/// columns are read as per-annotator scores.
std::vector<JudgmentRecord> read_judgments(const std::filesystem::path& path);

}  // namespace grade
