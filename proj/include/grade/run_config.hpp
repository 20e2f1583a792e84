#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "grade/model_config.hpp"
#include "grade/training.hpp"

namespace grade {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` run configuration. Unknown keys are rejected.
struct RunConfig {
  std::filesystem::path concept_graph_dir;
  std::filesystem::path corpus;      // dialogue JSONL for build-data
  std::filesystem::path tuples;      // tuple cache; defaults to <output_dir>/tuples.jsonl
  std::filesystem::path vocabulary;  // toy vocabulary; defaults to <output_dir>/vocab.txt
  std::filesystem::path idf;         // defaults to <output_dir>/idf.tsv
  std::filesystem::path stopwords;   // built-in English list when empty
  std::filesystem::path checkpoint;  // defaults to <output_dir>/latest.ckpt
  std::filesystem::path output_dir = "grade_run";
  std::uint64_t seed = 0;
  double keyword_threshold = 0.0;

  ModelConfig model;
  TrainConfig train;

  static RunConfig defaults();
  static std::map<std::string, std::string> parse_file(const std::filesystem::path& path);
  static std::map<std::string, std::string> parse_text(const std::string& text, const std::string& origin = "<text>");

  /// Applies key/value pairs in order; later values win.
  void apply(const std::map<std::string, std::string>& values);
  void set(const std::string& key, const std::string& value);

  std::map<std::string, std::string> to_map() const;
  /// The effective configuration in the same `key = value` format.
  std::string dump() const;

  std::filesystem::path tuples_path() const { return tuples.empty() ? output_dir / "tuples.jsonl" : tuples; }
  std::filesystem::path vocabulary_path() const { return vocabulary.empty() ? output_dir / "vocab.txt" : vocabulary; }
  std::filesystem::path idf_path() const { return idf.empty() ? output_dir / "idf.tsv" : idf; }
  std::filesystem::path checkpoint_path() const { return checkpoint.empty() ? output_dir / "latest.ckpt" : checkpoint; }

  static const std::vector<std::string>& known_keys();
};

}  // namespace grade
