#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grade/commands.hpp"
#include "grade/concept_graph.hpp"
#include "grade/evaluation.hpp"
#include "grade/tensor_archive.hpp"
#include "grade/training.hpp"

namespace {

int fail(const std::string& kind, const std::string& message) {
  std::cerr << "grade: error[" << kind << "]: " << message << '\n';
  return kind == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRADE dialogue coherence metric"};
  app.require_subcommand(1);

  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string concept_graph_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--output-dir", output_dir, "output directory");
  app.add_option("--concept-graph-dir", concept_graph_dir, "directory holding edges.tsv and embeddings.txt");
  app.add_option("--set", overrides, "override a config key (key=value); repeatable");

  auto* build = app.add_subcommand("build-data", "window a dialogue corpus into training tuples");
  std::string corpus;
  build->add_option("--corpus", corpus, "dialogue JSONL");

  auto* train = app.add_subcommand("train", "train the coherence model");
  grade::TrainCommandOptions train_opts;
  train->add_flag("--resume", train_opts.resume, "continue from the latest checkpoint");

  auto* score = app.add_subcommand("score", "score context-response pairs");
  grade::ScoreCommandOptions score_opts;
  std::string dump_graph;
  score->add_option("--input", score_opts.input, "JSONL of {context, response}")->required();
  score->add_option("--output", score_opts.output, "scored JSONL");
  score->add_option("--dump-graph", dump_graph, "write the constructed graphs as JSONL");
  score->add_flag("--diagnostics", score_opts.diagnostics, "include keywords, edges and attention");

  auto* evaluate = app.add_subcommand("evaluate", "correlate scores with human judgments");
  grade::EvaluateCommandOptions eval_opts;
  evaluate->add_option("--scored", eval_opts.scored, "scored JSONL")->required();
  evaluate->add_option("--judgments", eval_opts.judgments, "judgment CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    grade::RunConfig config = grade::RunConfig::defaults();
    if (!config_file.empty()) config.apply(grade::RunConfig::parse_file(config_file));
    // Flags win over the file.
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw grade::ConfigError("--set expects key=value, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) config.set("seed", std::to_string(*seed));
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (!concept_graph_dir.empty()) config.concept_graph_dir = concept_graph_dir;
    if (!corpus.empty()) config.corpus = corpus;
    if (!dump_graph.empty()) score_opts.dump_graph = dump_graph;
    // The vocabulary size is only known once the workspace is loaded.
    grade::ModelConfig shape = config.model;
    if (shape.vocab_size == 0) shape.vocab_size = 1;
    try {
      shape.validate();
      config.train.validate();
    } catch (const std::invalid_argument& e) {
      throw grade::ConfigError(e.what());
    }

    if (build->parsed()) {
      grade::cmd_build_data(config, std::cerr);
    } else if (train->parsed()) {
      grade::cmd_train(config, train_opts, std::cerr);
    } else if (score->parsed()) {
      grade::cmd_score(config, score_opts, std::cerr);
    } else if (evaluate->parsed()) {
      grade::cmd_evaluate(config, eval_opts, std::cerr);
    }
  } catch (const grade::ConfigError& e) {
    return fail("config", e.what());
  } catch (const grade::LoadError& e) {
    return fail("io", e.what());
  } catch (const grade::ArchiveError& e) {
    return fail("checkpoint", e.what());
  } catch (const grade::AlignmentError& e) {
    return fail("alignment", e.what());
  } catch (const grade::CorrelationError& e) {
    return fail("data", e.what());
  } catch (const grade::TrainingError& e) {
    return fail("training", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("data", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
