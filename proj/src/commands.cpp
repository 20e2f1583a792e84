#include "grade/commands.hpp"

#include <fstream>
#include <map>
#include <set>

#include "grade/bert_encoder.hpp"
#include "grade/coherence_model.hpp"
#include "grade/io.hpp"
#include "grade/training.hpp"

namespace grade {

namespace {

void require_file(const std::filesystem::path& path, const std::string& what) {
  if (path.empty() || !std::filesystem::exists(path)) {
    throw ConfigError("missing " + what + ": '" + path.string() + "'");
  }
}

void write_effective_config(const RunConfig& config, const std::string& command) {
  std::filesystem::create_directories(config.output_dir);
  std::ofstream out(config.output_dir / (command + ".config"));
  out << "# effective configuration of `" << command << "`\n" << config.dump();
}

Stopwords load_stopwords(const RunConfig& config) {
  if (config.stopwords.empty()) return Stopwords::english();
  require_file(config.stopwords, "stopword list");
  return Stopwords::load(config.stopwords);
}

SpecialTokens specials_for(const ModelConfig& m) {
  return m.encoder_profile == EncoderProfile::Pretrained ? SpecialTokens::bert() : SpecialTokens::toy();
}

/// no_graph_branch wins over the graph-level switches.
void apply_ablation_precedence(ModelConfig& m, std::ostream& log) {
  if (m.no_graph_branch && (m.no_khop || m.no_hop_attention)) {
    log << "warning: ablation.no_graph_branch is set; ignoring ablation.no_khop/ablation.no_hop_attention\n";
    m.no_khop = false;
    m.no_hop_attention = false;
  }
}

/// Loaded lookup tables for train/score.
struct Workspace {
  ConceptNetSnapshot snapshot;
  IdfTable idf;
  Stopwords stopwords;
  Vocabulary vocabulary;
  std::unique_ptr<KeywordExtractor> extractor;
  LexiconTagger tagger;

  Resources resources() const { return {&snapshot, extractor.get(), &vocabulary}; }
};

std::unique_ptr<Workspace> load_workspace(RunConfig& config, std::ostream& log) {
  require_file(config.concept_graph_dir / ConceptNetSnapshot::kEdgesFile, "concept graph edges");
  require_file(config.concept_graph_dir / ConceptNetSnapshot::kEmbeddingsFile, "concept graph embeddings");
  require_file(config.idf_path(), "idf table");
  require_file(config.vocabulary_path(), "vocabulary");

  auto ws = std::make_unique<Workspace>();
  ws->snapshot = ConceptNetSnapshot::load_dir(config.concept_graph_dir);
  ws->idf = IdfTable::load_tsv(config.idf_path());
  ws->stopwords = load_stopwords(config);
  ws->vocabulary = Vocabulary::load(config.vocabulary_path(), specials_for(config.model));
  ws->extractor = std::make_unique<KeywordExtractor>(
      ws->idf, [tagger = ws->tagger](std::span<const std::string> t) { return tagger(t); }, ws->stopwords,
      config.keyword_threshold);

  apply_ablation_precedence(config.model, log);
  config.model.vocab_size = ws->vocabulary.size();
  if (config.model.uses_graph() && ws->snapshot.dimension() != config.model.node_dim) {
    throw ConfigError("concept embeddings have dimension " + std::to_string(ws->snapshot.dimension()) +
                      " but model.node_dim = " + std::to_string(config.model.node_dim));
  }
  log << "loaded concept graph: " << ws->snapshot.term_count() << " terms, " << ws->snapshot.edge_count()
      << " edges, dim " << ws->snapshot.dimension() << "\n";
  return ws;
}

UtteranceEmbedder make_embedder(const RunConfig& config, const Vocabulary& vocab) {
  if (config.model.encoder_profile == EncoderProfile::Pretrained) {
    require_file(config.model.pretrained_weights, "pretrained encoder weights");
    auto bert = std::make_shared<BertEncoder<double>>(
        BertEncoder<double>::from_archive(TensorArchive::load(config.model.pretrained_weights)));
    return [bert, &vocab](const std::string& text) -> Eigen::VectorXd {
      return bert->mean_state(utterance_ids(text, vocab, true), vocab);
    };
  }
  // Same stream as the model's own initialization so the first tensor matches.
  std::mt19937_64 rng(config.seed);
  auto params = std::make_shared<ToyEncoderParams<double>>(
      ToyEncoderParams<double>::random(vocab.size(), config.model.token_dim, config.model.encoder_dim, rng));
  return [params, &vocab](const std::string& text) -> Eigen::VectorXd {
    return mean_token_state(*params, utterance_ids(text, vocab));
  };
}

std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::vector<EpochMetrics> out;
  std::ifstream in(path);
  if (!in) return out;
  auto rows = parse_csv(in);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 3) continue;
    out.push_back({std::stoi(rows[r][0]), std::stod(rows[r][1]), std::stod(rows[r][2])});
  }
  return out;
}

}  // namespace

nlohmann::json cmd_build_data(const RunConfig& config, std::ostream& log) {
  require_file(config.corpus, "dialogue corpus");
  std::filesystem::create_directories(config.output_dir);
  write_effective_config(config, "build-data");

  const auto dialogues = read_dialogues(config.corpus);
  std::size_t skipped = 0;
  const auto pairs = build_pairs(dialogues, &skipped);
  if (pairs.empty()) throw std::invalid_argument("corpus " + config.corpus.string() + " yields no context-response pairs");

  std::vector<std::string> utterances;
  std::set<std::string> seen;
  for (const auto& d : dialogues)
    for (const auto& u : d)
      if (seen.insert(u).second) utterances.push_back(u);

  const auto stopwords = load_stopwords(config);
  IdfTable::build(utterances).save_tsv(config.idf_path());

  Vocabulary vocab;
  if (std::filesystem::exists(config.vocabulary_path())) {
    vocab = Vocabulary::load(config.vocabulary_path(), specials_for(config.model));
  } else if (config.model.encoder_profile == EncoderProfile::Toy) {
    vocab = Vocabulary::build(utterances);
    vocab.save(config.vocabulary_path());
  } else {
    throw ConfigError("pretrained encoder needs an existing vocabulary file");
  }

  LexicalIndex index(utterances, stopwords);
  auto embed = make_embedder(config, vocab);
  std::map<std::string, Eigen::VectorXd> memo;
  UtteranceEmbedder cached = [&](const std::string& text) -> Eigen::VectorXd {
    auto it = memo.find(text);
    if (it == memo.end()) it = memo.emplace(text, embed(text)).first;
    return it->second;
  };

  std::vector<TrainingTuple> tuples;
  std::size_t embedding_fallbacks = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::uint64_t base = mix_seed(config.seed, i);
    TrainingTuple lexical{p.context, p.response, sample_lexical_negative(p.response, index, mix_seed(base, 1)),
                          SamplingMethod::Lexical};
    std::string embedding_negative;
    if (utterances.size() > kEmbeddingTopK) {
      embedding_negative = sample_embedding_negative(p.response, utterances, cached, mix_seed(base, 2));
    } else {
      // Too few utterances for a top-5 ranking: fall back to a random other utterance.
      ++embedding_fallbacks;
      std::vector<const std::string*> others;
      for (const auto& u : utterances)
        if (u != p.response) others.push_back(&u);
      std::mt19937_64 rng(mix_seed(base, 2));
      embedding_negative = *others[static_cast<std::size_t>(rng() % others.size())];
    }
    TrainingTuple embedding{p.context, p.response, std::move(embedding_negative), SamplingMethod::Embedding};
    lexical.validate();
    embedding.validate();
    tuples.push_back(std::move(lexical));
    tuples.push_back(std::move(embedding));
  }
  write_tuples(config.tuples_path(), tuples);

  nlohmann::json stats{{"dialogues", dialogues.size()},
                       {"skipped_dialogues", skipped},
                       {"pairs", pairs.size()},
                       {"tuples", tuples.size()},
                       {"tuples_per_pair", 2},
                       {"utterance_pool", utterances.size()},
                       {"embedding_fallbacks", embedding_fallbacks}};
  std::ofstream(config.output_dir / "stats.json") << stats.dump(2) << '\n';
  log << "build-data: " << pairs.size() << " pairs, " << tuples.size() << " tuples, " << skipped
      << " dialogue(s) skipped\n";
  return stats;
}

void cmd_train(RunConfig config, const TrainCommandOptions& options, std::ostream& log) {
  require_file(config.tuples_path(), "tuple cache");
  auto ws = load_workspace(config, log);
  write_effective_config(config, "train");

  const auto tuples = read_tuples(config.tuples_path());
  if (tuples.empty()) throw std::invalid_argument("tuple cache " + config.tuples_path().string() + " is empty");

  CoherenceModel<double> model;
  AdamState<double> adam;
  int start_epoch = 1;
  std::vector<EpochMetrics> history;
  const auto latest = config.output_dir / "latest.ckpt";
  if (options.resume) {
    const auto from = config.checkpoint.empty() ? latest : config.checkpoint;
    require_file(from, "checkpoint to resume from");
    model = load_checkpoint<double>(from, config.model);
    adam = AdamState<double>::for_params(model.params);
    auto archive = TensorArchive::load(from);
    const auto& extra = archive.metadata.at("extra");
    start_epoch = extra.value("epoch", 0) + 1;
    adam.step = extra.value("adam_step", std::int64_t{0});
    if (archive.contains("adam.m." + std::string("fc3.bias"))) {
      read_parameters(archive, "adam.m.", adam.first_moment);
      read_parameters(archive, "adam.v.", adam.second_moment);
    }
    history = read_metrics_csv(config.output_dir / "metrics.csv");
    std::erase_if(history, [&](const EpochMetrics& m) { return m.epoch >= start_epoch; });
    log << "resuming from " << from.string() << " at epoch " << start_epoch << "\n";
  } else {
    model = CoherenceModel<double>(config.model, config.seed);
    adam = AdamState<double>::for_params(model.params);
  }
  log << "model parameters: " << model.params.parameter_count() << "\n";

  auto data = PreparedTuples<double>::build(tuples, model, ws->resources());
  TrainConfig train_config = config.train;
  train_config.seed = config.seed;

  const auto metrics_path = config.output_dir / "metrics.csv";
  auto on_epoch = [&](const EpochMetrics& m, const CoherenceModel<double>& current, const AdamState<double>& state) {
    history.push_back(m);
    write_metrics_csv(metrics_path, history);
    const nlohmann::json extra{{"epoch", m.epoch}, {"adam_step", state.step}};
    const auto path = config.output_dir / ("checkpoint_epoch_" + std::to_string(m.epoch) + ".ckpt");
    save_checkpoint(current, path, extra, {{"adam.m.", &state.first_moment}, {"adam.v.", &state.second_moment}});
    std::filesystem::copy_file(path, latest, std::filesystem::copy_options::overwrite_existing);
    log << "epoch " << m.epoch << ": loss " << m.loss << ", ranking accuracy " << m.ranking_accuracy << "\n";
  };
  train(data, model, train_config, adam, TrainOptions{start_epoch}, EpochCallback<double>(on_epoch));
  if (history.empty()) write_metrics_csv(metrics_path, history);
}

void cmd_score(RunConfig config, const ScoreCommandOptions& options, std::ostream& log) {
  require_file(options.input, "scoring input");
  require_file(config.checkpoint_path(), "checkpoint");
  auto ws = load_workspace(config, log);
  write_effective_config(config, "score");

  auto model = load_checkpoint<double>(config.checkpoint_path(), config.model);
  const auto inputs = read_score_inputs(options.input);
  const auto output = options.output.empty() ? config.output_dir / "scored.jsonl" : options.output;
  std::ofstream out(output);
  if (!out) throw std::runtime_error("cannot write " + output.string());
  std::ofstream graph_out;
  if (options.dump_graph) {
    graph_out.open(*options.dump_graph);
    if (!graph_out) throw std::runtime_error("cannot write " + options.dump_graph->string());
  }

  const auto res = ws->resources();
  for (const auto& input : inputs) {
    auto prepared = model.prepare(input, res);
    ForwardCache<double> cache;
    ScoredPair scored;
    scored.input = input;
    scored.score = model.forward(prepared, Mode::Eval, 0, &cache);
    if (options.diagnostics) scored.diagnostics = model.diagnostics(prepared, cache);
    out << scored_record(scored).dump() << '\n';
    if (graph_out.is_open()) graph_out << graph_json(prepared, cache).dump() << '\n';
  }
  log << "scored " << inputs.size() << " pair(s) into " << output.string() << "\n";
}

nlohmann::json cmd_evaluate(const RunConfig& config, const EvaluateCommandOptions& options, std::ostream& log) {
  require_file(options.scored, "scored file");
  require_file(options.judgments, "judgment file");
  std::filesystem::create_directories(config.output_dir);
  write_effective_config(config, "evaluate");

  const auto scores = read_scored(options.scored);
  const auto judgments = read_judgments(options.judgments);
  const auto report = correlation_report(scores, judgments);
  auto json = report.to_json();
  std::ofstream(config.output_dir / "report.json") << json.dump(2) << '\n';
  report.write_scatter_csv(config.output_dir / "scatter.csv");
  log << "evaluate: n=" << report.n << " pearson=" << report.pearson.coefficient
      << significance_marker(report.pearson.p_value) << " spearman=" << report.spearman.coefficient
      << significance_marker(report.spearman.p_value) << "\n";
  return json;
}

}  // namespace grade
