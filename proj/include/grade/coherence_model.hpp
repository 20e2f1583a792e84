#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "grade/bert_encoder.hpp"
#include "grade/concept_graph.hpp"
#include "grade/dense.hpp"
#include "grade/dialogue_graph.hpp"
#include "grade/graph_reasoning.hpp"
#include "grade/keywords.hpp"
#include "grade/model_config.hpp"
#include "grade/tensor_archive.hpp"
#include "grade/utterance_encoder.hpp"

namespace grade {

enum class Mode { Train, Eval };

/// Every learnable tensor. Tensors that the configuration switches off are
/// left empty and skipped by `for_each_parameter`.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct ModelParams {
  ToyEncoderParams<Scalar> encoder;
  NodeInitParams<Scalar> node_init;
  GraphHead<Scalar> graph;
  VectorX<Scalar> empty_graph;  // v_g when either keyword list is empty
  MatrixX<Scalar> fc1, fc2, fc3;
  VectorX<Scalar> fc1_bias, fc2_bias, fc3_bias;

  static ModelParams init(const ModelConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelParams p;
    const int d = config.node_dim;
    if (config.encoder_profile == EncoderProfile::Toy) {
      p.encoder = ToyEncoderParams<Scalar>::random(config.vocab_size, config.token_dim, config.encoder_dim, rng);
    }
    if (config.uses_khop()) {
      for (int k = 0; k < config.max_hops(); ++k) p.node_init.hop_weights.push_back(glorot<Scalar>(d, d, rng));
      p.node_init.bias = VectorX<Scalar>::Zero(d);
    }
    if (config.uses_graph()) {
      p.graph = GraphHead<Scalar>::random(config.gat_layers, d, rng);
      p.empty_graph = VectorX<Scalar>::Zero(d);
    }
    p.fc1 = glorot<Scalar>(config.hidden1, config.encoder_dim + d, rng);
    p.fc2 = glorot<Scalar>(config.hidden2, config.hidden1, rng);
    p.fc3 = glorot<Scalar>(1, config.hidden2, rng);
    p.fc1_bias = VectorX<Scalar>::Zero(config.hidden1);
    p.fc2_bias = VectorX<Scalar>::Zero(config.hidden2);
    p.fc3_bias = VectorX<Scalar>::Zero(1);
    return p;
  }

  /// Same shapes, all zeros.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    for_each_parameter([](const std::string&, auto& t) { t.setZero(); }, z);
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_parameter([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, *this);
    return n;
  }
};

/// Calls f(name, a.x, b.x, ...) for every non-empty tensor x, in a fixed order.
template <typename F, typename First, typename... Rest>
void for_each_parameter(F&& f, First& first, Rest&... rest) {
  auto visit = [&](const std::string& name, auto get) {
    auto& t = get(first);
    if (t.size() == 0) return;
    f(name, t, get(rest)...);
  };
  visit("encoder.token_embedding", [](auto& p) -> auto& { return p.encoder.token_embedding; });
  visit("encoder.projection", [](auto& p) -> auto& { return p.encoder.projection; });
  visit("encoder.projection_bias", [](auto& p) -> auto& { return p.encoder.projection_bias; });
  for (std::size_t k = 0; k < first.node_init.hop_weights.size(); ++k) {
    visit("node_init.hop_weight." + std::to_string(k + 1),
          [k](auto& p) -> auto& { return p.node_init.hop_weights[k]; });
  }
  visit("node_init.bias", [](auto& p) -> auto& { return p.node_init.bias; });
  for (std::size_t l = 0; l < first.graph.layers.size(); ++l) {
    const std::string prefix = "gat." + std::to_string(l) + ".";
    visit(prefix + "transform", [l](auto& p) -> auto& { return p.graph.layers[l].transform; });
    visit(prefix + "attention", [l](auto& p) -> auto& { return p.graph.layers[l].attention; });
    visit(prefix + "combination", [l](auto& p) -> auto& { return p.graph.layers[l].combination; });
  }
  visit("pool.weight", [](auto& p) -> auto& { return p.graph.pool_weight; });
  visit("pool.bias", [](auto& p) -> auto& { return p.graph.pool_bias; });
  visit("empty_graph", [](auto& p) -> auto& { return p.empty_graph; });
  visit("fc1.weight", [](auto& p) -> auto& { return p.fc1; });
  visit("fc1.bias", [](auto& p) -> auto& { return p.fc1_bias; });
  visit("fc2.weight", [](auto& p) -> auto& { return p.fc2; });
  visit("fc2.bias", [](auto& p) -> auto& { return p.fc2_bias; });
  visit("fc3.weight", [](auto& p) -> auto& { return p.fc3; });
  visit("fc3.bias", [](auto& p) -> auto& { return p.fc3_bias; });
}

/// Lookup tables the model reads while building inputs.
struct Resources {
  const ConceptNetSnapshot* snapshot = nullptr;
  const KeywordExtractor* extractor = nullptr;
  const Vocabulary* vocabulary = nullptr;
};

/// Parameter-independent inputs for one (context, response) pair.
template <typename Scalar>
struct PreparedPair {
  EncoderInput input;
  TokenSequence tokens;
  GraphInputs<Scalar> graph;
};

template <typename Scalar>
struct ForwardCache {
  VectorX<Scalar> pooled_tokens;
  VectorX<Scalar> context_vector;  // v_c
  bool graph_used = false;
  bool degenerate_graph = false;
  MatrixX<Scalar> adjacency;  // after edge dropping
  MatrixX<Scalar> norm_adjacency;
  NeighborSets neighbors;
  MatrixX<Scalar> features;  // h^(0)
  GraphHeadCache<Scalar> head;
  VectorX<Scalar> graph_vector;  // v_g
  VectorX<Scalar> mlp_input, pre1, act1, pre2, act2;
  Scalar logit{};
  Scalar score{};
};

struct Diagnostics {
  std::vector<std::string> context_keywords;
  std::vector<std::string> response_keywords;
  struct Edge {
    int context_index;
    int response_index;
    double weight;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<double>> final_attention;  // head-averaged alpha of the last layer
};

struct ScoredPair {
  EncoderInput input;
  double score = 0.0;
  std::optional<Diagnostics> diagnostics;
};

template <typename Scalar>
class CoherenceModel {
 public:
  ModelConfig config;
  ModelParams<Scalar> params;
  std::shared_ptr<const BertEncoder<Scalar>> pretrained;

  CoherenceModel() = default;
  CoherenceModel(ModelConfig cfg, std::uint64_t seed) : config(std::move(cfg)) {
    if (config.encoder_profile == EncoderProfile::Pretrained) {
      auto bert = std::make_shared<BertEncoder<Scalar>>(
          BertEncoder<Scalar>::from_archive(TensorArchive::load(config.pretrained_weights)));
      config.encoder_dim = bert->output_dim();
      pretrained = std::move(bert);
    }
    config.validate();
    params = ModelParams<Scalar>::init(config, seed);
  }

  /// Uses an in-memory pretrained encoder instead of loading one from disk.
  CoherenceModel(ModelConfig cfg, std::shared_ptr<const BertEncoder<Scalar>> bert, std::uint64_t seed)
      : config(std::move(cfg)), pretrained(std::move(bert)) {
    config.encoder_profile = EncoderProfile::Pretrained;
    config.encoder_dim = pretrained->output_dim();
    if (config.pretrained_weights.empty()) config.pretrained_weights = "<memory>";
    config.validate();
    params = ModelParams<Scalar>::init(config, seed);
  }

  bool wordpiece() const { return config.encoder_profile == EncoderProfile::Pretrained; }

  PreparedPair<Scalar> prepare(const EncoderInput& input, const Resources& res) const {
    input.validate();
    if (!res.snapshot || !res.extractor || !res.vocabulary) throw std::invalid_argument("prepare: missing resources");
    if (config.uses_graph() && res.snapshot->term_count() > 0 && res.snapshot->dimension() != config.node_dim) {
      throw std::invalid_argument("prepare: concept embeddings have dimension " +
                                  std::to_string(res.snapshot->dimension()) + ", model expects " +
                                  std::to_string(config.node_dim));
    }
    PreparedPair<Scalar> p;
    p.input = input;
    p.tokens = serialize(input, *res.vocabulary, config.max_len, wordpiece());
    if (config.uses_graph()) {
      auto ctx = res.extractor->extract_context(input.context);
      auto resp = res.extractor->extract(input.response, Origin::Response);
      p.graph = prepare_graph<Scalar>(std::move(ctx), std::move(resp), *res.snapshot, config.graph_options());
    }
    return p;
  }

  /// Coherence score in (0, 1). Edge dropping happens only in training mode
  /// and is driven by `seed`.
  Scalar forward(const PreparedPair<Scalar>& pair, Mode mode, std::uint64_t seed,
                 ForwardCache<Scalar>* cache = nullptr) const {
    ForwardCache<Scalar> local;
    ForwardCache<Scalar>& c = cache ? *cache : local;
    const int d = config.node_dim;

    if (pretrained) {
      c.context_vector = pretrained->encode(pair.tokens);
    } else {
      c.context_vector = encode_toy(params.encoder, pair.tokens, &c.pooled_tokens);
    }

    c.graph_used = config.uses_graph();
    c.degenerate_graph = c.graph_used && pair.graph.degenerate();
    if (!c.graph_used) {
      c.graph_vector = VectorX<Scalar>::Zero(d);
    } else if (c.degenerate_graph) {
      c.graph_vector = params.empty_graph;
    } else {
      const auto& g = pair.graph;
      c.adjacency = mode == Mode::Train ? drop_edges(g.adjacency, config.drop_rate, seed) : g.adjacency;
      c.norm_adjacency = normalize_adjacency(c.adjacency);
      c.neighbors = active_neighbors(c.adjacency);
      c.features = init_node_features(g, params.node_init);
      c.graph_vector = graph_head_forward(params.graph, c.features, c.norm_adjacency, c.neighbors,
                                          config.gat_options(), &c.head);
    }

    c.mlp_input.resize(c.context_vector.size() + d);
    c.mlp_input << c.context_vector, c.graph_vector;
    c.pre1 = params.fc1 * c.mlp_input + params.fc1_bias;
    c.act1 = elu(c.pre1);
    c.pre2 = params.fc2 * c.act1 + params.fc2_bias;
    c.act2 = elu(c.pre2);
    c.logit = (params.fc3 * c.act2)(0) + params.fc3_bias(0);
    c.score = sigmoid(c.logit);
    if (!std::isfinite(c.score)) throw NonFiniteError("forward produced a non-finite score");
    return c.score;
  }

  /// Adds d(loss)/d(params) into `grad` given d(loss)/d(score).
  void backward(const PreparedPair<Scalar>& pair, const ForwardCache<Scalar>& c, Scalar grad_score,
                ModelParams<Scalar>& grad) const {
    const Scalar d_logit = grad_score * c.score * (Scalar(1) - c.score);
    grad.fc3.noalias() += d_logit * c.act2.transpose();
    grad.fc3_bias(0) += d_logit;
    VectorX<Scalar> d_pre2 = (params.fc3.transpose() * d_logit).cwiseProduct(elu_grad(c.pre2));
    grad.fc2.noalias() += d_pre2 * c.act1.transpose();
    grad.fc2_bias += d_pre2;
    VectorX<Scalar> d_pre1 = (params.fc2.transpose() * d_pre2).cwiseProduct(elu_grad(c.pre1));
    grad.fc1.noalias() += d_pre1 * c.mlp_input.transpose();
    grad.fc1_bias += d_pre1;
    VectorX<Scalar> d_input = params.fc1.transpose() * d_pre1;

    const auto dc = c.context_vector.size();
    if (!pretrained) {
      encode_toy_backward(params.encoder, pair.tokens, c.pooled_tokens, VectorX<Scalar>(d_input.head(dc)), grad.encoder);
    }
    if (!c.graph_used) return;
    VectorX<Scalar> d_vg = d_input.tail(config.node_dim);
    if (c.degenerate_graph) {
      grad.empty_graph += d_vg;
      return;
    }
    MatrixX<Scalar> d_features =
        graph_head_backward(c.head, d_vg, params.graph, c.norm_adjacency, c.neighbors, config.gat_options(), grad.graph);
    const auto& shells = pair.graph.shell_means;
    for (std::size_t k = 0; k < params.node_init.hop_weights.size(); ++k) {
      grad.node_init.hop_weights[k].noalias() += d_features.transpose() * shells[k];
      grad.node_init.bias += d_features.colwise().sum().transpose();
    }
  }

  Scalar score(const EncoderInput& input, const Resources& res) const {
    return forward(prepare(input, res), Mode::Eval, 0);
  }

  ScoredPair score_pair(const EncoderInput& input, const Resources& res, bool with_diagnostics) const {
    auto prepared = prepare(input, res);
    ForwardCache<Scalar> cache;
    ScoredPair out;
    out.input = input;
    out.score = static_cast<double>(forward(prepared, Mode::Eval, 0, &cache));
    if (with_diagnostics) out.diagnostics = diagnostics(prepared, cache);
    return out;
  }

  Diagnostics diagnostics(const PreparedPair<Scalar>& pair, const ForwardCache<Scalar>& c) const {
    Diagnostics d;
    d.context_keywords = pair.graph.context.terms;
    d.response_keywords = pair.graph.response.terms;
    if (!c.graph_used || c.degenerate_graph) return d;
    const int p = pair.graph.context_count();
    const int n = pair.graph.node_count();
    for (int i = 0; i < p; ++i)
      for (int j = p; j < n; ++j)
        if (c.adjacency(i, j) != Scalar(0)) d.edges.push_back({i, j - p, static_cast<double>(c.adjacency(i, j))});
    const auto& last = c.head.layers.back().alpha;
    d.final_attention.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (const auto& alpha : last)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          d.final_attention[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
              static_cast<double>(alpha(i, j)) / static_cast<double>(last.size());
    return d;
  }
};

template <typename Scalar>
void write_parameters(TensorArchive& archive, const std::string& prefix, const ModelParams<Scalar>& params) {
  for_each_parameter([&](const std::string& name, const auto& t) { archive.put(prefix + name, t); }, params);
}

template <typename Scalar>
void read_parameters(const TensorArchive& archive, const std::string& prefix, ModelParams<Scalar>& params) {
  for_each_parameter([&](const std::string& name, auto& t) { archive.get_into(prefix + name, t); }, params);
}

/// Writes config, parameters and `extra` metadata (e.g. the epoch counter).
template <typename Scalar>
void save_checkpoint(const CoherenceModel<Scalar>& model, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object(),
                     const std::vector<std::pair<std::string, const ModelParams<Scalar>*>>& extra_params = {}) {
  TensorArchive archive;
  archive.metadata["format"] = "grade-checkpoint";
  archive.metadata["model_config"] = model.config;
  archive.metadata["scalar_bytes"] = sizeof(Scalar);
  archive.metadata["extra"] = extra;
  write_parameters(archive, "param.", model.params);
  for (const auto& [prefix, p] : extra_params) write_parameters(archive, prefix, *p);
  archive.save(path);
}

namespace detail {

inline void check_checkpoint(const TensorArchive& archive) {
  if (archive.metadata.value("format", "") != "grade-checkpoint") {
    throw ArchiveError("not a coherence-model checkpoint");
  }
}

}  // namespace detail

/// Rebuilds the model described by the checkpoint.
template <typename Scalar>
CoherenceModel<Scalar> load_checkpoint(const std::filesystem::path& path) {
  auto archive = TensorArchive::load(path);
  detail::check_checkpoint(archive);
  auto config = archive.metadata.at("model_config").get<ModelConfig>();
  CoherenceModel<Scalar> model(config, 0);
  read_parameters(archive, "param.", model.params);
  return model;
}

/// Loads into a model built from `expected`; any shape or switch mismatch is an error.
template <typename Scalar>
CoherenceModel<Scalar> load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  auto archive = TensorArchive::load(path);
  detail::check_checkpoint(archive);
  auto stored = archive.metadata.at("model_config").get<ModelConfig>();
  if (stored.no_graph_branch != expected.no_graph_branch || stored.no_khop != expected.no_khop ||
      stored.no_hop_attention != expected.no_hop_attention || stored.encoder_profile != expected.encoder_profile) {
    throw ArchiveError("checkpoint was trained with different ablation switches or encoder profile");
  }
  CoherenceModel<Scalar> model(expected, 0);
  read_parameters(archive, "param.", model.params);
  return model;
}

}  // namespace grade
