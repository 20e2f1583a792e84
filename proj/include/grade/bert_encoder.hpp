#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "grade/dense.hpp"
#include "grade/tensor_archive.hpp"
#include "grade/utterance_encoder.hpp"

namespace grade {

struct BertConfig {
  int vocab_size = 30522;
  int hidden = 768;
  int layers = 12;
  int heads = 12;
  int intermediate = 3072;
  int max_position = 512;
  int type_vocab = 2;
  double layer_norm_eps = 1e-12;
};

void to_json(nlohmann::json& j, const BertConfig& c);
void from_json(const nlohmann::json& j, BertConfig& c);

template <typename Scalar>
struct BertLayerWeights {
  MatrixX<Scalar> query, key, value, attention_out;  // hidden x hidden
  VectorX<Scalar> query_bias, key_bias, value_bias, attention_out_bias;
  VectorX<Scalar> attention_norm_gamma, attention_norm_beta;
  MatrixX<Scalar> intermediate;  // intermediate x hidden
  VectorX<Scalar> intermediate_bias;
  MatrixX<Scalar> output;  // hidden x intermediate
  VectorX<Scalar> output_bias;
  VectorX<Scalar> output_norm_gamma, output_norm_beta;
};

/// Frozen bidirectional transformer encoder with a tanh pooler over the first
/// token. Tensor names follow the usual `bert.*` checkpoint layout with
/// weights stored as out x in matrices.
template <typename Scalar>
class BertEncoder {
 public:
  BertConfig config;
  MatrixX<Scalar> word_embeddings, position_embeddings, token_type_embeddings;
  VectorX<Scalar> embedding_norm_gamma, embedding_norm_beta;
  std::vector<BertLayerWeights<Scalar>> layers;
  MatrixX<Scalar> pooler;
  VectorX<Scalar> pooler_bias;

  /// Small random network for smoke tests.
  static BertEncoder random(const BertConfig& config, std::mt19937_64& rng) {
    BertEncoder b;
    b.config = config;
    const int h = config.hidden;
    auto vec = [](int n, Scalar v) { return VectorX<Scalar>::Constant(n, v); };
    b.word_embeddings = glorot<Scalar>(config.vocab_size, h, rng);
    b.position_embeddings = glorot<Scalar>(config.max_position, h, rng);
    b.token_type_embeddings = glorot<Scalar>(config.type_vocab, h, rng);
    b.embedding_norm_gamma = vec(h, 1);
    b.embedding_norm_beta = vec(h, 0);
    for (int l = 0; l < config.layers; ++l) {
      BertLayerWeights<Scalar> w;
      w.query = glorot<Scalar>(h, h, rng);
      w.key = glorot<Scalar>(h, h, rng);
      w.value = glorot<Scalar>(h, h, rng);
      w.attention_out = glorot<Scalar>(h, h, rng);
      w.query_bias = w.key_bias = w.value_bias = w.attention_out_bias = vec(h, 0);
      w.attention_norm_gamma = w.output_norm_gamma = vec(h, 1);
      w.attention_norm_beta = w.output_norm_beta = vec(h, 0);
      w.intermediate = glorot<Scalar>(config.intermediate, h, rng);
      w.intermediate_bias = vec(config.intermediate, 0);
      w.output = glorot<Scalar>(h, config.intermediate, rng);
      w.output_bias = vec(h, 0);
      b.layers.push_back(std::move(w));
    }
    b.pooler = glorot<Scalar>(h, h, rng);
    b.pooler_bias = vec(h, 0);
    return b;
  }

  static BertEncoder from_archive(const TensorArchive& archive) {
    BertEncoder b;
    b.config = archive.metadata.at("bert_config").get<BertConfig>();
    auto mat = [&](const std::string& name) { return archive.get<Scalar>(name); };
    auto vec = [&](const std::string& name) -> VectorX<Scalar> { return archive.get<Scalar>(name); };
    b.word_embeddings = mat("bert.embeddings.word_embeddings.weight");
    b.position_embeddings = mat("bert.embeddings.position_embeddings.weight");
    b.token_type_embeddings = mat("bert.embeddings.token_type_embeddings.weight");
    b.embedding_norm_gamma = vec("bert.embeddings.LayerNorm.weight");
    b.embedding_norm_beta = vec("bert.embeddings.LayerNorm.bias");
    for (int l = 0; l < b.config.layers; ++l) {
      const std::string p = "bert.encoder.layer." + std::to_string(l) + ".";
      BertLayerWeights<Scalar> w;
      w.query = mat(p + "attention.self.query.weight");
      w.query_bias = vec(p + "attention.self.query.bias");
      w.key = mat(p + "attention.self.key.weight");
      w.key_bias = vec(p + "attention.self.key.bias");
      w.value = mat(p + "attention.self.value.weight");
      w.value_bias = vec(p + "attention.self.value.bias");
      w.attention_out = mat(p + "attention.output.dense.weight");
      w.attention_out_bias = vec(p + "attention.output.dense.bias");
      w.attention_norm_gamma = vec(p + "attention.output.LayerNorm.weight");
      w.attention_norm_beta = vec(p + "attention.output.LayerNorm.bias");
      w.intermediate = mat(p + "intermediate.dense.weight");
      w.intermediate_bias = vec(p + "intermediate.dense.bias");
      w.output = mat(p + "output.dense.weight");
      w.output_bias = vec(p + "output.dense.bias");
      w.output_norm_gamma = vec(p + "output.LayerNorm.weight");
      w.output_norm_beta = vec(p + "output.LayerNorm.bias");
      b.layers.push_back(std::move(w));
    }
    b.pooler = mat("bert.pooler.dense.weight");
    b.pooler_bias = vec("bert.pooler.dense.bias");
    if (b.word_embeddings.cols() != b.config.hidden || b.pooler.rows() != b.config.hidden) {
      throw ArchiveError("pretrained encoder weights do not match bert_config.hidden");
    }
    return b;
  }

  void write(TensorArchive& archive) const {
    archive.metadata["bert_config"] = config;
    archive.put("bert.embeddings.word_embeddings.weight", word_embeddings);
    archive.put("bert.embeddings.position_embeddings.weight", position_embeddings);
    archive.put("bert.embeddings.token_type_embeddings.weight", token_type_embeddings);
    archive.put("bert.embeddings.LayerNorm.weight", embedding_norm_gamma);
    archive.put("bert.embeddings.LayerNorm.bias", embedding_norm_beta);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "bert.encoder.layer." + std::to_string(l) + ".";
      const auto& w = layers[l];
      archive.put(p + "attention.self.query.weight", w.query);
      archive.put(p + "attention.self.query.bias", w.query_bias);
      archive.put(p + "attention.self.key.weight", w.key);
      archive.put(p + "attention.self.key.bias", w.key_bias);
      archive.put(p + "attention.self.value.weight", w.value);
      archive.put(p + "attention.self.value.bias", w.value_bias);
      archive.put(p + "attention.output.dense.weight", w.attention_out);
      archive.put(p + "attention.output.dense.bias", w.attention_out_bias);
      archive.put(p + "attention.output.LayerNorm.weight", w.attention_norm_gamma);
      archive.put(p + "attention.output.LayerNorm.bias", w.attention_norm_beta);
      archive.put(p + "intermediate.dense.weight", w.intermediate);
      archive.put(p + "intermediate.dense.bias", w.intermediate_bias);
      archive.put(p + "output.dense.weight", w.output);
      archive.put(p + "output.dense.bias", w.output_bias);
      archive.put(p + "output.LayerNorm.weight", w.output_norm_gamma);
      archive.put(p + "output.LayerNorm.bias", w.output_norm_beta);
    }
    archive.put("bert.pooler.dense.weight", pooler);
    archive.put("bert.pooler.dense.bias", pooler_bias);
  }

  /// Final-layer token states, one row per token.
  MatrixX<Scalar> hidden_states(const TokenSequence& tokens) const {
    const auto n = static_cast<Eigen::Index>(tokens.size());
    if (n > config.max_position) throw std::invalid_argument("pretrained encoder: sequence longer than max_position");
    const int h = config.hidden;
    MatrixX<Scalar> x(n, h);
    for (Eigen::Index t = 0; t < n; ++t) {
      const int id = tokens.ids[static_cast<std::size_t>(t)];
      const int seg = tokens.segments.empty() ? 0 : tokens.segments[static_cast<std::size_t>(t)];
      if (id < 0 || id >= word_embeddings.rows()) throw std::out_of_range("pretrained encoder: token id out of range");
      x.row(t) = word_embeddings.row(id) + position_embeddings.row(t) + token_type_embeddings.row(seg);
    }
    layer_norm(x, embedding_norm_gamma, embedding_norm_beta);

    const int heads = config.heads;
    const int head_dim = h / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
    for (const auto& w : layers) {
      MatrixX<Scalar> q = (x * w.query.transpose()).rowwise() + w.query_bias.transpose();
      MatrixX<Scalar> k = (x * w.key.transpose()).rowwise() + w.key_bias.transpose();
      MatrixX<Scalar> v = (x * w.value.transpose()).rowwise() + w.value_bias.transpose();
      MatrixX<Scalar> context(n, h);
      for (int head = 0; head < heads; ++head) {
        auto qh = q.middleCols(head * head_dim, head_dim);
        auto kh = k.middleCols(head * head_dim, head_dim);
        MatrixX<Scalar> att = (qh * kh.transpose()) * scale;
        for (Eigen::Index i = 0; i < n; ++i) {
          const Scalar m = att.row(i).maxCoeff();
          att.row(i) = (att.row(i).array() - m).exp();
          att.row(i) /= att.row(i).sum();
        }
        context.middleCols(head * head_dim, head_dim).noalias() = att * v.middleCols(head * head_dim, head_dim);
      }
      MatrixX<Scalar> attended = (context * w.attention_out.transpose()).rowwise() + w.attention_out_bias.transpose();
      x += attended;
      layer_norm(x, w.attention_norm_gamma, w.attention_norm_beta);

      MatrixX<Scalar> inter = (x * w.intermediate.transpose()).rowwise() + w.intermediate_bias.transpose();
      inter = inter.unaryExpr([](Scalar u) {
        return Scalar(0.5) * u * (Scalar(1) + std::erf(u / std::sqrt(Scalar(2))));
      });
      MatrixX<Scalar> out = (inter * w.output.transpose()).rowwise() + w.output_bias.transpose();
      x += out;
      layer_norm(x, w.output_norm_gamma, w.output_norm_beta);
    }
    return x;
  }

  /// Pooled output: tanh(W h_first + b).
  VectorX<Scalar> encode(const TokenSequence& tokens) const {
    MatrixX<Scalar> states = hidden_states(tokens);
    VectorX<Scalar> first = states.row(0).transpose();
    return (pooler * first + pooler_bias).array().tanh().matrix();
  }

  /// Mean of the final-layer token states of `[CLS] text [SEP]`.
  VectorX<Scalar> mean_state(const std::vector<int>& ids, const Vocabulary& vocab) const {
    TokenSequence seq;
    seq.ids.push_back(vocab.bos());
    seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
    if (static_cast<int>(seq.ids.size()) > config.max_position - 1) seq.ids.resize(static_cast<std::size_t>(config.max_position - 1));
    seq.ids.push_back(vocab.eos());
    seq.segments.assign(seq.ids.size(), 0);
    return hidden_states(seq).colwise().mean().transpose();
  }

  int output_dim() const { return config.hidden; }

 private:
  void layer_norm(MatrixX<Scalar>& x, const VectorX<Scalar>& gamma, const VectorX<Scalar>& beta) const {
    const auto eps = static_cast<Scalar>(config.layer_norm_eps);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Scalar mean = x.row(i).mean();
      auto centered = (x.row(i).array() - mean).eval();
      const Scalar var = centered.square().mean();
      x.row(i) = (centered / std::sqrt(var + eps)).matrix().cwiseProduct(gamma.transpose()) + beta.transpose();
    }
  }
};

}  // namespace grade
