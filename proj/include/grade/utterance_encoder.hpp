#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "grade/dense.hpp"
#include "grade/vocabulary.hpp"

namespace grade {

enum class EncoderProfile { Toy, Pretrained };

EncoderProfile parse_encoder_profile(std::string_view name);
std::string to_string(EncoderProfile profile);

/// Two context utterances and a candidate response.
struct EncoderInput {
  std::array<std::string, 2> context;
  std::string response;

  /// Throws std::invalid_argument when any field is blank.
  void validate() const;
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> segments;  // 0 for context tokens, 1 for response tokens

  std::size_t size() const { return ids.size(); }
};

/// `bos u1 sep u2 sep response eos`, at most `max_len` ids. Over-long input is
/// cut from the end of the response first, then from the front of the older
/// context utterance, then the newer one; each part keeps at least one token.
TokenSequence serialize(const EncoderInput& input, const Vocabulary& vocab, int max_len, bool wordpiece = false);

/// Ids of a single utterance without special tokens.
std::vector<int> utterance_ids(std::string_view text, const Vocabulary& vocab, bool wordpiece = false);

/// Desk-scale encoder: mean of learned token embeddings, then an affine map.
template <typename Scalar>
struct ToyEncoderParams {
  MatrixX<Scalar> token_embedding;  // vocab x token_dim
  MatrixX<Scalar> projection;       // d_c x token_dim
  VectorX<Scalar> projection_bias;  // d_c

  Eigen::Index output_dim() const { return projection.rows(); }

  static ToyEncoderParams random(int vocab_size, int token_dim, int output_dim, std::mt19937_64& rng) {
    ToyEncoderParams p;
    p.token_embedding = glorot<Scalar>(vocab_size, token_dim, rng);
    p.projection = glorot<Scalar>(output_dim, token_dim, rng);
    p.projection_bias = VectorX<Scalar>::Zero(output_dim);
    return p;
  }
};

template <typename Scalar>
VectorX<Scalar> mean_token_state(const ToyEncoderParams<Scalar>& params, const std::vector<int>& ids) {
  VectorX<Scalar> pooled = VectorX<Scalar>::Zero(params.token_embedding.cols());
  if (ids.empty()) return pooled;
  for (int id : ids) pooled += params.token_embedding.row(id).transpose();
  return pooled / static_cast<Scalar>(ids.size());
}

/// v_c = P mean(E[ids]) + p. `pooled` receives the mean for the backward pass.
template <typename Scalar>
VectorX<Scalar> encode_toy(const ToyEncoderParams<Scalar>& params, const TokenSequence& tokens,
                           VectorX<Scalar>* pooled = nullptr) {
  for (int id : tokens.ids) {
    if (id < 0 || id >= params.token_embedding.rows()) throw std::out_of_range("encode_toy: token id out of range");
  }
  VectorX<Scalar> mean = mean_token_state(params, tokens.ids);
  VectorX<Scalar> out = params.projection * mean + params.projection_bias;
  if (pooled) *pooled = std::move(mean);
  return out;
}

template <typename Scalar>
void encode_toy_backward(const ToyEncoderParams<Scalar>& params, const TokenSequence& tokens,
                         const VectorX<Scalar>& pooled, const VectorX<Scalar>& grad_vc, ToyEncoderParams<Scalar>& grad) {
  grad.projection.noalias() += grad_vc * pooled.transpose();
  grad.projection_bias += grad_vc;
  if (tokens.ids.empty()) return;
  VectorX<Scalar> d_mean = params.projection.transpose() * grad_vc / static_cast<Scalar>(tokens.ids.size());
  for (int id : tokens.ids) grad.token_embedding.row(id) += d_mean.transpose();
}

}  // namespace grade
