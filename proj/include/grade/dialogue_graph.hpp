#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "grade/concept_graph.hpp"
#include "grade/dense.hpp"
#include "grade/keywords.hpp"

namespace grade {

/// W_k (one d x d matrix per hop) and the shared bias b of the k-hop
/// neighboring-representation update.
template <typename Scalar>
struct NodeInitParams {
  std::vector<MatrixX<Scalar>> hop_weights;
  VectorX<Scalar> bias;

  int max_hops() const { return static_cast<int>(hop_weights.size()); }

  static NodeInitParams zeros(int hops, int dim) {
    NodeInitParams p;
    p.hop_weights.assign(static_cast<std::size_t>(hops), MatrixX<Scalar>::Zero(dim, dim));
    p.bias = VectorX<Scalar>::Zero(dim);
    return p;
  }
};

struct GraphOptions {
  std::vector<int> neighbor_limits{10, 10};  // N_k, one entry per hop
  bool khop = true;                          // false: features are the raw embeddings
  bool hop_attention = true;                 // false: 0/1 reachability weights
  int max_depth = ConceptNetSnapshot::kDefaultMaxDepth;
  std::uint64_t neighbor_seed = 0;
};

/// Parameter-independent part of a dialogue graph. Rows are context keywords
/// followed by response keywords.
template <typename Scalar>
struct GraphInputs {
  KeywordList context;
  KeywordList response;
  MatrixX<Scalar> base;                      // CN(t_i), zero row when OOV
  std::vector<MatrixX<Scalar>> shell_means;  // mean CN over the exact k-hop shell
  MatrixX<Scalar> adjacency;                 // A, before edge dropping

  int context_count() const { return static_cast<int>(context.size()); }
  int node_count() const { return static_cast<int>(context.size() + response.size()); }
  bool degenerate() const { return context.empty() || response.empty(); }
};

/// A[i][j] = 1/#hops across the context/response cut; 0 within a side and for
/// unreachable pairs. Identical terms on both sides get weight 1.
template <typename Scalar = double>
MatrixX<Scalar> edge_weights(const KeywordList& context, const KeywordList& response,
                             const ConceptNetSnapshot& snapshot, bool hop_attention = true,
                             int max_depth = ConceptNetSnapshot::kDefaultMaxDepth) {
  const auto p = static_cast<Eigen::Index>(context.size());
  const auto q = static_cast<Eigen::Index>(response.size());
  MatrixX<Scalar> a = MatrixX<Scalar>::Zero(p + q, p + q);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      const auto& ti = context.terms[static_cast<std::size_t>(i)];
      const auto& tj = response.terms[static_cast<std::size_t>(j)];
      Scalar w(0);
      if (ti == tj) {
        w = Scalar(1);
      } else if (auto hops = snapshot.hop_distance(ti, tj, max_depth)) {
        w = hop_attention ? Scalar(1) / static_cast<Scalar>(*hops) : Scalar(1);
      }
      a(i, p + j) = w;
      a(p + j, i) = w;
    }
  }
  return a;
}

/// Zeroes each undirected edge independently with probability `drop_rate`.
template <typename Derived>
auto drop_edges(const Eigen::MatrixBase<Derived>& adjacency, double drop_rate, std::uint64_t seed) {
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) {
    throw std::invalid_argument("drop_edges: drop_rate must be in [0, 1), got " + std::to_string(drop_rate));
  }
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = adjacency;
  if (drop_rate == 0.0) return out;
  std::mt19937_64 rng(seed);
  const Eigen::Index n = out.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (out(i, j) == Scalar(0)) continue;
      if (uniform01(rng) < drop_rate) {
        out(i, j) = Scalar(0);
        out(j, i) = Scalar(0);
      }
    }
  }
  return out;
}

/// (D + I)^{-1/2} (A + I) (D + I)^{-1/2} with D the weighted degree of A.
template <typename Derived>
auto normalize_adjacency(const Eigen::MatrixBase<Derived>& adjacency) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = adjacency.rows();
  VectorX<Scalar> inv_sqrt = (adjacency.rowwise().sum().array() + Scalar(1)).rsqrt();
  MatrixX<Scalar> augmented = adjacency + MatrixX<Scalar>::Identity(n, n);
  MatrixX<Scalar> out = inv_sqrt.asDiagonal() * augmented * inv_sqrt.asDiagonal();
  return out;
}

/// Looks up base embeddings, k-hop shell means and hop-attention weights.
template <typename Scalar>
GraphInputs<Scalar> prepare_graph(KeywordList context, KeywordList response,
                                  const ConceptNetSnapshot& snapshot, const GraphOptions& options) {
  context.origin = Origin::Context;
  response.origin = Origin::Response;
  GraphInputs<Scalar> g;
  g.context = std::move(context);
  g.response = std::move(response);

  const int n = g.node_count();
  const int dim = snapshot.dimension();
  const int hops = options.khop ? static_cast<int>(options.neighbor_limits.size()) : 0;

  auto term_at = [&](int i) -> const std::string& {
    return i < g.context_count() ? g.context.terms[static_cast<std::size_t>(i)]
                                 : g.response.terms[static_cast<std::size_t>(i - g.context_count())];
  };

  g.base = MatrixX<Scalar>::Zero(n, dim);
  g.shell_means.assign(static_cast<std::size_t>(hops), MatrixX<Scalar>::Zero(n, dim));
  for (int i = 0; i < n; ++i) {
    auto id = snapshot.find(term_at(i));
    if (!id) continue;
    if (auto e = snapshot.embedding(*id)) g.base.row(i) = e->template cast<Scalar>().transpose();
    for (int k = 1; k <= hops; ++k) {
      auto shell = snapshot.k_hop_neighbor_ids(*id, k, options.neighbor_limits[static_cast<std::size_t>(k - 1)],
                                               options.neighbor_seed);
      VectorX<Scalar> sum = VectorX<Scalar>::Zero(dim);
      int count = 0;
      for (auto t : shell) {
        if (auto e = snapshot.embedding(t)) {
          sum += e->template cast<Scalar>();
          ++count;
        }
      }
      if (count > 0) g.shell_means[static_cast<std::size_t>(k - 1)].row(i) = (sum / Scalar(count)).transpose();
    }
  }
  g.adjacency = edge_weights<Scalar>(g.context, g.response, snapshot, options.hop_attention, options.max_depth);
  return g;
}

/// h_bar_i = h_i + sum_k (W_k mean_k + b). With no hop weights this is h_i.
template <typename Scalar>
MatrixX<Scalar> init_node_features(const GraphInputs<Scalar>& inputs, const NodeInitParams<Scalar>& params) {
  MatrixX<Scalar> h = inputs.base;
  const auto hops = std::min(inputs.shell_means.size(), params.hop_weights.size());
  if (inputs.shell_means.size() != params.hop_weights.size() && !params.hop_weights.empty()) {
    throw std::invalid_argument("init_node_features: hop count of params and inputs differ");
  }
  for (std::size_t k = 0; k < hops; ++k) {
    if (params.hop_weights[k].rows() != h.cols()) {
      throw std::invalid_argument("init_node_features: W_k dimension does not match embeddings");
    }
    h.noalias() += inputs.shell_means[k] * params.hop_weights[k].transpose();
    h.rowwise() += params.bias.transpose();
  }
  return h;
}

template <typename Scalar>
MatrixX<Scalar> init_node_features(const KeywordList& context, const KeywordList& response,
                                   const ConceptNetSnapshot& snapshot, const NodeInitParams<Scalar>& params,
                                   const std::vector<int>& limits, std::uint64_t neighbor_seed = 0) {
  if (static_cast<int>(limits.size()) != params.max_hops()) {
    throw std::invalid_argument("init_node_features: need one neighbor limit per hop");
  }
  GraphOptions options;
  options.neighbor_limits = limits;
  options.khop = !limits.empty();
  options.neighbor_seed = neighbor_seed;
  return init_node_features(prepare_graph<Scalar>(context, response, snapshot, options), params);
}

/// Neighbor lists derived from the nonzero pattern of a (possibly dropped) A.
template <typename Derived>
std::vector<std::vector<int>> active_neighbors(const Eigen::MatrixBase<Derived>& adjacency) {
  using Scalar = typename Derived::Scalar;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(adjacency.rows()));
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j)
      if (i != j && adjacency(i, j) != Scalar(0)) out[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
  return out;
}

}  // namespace grade
