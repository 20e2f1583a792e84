#pragma once

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "grade/dense.hpp"

namespace grade {

using NeighborSets = std::vector<std::vector<int>>;

/// One attention layer. `attention` stacks the source half and the target
/// half of a_l: a_l^T [W h_i || W h_j] = a_src . W h_i + a_dst . W h_j.
template <typename Scalar>
struct GatLayerParams {
  MatrixX<Scalar> transform;    // W_l, d x d
  VectorX<Scalar> attention;    // a_l, 2d
  MatrixX<Scalar> combination;  // V_l, d x d

  Eigen::Index dim() const { return transform.rows(); }

  static GatLayerParams zeros(Eigen::Index dim) {
    return {MatrixX<Scalar>::Zero(dim, dim), VectorX<Scalar>::Zero(2 * dim), MatrixX<Scalar>::Zero(dim, dim)};
  }
};

struct GatOptions {
  int heads = 4;
  double leaky_slope = 0.2;
};

/// Forward intermediates of one layer, kept for the backward pass.
template <typename Scalar>
struct GatLayerCache {
  MatrixX<Scalar> input;                // h^(l), n x d
  MatrixX<Scalar> transformed;          // rows W_l h_j
  MatrixX<Scalar> pre_activation;       // V_l h_i + z_i
  std::vector<MatrixX<Scalar>> scores;  // per head, a_l^T[..] before LeakyReLU
  std::vector<MatrixX<Scalar>> alpha;   // per head, n x n
};

namespace detail {

inline void check_heads(Eigen::Index dim, int heads) {
  if (heads < 1 || dim % heads != 0) {
    throw std::invalid_argument("GAT: heads must divide the feature dimension");
  }
}

/// Per-head softmax of e_ij = abar_ij * LeakyReLU(s_ij) over active neighbors.
template <typename Scalar>
void attention_for_head(const MatrixX<Scalar>& transformed, const MatrixX<Scalar>& norm_adjacency,
                        const GatLayerParams<Scalar>& params, const NeighborSets& neighbors, Eigen::Index head,
                        Eigen::Index head_dim, Scalar slope, MatrixX<Scalar>& scores, MatrixX<Scalar>& alpha) {
  const Eigen::Index n = transformed.rows();
  const Eigen::Index dim = transformed.cols();
  auto block = transformed.middleCols(head * head_dim, head_dim);
  VectorX<Scalar> src = block * params.attention.segment(head * head_dim, head_dim);
  VectorX<Scalar> dst = block * params.attention.segment(dim + head * head_dim, head_dim);

  scores = MatrixX<Scalar>::Zero(n, n);
  alpha = MatrixX<Scalar>::Zero(n, n);
  std::vector<Scalar> e;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& nbrs = neighbors[static_cast<std::size_t>(i)];
    if (nbrs.empty()) continue;
    e.resize(nbrs.size());
    Scalar max_e = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t t = 0; t < nbrs.size(); ++t) {
      const int j = nbrs[t];
      const Scalar s = src(i) + dst(j);
      scores(i, j) = s;
      e[t] = norm_adjacency(i, j) * leaky_relu(s, slope);
      max_e = std::max(max_e, e[t]);
    }
    Scalar total(0);
    for (auto& v : e) {
      v = std::exp(v - max_e);
      total += v;
    }
    for (std::size_t t = 0; t < nbrs.size(); ++t) alpha(i, nbrs[t]) = e[t] / total;
  }
}

}  // namespace detail

/// Attention coefficients alpha_ij, one n x n matrix per head; zero outside
/// the active neighborhoods.
template <typename Scalar>
std::vector<MatrixX<Scalar>> attention_coefficients(const MatrixX<Scalar>& h, const MatrixX<Scalar>& norm_adjacency,
                                                    const GatLayerParams<Scalar>& params,
                                                    const NeighborSets& neighbors, const GatOptions& options = {}) {
  detail::check_heads(params.dim(), options.heads);
  const Eigen::Index head_dim = params.dim() / options.heads;
  MatrixX<Scalar> transformed = h * params.transform.transpose();
  std::vector<MatrixX<Scalar>> alpha(static_cast<std::size_t>(options.heads));
  MatrixX<Scalar> scores;
  for (int k = 0; k < options.heads; ++k) {
    detail::attention_for_head(transformed, norm_adjacency, params, neighbors, k, head_dim,
                               static_cast<Scalar>(options.leaky_slope), scores, alpha[static_cast<std::size_t>(k)]);
  }
  return alpha;
}

/// h^(l+1) = ELU(V_l h^(l) + z), z_i = sum_j alpha_ij W_l h_j with heads
/// concatenated. Nodes without active neighbors get z_i = 0.
template <typename Scalar>
MatrixX<Scalar> gat_layer(const MatrixX<Scalar>& h, const MatrixX<Scalar>& norm_adjacency,
                          const GatLayerParams<Scalar>& params, const NeighborSets& neighbors,
                          const GatOptions& options = {}, GatLayerCache<Scalar>* cache = nullptr) {
  const Eigen::Index n = h.rows();
  const Eigen::Index dim = params.dim();
  if (h.cols() != dim || params.combination.rows() != dim || params.attention.size() != 2 * dim) {
    throw std::invalid_argument("gat_layer: feature dimension mismatch");
  }
  if (norm_adjacency.rows() != n || norm_adjacency.cols() != n || static_cast<Eigen::Index>(neighbors.size()) != n) {
    throw std::invalid_argument("gat_layer: graph size mismatch");
  }
  detail::check_heads(dim, options.heads);
  const Eigen::Index head_dim = dim / options.heads;

  GatLayerCache<Scalar> local;
  GatLayerCache<Scalar>& c = cache ? *cache : local;
  c.input = h;
  c.transformed.noalias() = h * params.transform.transpose();
  c.scores.resize(static_cast<std::size_t>(options.heads));
  c.alpha.resize(static_cast<std::size_t>(options.heads));

  c.pre_activation.noalias() = h * params.combination.transpose();
  for (int k = 0; k < options.heads; ++k) {
    auto& alpha = c.alpha[static_cast<std::size_t>(k)];
    detail::attention_for_head(c.transformed, norm_adjacency, params, neighbors, k, head_dim,
                               static_cast<Scalar>(options.leaky_slope), c.scores[static_cast<std::size_t>(k)], alpha);
    c.pre_activation.middleCols(k * head_dim, head_dim).noalias() +=
        alpha * c.transformed.middleCols(k * head_dim, head_dim);
  }
  return elu(c.pre_activation);
}

/// Accumulates parameter gradients into `grad` and returns dL/dh^(l).
template <typename Scalar>
MatrixX<Scalar> gat_layer_backward(const GatLayerCache<Scalar>& c, const MatrixX<Scalar>& grad_output,
                                   const MatrixX<Scalar>& norm_adjacency, const GatLayerParams<Scalar>& params,
                                   const NeighborSets& neighbors, const GatOptions& options,
                                   GatLayerParams<Scalar>& grad) {
  const Eigen::Index n = c.input.rows();
  const Eigen::Index dim = params.dim();
  const Eigen::Index head_dim = dim / options.heads;
  const auto slope = static_cast<Scalar>(options.leaky_slope);

  MatrixX<Scalar> d_pre = grad_output.cwiseProduct(elu_grad(c.pre_activation));
  grad.combination.noalias() += d_pre.transpose() * c.input;
  MatrixX<Scalar> d_input = d_pre * params.combination;

  MatrixX<Scalar> d_transformed = MatrixX<Scalar>::Zero(n, dim);
  for (int k = 0; k < options.heads; ++k) {
    const auto& alpha = c.alpha[static_cast<std::size_t>(k)];
    const auto& scores = c.scores[static_cast<std::size_t>(k)];
    auto block = c.transformed.middleCols(k * head_dim, head_dim);
    auto d_z = d_pre.middleCols(k * head_dim, head_dim);

    d_transformed.middleCols(k * head_dim, head_dim).noalias() += alpha.transpose() * d_z;
    MatrixX<Scalar> d_alpha = d_z * block.transpose();

    VectorX<Scalar> d_src = VectorX<Scalar>::Zero(n);
    VectorX<Scalar> d_dst = VectorX<Scalar>::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& nbrs = neighbors[static_cast<std::size_t>(i)];
      if (nbrs.empty()) continue;
      Scalar dot(0);
      for (int j : nbrs) dot += alpha(i, j) * d_alpha(i, j);
      for (int j : nbrs) {
        const Scalar d_e = alpha(i, j) * (d_alpha(i, j) - dot);
        const Scalar d_s = d_e * norm_adjacency(i, j) * leaky_relu_grad(scores(i, j), slope);
        d_src(i) += d_s;
        d_dst(j) += d_s;
      }
    }
    auto a_src = params.attention.segment(k * head_dim, head_dim);
    auto a_dst = params.attention.segment(dim + k * head_dim, head_dim);
    grad.attention.segment(k * head_dim, head_dim).noalias() += block.transpose() * d_src;
    grad.attention.segment(dim + k * head_dim, head_dim).noalias() += block.transpose() * d_dst;
    d_transformed.middleCols(k * head_dim, head_dim).noalias() +=
        d_src * a_src.transpose() + d_dst * a_dst.transpose();
  }
  grad.transform.noalias() += d_transformed.transpose() * c.input;
  d_input.noalias() += d_transformed * params.transform;
  return d_input;
}

/// L attention layers followed by mean pooling and FC_0 with ELU.
template <typename Scalar>
struct GraphHead {
  std::vector<GatLayerParams<Scalar>> layers;
  MatrixX<Scalar> pool_weight;  // FC_0
  VectorX<Scalar> pool_bias;

  static GraphHead zeros(int layer_count, Eigen::Index dim) {
    GraphHead g;
    g.layers.assign(static_cast<std::size_t>(layer_count), GatLayerParams<Scalar>::zeros(dim));
    g.pool_weight = MatrixX<Scalar>::Zero(dim, dim);
    g.pool_bias = VectorX<Scalar>::Zero(dim);
    return g;
  }

  static GraphHead random(int layer_count, Eigen::Index dim, std::mt19937_64& rng) {
    GraphHead g;
    for (int l = 0; l < layer_count; ++l) {
      g.layers.push_back({glorot<Scalar>(dim, dim, rng), glorot<Scalar>(2 * dim, 1, rng), glorot<Scalar>(dim, dim, rng)});
    }
    g.pool_weight = glorot<Scalar>(dim, dim, rng);
    g.pool_bias = VectorX<Scalar>::Zero(dim);
    return g;
  }
};

template <typename Scalar>
struct GraphHeadCache {
  std::vector<GatLayerCache<Scalar>> layers;
  VectorX<Scalar> pooled;      // mean of h^(L)
  VectorX<Scalar> pool_pre;    // FC_0 pre-activation
  Eigen::Index node_count = 0;
};

/// v_g = ELU(FC_0(mean_i h_i^(L))).
template <typename Scalar>
VectorX<Scalar> pool_graph(const MatrixX<Scalar>& h, const MatrixX<Scalar>& weight, const VectorX<Scalar>& bias,
                           VectorX<Scalar>* pooled = nullptr, VectorX<Scalar>* pre = nullptr) {
  if (h.rows() == 0) throw std::invalid_argument("pool_graph: graph has no nodes");
  VectorX<Scalar> mean = h.colwise().mean().transpose();
  VectorX<Scalar> z = weight * mean + bias;
  if (pooled) *pooled = mean;
  if (pre) *pre = z;
  return elu(z);
}

template <typename Scalar>
VectorX<Scalar> graph_head_forward(const GraphHead<Scalar>& head, const MatrixX<Scalar>& features,
                                   const MatrixX<Scalar>& norm_adjacency, const NeighborSets& neighbors,
                                   const GatOptions& options, GraphHeadCache<Scalar>* cache = nullptr) {
  GraphHeadCache<Scalar> local;
  GraphHeadCache<Scalar>& c = cache ? *cache : local;
  c.layers.resize(head.layers.size());
  c.node_count = features.rows();
  MatrixX<Scalar> h = features;
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    h = gat_layer(h, norm_adjacency, head.layers[l], neighbors, options, &c.layers[l]);
  }
  return pool_graph(h, head.pool_weight, head.pool_bias, &c.pooled, &c.pool_pre);
}

/// Accumulates into `grad`; returns dL/d(initial node features).
template <typename Scalar>
MatrixX<Scalar> graph_head_backward(const GraphHeadCache<Scalar>& c, const VectorX<Scalar>& grad_vg,
                                    const GraphHead<Scalar>& head, const MatrixX<Scalar>& norm_adjacency,
                                    const NeighborSets& neighbors, const GatOptions& options, GraphHead<Scalar>& grad) {
  VectorX<Scalar> d_pre = grad_vg.cwiseProduct(elu_grad(c.pool_pre));
  grad.pool_weight.noalias() += d_pre * c.pooled.transpose();
  grad.pool_bias += d_pre;
  VectorX<Scalar> d_mean = head.pool_weight.transpose() * d_pre;
  MatrixX<Scalar> d_h = (d_mean / static_cast<Scalar>(c.node_count)).transpose().replicate(c.node_count, 1);
  for (std::size_t l = head.layers.size(); l-- > 0;) {
    d_h = gat_layer_backward(c.layers[l], d_h, norm_adjacency, head.layers[l], neighbors, options, grad.layers[l]);
  }
  return d_h;
}

}  // namespace grade
