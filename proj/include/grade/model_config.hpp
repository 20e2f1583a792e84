#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grade/dialogue_graph.hpp"
#include "grade/graph_reasoning.hpp"
#include "grade/utterance_encoder.hpp"

namespace grade {

/// Architecture and ablation switches of a coherence model.
struct ModelConfig {
  EncoderProfile encoder_profile = EncoderProfile::Toy;
  int vocab_size = 0;    // toy profile: size of the token vocabulary
  int token_dim = 32;    // toy profile: token embedding width
  int encoder_dim = 32;  // d_c; the pretrained profile uses its hidden size
  int max_len = 128;
  std::string pretrained_weights;  // tensor archive with `bert.*` weights

  int node_dim = 300;
  std::vector<int> neighbor_limits{10, 10};  // N_1..N_K
  int gat_layers = 3;
  int heads = 4;
  double leaky_slope = 0.2;
  int hidden1 = 512;
  int hidden2 = 128;

  double drop_rate = 0.2;
  int max_hop_depth = 6;
  std::uint64_t neighbor_seed = 0;

  bool no_graph_branch = false;
  bool no_khop = false;
  bool no_hop_attention = false;

  int max_hops() const { return static_cast<int>(neighbor_limits.size()); }
  bool uses_graph() const { return !no_graph_branch; }
  bool uses_khop() const { return uses_graph() && !no_khop && max_hops() > 0; }

  GraphOptions graph_options() const {
    GraphOptions o;
    o.neighbor_limits = neighbor_limits;
    o.khop = uses_khop();
    o.hop_attention = !no_hop_attention;
    o.max_depth = max_hop_depth;
    o.neighbor_seed = neighbor_seed;
    return o;
  }
  GatOptions gat_options() const { return {heads, leaky_slope}; }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace grade
