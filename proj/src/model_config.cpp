#include "grade/model_config.hpp"

#include <stdexcept>

#include "grade/bert_encoder.hpp"

namespace grade {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("model config: ") + what);
  };
  require(encoder_dim > 0, "encoder_dim must be positive");
  require(max_len >= 7, "max_len must be at least 7");
  if (encoder_profile == EncoderProfile::Toy) {
    require(vocab_size > 0, "toy encoder needs a vocabulary");
    require(token_dim > 0, "token_dim must be positive");
  } else {
    require(!pretrained_weights.empty(), "pretrained encoder needs pretrained_weights");
  }
  require(node_dim > 0, "node_dim must be positive");
  require(gat_layers >= 1, "gat_layers must be at least 1");
  require(heads >= 1 && node_dim % heads == 0, "heads must divide node_dim");
  require(hidden1 > 0 && hidden2 > 0, "hidden sizes must be positive");
  require(drop_rate >= 0.0 && drop_rate < 1.0, "drop_rate must be in [0, 1)");
  require(max_hop_depth >= 1, "max_hop_depth must be positive");
  for (int n : neighbor_limits) require(n > 0, "neighbor limits must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"encoder_profile", to_string(c.encoder_profile)},
                     {"vocab_size", c.vocab_size},
                     {"token_dim", c.token_dim},
                     {"encoder_dim", c.encoder_dim},
                     {"max_len", c.max_len},
                     {"pretrained_weights", c.pretrained_weights},
                     {"node_dim", c.node_dim},
                     {"neighbor_limits", c.neighbor_limits},
                     {"gat_layers", c.gat_layers},
                     {"heads", c.heads},
                     {"leaky_slope", c.leaky_slope},
                     {"hidden1", c.hidden1},
                     {"hidden2", c.hidden2},
                     {"drop_rate", c.drop_rate},
                     {"max_hop_depth", c.max_hop_depth},
                     {"neighbor_seed", c.neighbor_seed},
                     {"no_graph_branch", c.no_graph_branch},
                     {"no_khop", c.no_khop},
                     {"no_hop_attention", c.no_hop_attention}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.encoder_profile = parse_encoder_profile(j.at("encoder_profile").get<std::string>());
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("token_dim").get_to(c.token_dim);
  j.at("encoder_dim").get_to(c.encoder_dim);
  j.at("max_len").get_to(c.max_len);
  j.at("pretrained_weights").get_to(c.pretrained_weights);
  j.at("node_dim").get_to(c.node_dim);
  j.at("neighbor_limits").get_to(c.neighbor_limits);
  j.at("gat_layers").get_to(c.gat_layers);
  j.at("heads").get_to(c.heads);
  j.at("leaky_slope").get_to(c.leaky_slope);
  j.at("hidden1").get_to(c.hidden1);
  j.at("hidden2").get_to(c.hidden2);
  j.at("drop_rate").get_to(c.drop_rate);
  j.at("max_hop_depth").get_to(c.max_hop_depth);
  j.at("neighbor_seed").get_to(c.neighbor_seed);
  j.at("no_graph_branch").get_to(c.no_graph_branch);
  j.at("no_khop").get_to(c.no_khop);
  j.at("no_hop_attention").get_to(c.no_hop_attention);
}

void to_json(nlohmann::json& j, const BertConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},     {"hidden", c.hidden},
                     {"layers", c.layers},             {"heads", c.heads},
                     {"intermediate", c.intermediate}, {"max_position", c.max_position},
                     {"type_vocab", c.type_vocab},     {"layer_norm_eps", c.layer_norm_eps}};
}

void from_json(const nlohmann::json& j, BertConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("hidden").get_to(c.hidden);
  j.at("layers").get_to(c.layers);
  j.at("heads").get_to(c.heads);
  j.at("intermediate").get_to(c.intermediate);
  j.at("max_position").get_to(c.max_position);
  c.type_vocab = j.value("type_vocab", 2);
  c.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
}

}  // namespace grade
