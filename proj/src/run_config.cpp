#include "grade/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace grade {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field path_field(Member member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return (c.*member).string(); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["concept_graph_dir"] = path_field(&RunConfig::concept_graph_dir);
    t["corpus"] = path_field(&RunConfig::corpus);
    t["tuples"] = path_field(&RunConfig::tuples);
    t["vocabulary"] = path_field(&RunConfig::vocabulary);
    t["idf"] = path_field(&RunConfig::idf);
    t["stopwords"] = path_field(&RunConfig::stopwords);
    t["checkpoint"] = path_field(&RunConfig::checkpoint);
    t["output_dir"] = path_field(&RunConfig::output_dir);
    t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                   c.seed = static_cast<std::uint64_t>(parse_int(k, v));
                   c.train.seed = c.seed;
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    t["keywords.threshold"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.keyword_threshold = parse_double(k, v);
                               },
                               [](const RunConfig& c) { return fmt(c.keyword_threshold); }};

    auto int_field = [](auto get_ref) -> Field {
      return {[get_ref](RunConfig& c, const std::string& k, const std::string& v) {
                get_ref(c) = static_cast<std::remove_reference_t<decltype(get_ref(c))>>(parse_int(k, v));
              },
              [get_ref](const RunConfig& c) { return std::to_string(get_ref(const_cast<RunConfig&>(c))); }};
    };
    auto double_field = [](auto get_ref) -> Field {
      return {[get_ref](RunConfig& c, const std::string& k, const std::string& v) { get_ref(c) = parse_double(k, v); },
              [get_ref](const RunConfig& c) { return fmt(get_ref(const_cast<RunConfig&>(c))); }};
    };
    auto bool_field = [](auto get_ref) -> Field {
      return {[get_ref](RunConfig& c, const std::string& k, const std::string& v) { get_ref(c) = parse_bool(k, v); },
              [get_ref](const RunConfig& c) {
                return std::string(get_ref(const_cast<RunConfig&>(c)) ? "true" : "false");
              }};
    };

    t["encoder.profile"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                              c.model.encoder_profile = parse_encoder_profile(v);
                            },
                            [](const RunConfig& c) { return to_string(c.model.encoder_profile); }};
    t["encoder.pretrained_weights"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.model.pretrained_weights = v; },
        [](const RunConfig& c) { return c.model.pretrained_weights; }};
    t["encoder.token_dim"] = int_field([](RunConfig& c) -> int& { return c.model.token_dim; });
    t["encoder.dim"] = int_field([](RunConfig& c) -> int& { return c.model.encoder_dim; });
    t["encoder.max_len"] = int_field([](RunConfig& c) -> int& { return c.model.max_len; });
    t["model.node_dim"] = int_field([](RunConfig& c) -> int& { return c.model.node_dim; });
    t["model.gat_layers"] = int_field([](RunConfig& c) -> int& { return c.model.gat_layers; });
    t["model.heads"] = int_field([](RunConfig& c) -> int& { return c.model.heads; });
    t["model.hidden1"] = int_field([](RunConfig& c) -> int& { return c.model.hidden1; });
    t["model.hidden2"] = int_field([](RunConfig& c) -> int& { return c.model.hidden2; });
    t["model.leaky_slope"] = double_field([](RunConfig& c) -> double& { return c.model.leaky_slope; });
    t["model.max_hop_depth"] = int_field([](RunConfig& c) -> int& { return c.model.max_hop_depth; });
    t["model.neighbor_seed"] = int_field([](RunConfig& c) -> std::uint64_t& { return c.model.neighbor_seed; });
    t["model.neighbor_limits"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          std::vector<int> limits;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) limits.push_back(static_cast<int>(parse_int(k, item)));
          }
          c.model.neighbor_limits = std::move(limits);
        },
        [](const RunConfig& c) {
          std::string s;
          for (int n : c.model.neighbor_limits) s += (s.empty() ? "" : ",") + std::to_string(n);
          return s;
        }};
    t["train.drop_rate"] = double_field([](RunConfig& c) -> double& { return c.model.drop_rate; });
    t["train.margin"] = double_field([](RunConfig& c) -> double& { return c.train.margin; });
    t["train.learning_rate"] = double_field([](RunConfig& c) -> double& { return c.train.learning_rate; });
    t["train.beta1"] = double_field([](RunConfig& c) -> double& { return c.train.beta1; });
    t["train.beta2"] = double_field([](RunConfig& c) -> double& { return c.train.beta2; });
    t["train.epsilon"] = double_field([](RunConfig& c) -> double& { return c.train.epsilon; });
    t["train.batch_size"] = int_field([](RunConfig& c) -> int& { return c.train.batch_size; });
    t["train.epochs"] = int_field([](RunConfig& c) -> int& { return c.train.epochs; });
    t["ablation.no_graph_branch"] = bool_field([](RunConfig& c) -> bool& { return c.model.no_graph_branch; });
    t["ablation.no_khop"] = bool_field([](RunConfig& c) -> bool& { return c.model.no_khop; });
    t["ablation.no_hop_attention"] = bool_field([](RunConfig& c) -> bool& { return c.model.no_hop_attention; });
    return t;
  }();
  return table;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.train.epochs = 1;
  return c;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> RunConfig::parse_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (!fields().contains(key)) throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(*this, key, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) set(k, v);
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, f] : fields()) out[name] = f.get(*this);
  return out;
}

std::string RunConfig::dump() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_map()) os << k << " = " << v << '\n';
  return os.str();
}

}  // namespace grade
