#include "grade/io.hpp"

#include <fstream>
#include <sstream>

namespace grade {

namespace {

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::array<std::string, 2> read_context(const nlohmann::json& j) {
  const auto& c = j.at("context");
  if (!c.is_array() || c.size() != 2) throw std::invalid_argument("\"context\" must be an array of 2 strings");
  return {c[0].get<std::string>(), c[1].get<std::string>()};
}

}  // namespace

std::vector<Dialogue> read_dialogues(const std::filesystem::path& path) {
  std::vector<Dialogue> out;
  for_each_json_line(path, [&](const nlohmann::json& j) { out.push_back(j.at("utterances").get<Dialogue>()); });
  return out;
}

void write_tuples(const std::filesystem::path& path, const std::vector<TrainingTuple>& tuples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : tuples) {
    nlohmann::json j{{"context", t.context},
                     {"gold_response", t.gold_response},
                     {"negative_response", t.negative_response},
                     {"sampling_method", to_string(t.sampling_method)}};
    out << j.dump() << '\n';
  }
}

std::vector<TrainingTuple> read_tuples(const std::filesystem::path& path) {
  std::vector<TrainingTuple> out;
  for_each_json_line(path, [&](const nlohmann::json& j) {
    TrainingTuple t;
    t.context = read_context(j);
    t.gold_response = j.at("gold_response").get<std::string>();
    t.negative_response = j.at("negative_response").get<std::string>();
    t.sampling_method = parse_sampling_method(j.at("sampling_method").get<std::string>());
    t.validate();
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<EncoderInput> read_score_inputs(const std::filesystem::path& path) {
  std::vector<EncoderInput> out;
  for_each_json_line(path, [&](const nlohmann::json& j) {
    EncoderInput in{read_context(j), j.at("response").get<std::string>()};
    in.validate();
    out.push_back(std::move(in));
  });
  return out;
}

nlohmann::json scored_record(const ScoredPair& scored) {
  nlohmann::json j{{"context", scored.input.context}, {"response", scored.input.response}, {"score", scored.score}};
  if (scored.diagnostics) {
    const auto& d = *scored.diagnostics;
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : d.edges) {
      edges.push_back({{"context", d.context_keywords[static_cast<std::size_t>(e.context_index)]},
                       {"response", d.response_keywords[static_cast<std::size_t>(e.response_index)]},
                       {"weight", e.weight}});
    }
    j["diagnostics"] = {{"context_keywords", d.context_keywords},
                        {"response_keywords", d.response_keywords},
                        {"edges", edges},
                        {"final_attention", d.final_attention}};
  }
  return j;
}

std::vector<MetricScore> read_scored(const std::filesystem::path& path) {
  std::vector<MetricScore> out;
  for_each_json_line(path, [&](const nlohmann::json& j) {
    out.push_back({read_context(j), j.at("response").get<std::string>(), j.at("score").get<double>()});
  });
  return out;
}

nlohmann::json graph_json(const PreparedPair<double>& pair, const ForwardCache<double>& cache) {
  const auto& g = pair.graph;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& t : g.context.terms) nodes.push_back({{"term", t}, {"side", "context"}});
  for (const auto& t : g.response.terms) nodes.push_back({{"term", t}, {"side", "response"}});
  nlohmann::json edges = nlohmann::json::array();
  const int n = g.node_count();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (g.adjacency(i, j) != 0.0) edges.push_back({{"source", i}, {"target", j}, {"weight", g.adjacency(i, j)}});
  nlohmann::json out{{"context", pair.input.context}, {"response", pair.input.response}, {"nodes", nodes}, {"edges", edges}};
  if (cache.norm_adjacency.size() > 0) {
    std::vector<std::vector<double>> norm(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) norm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = cache.norm_adjacency(i, j);
    out["normalized_adjacency"] = norm;
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<JudgmentRecord> read_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto rows = parse_csv(in);
  if (rows.empty()) throw std::runtime_error(path.string() + ": empty judgment file");
  const auto& header = rows.front();
  const std::vector<std::string> expected{"context_1", "context_2", "response", "human_score"};
  if (header.size() < 4 || !std::equal(expected.begin(), expected.end(), header.begin())) {
    throw std::runtime_error(path.string() + ": header must start with context_1,context_2,response,human_score");
  }
  std::vector<JudgmentRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                               " fields, expected " + std::to_string(header.size()));
    }
    JudgmentRecord j;
    j.context = {row[0], row[1]};
    j.response = row[2];
    try {
      j.human_score = std::stod(row[3]);
      for (std::size_t k = 4; k < row.size(); ++k)
        if (header[k].starts_with("annotator") && !row[k].empty()) j.annotator_scores.push_back(std::stod(row[k]));
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(r + 1) + ": bad score");
    }
    j.validate();
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace grade
