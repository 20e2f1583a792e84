#include "grade/concept_graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace grade {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  return s;
}

bool is_integer(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string error_at(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
  std::ostringstream os;
  os << path.string() << ":" << line_no << ": " << what;
  return os.str();
}

}  // namespace

ConceptNetSnapshot ConceptNetSnapshot::load(const std::filesystem::path& edges_path,
                                            const std::filesystem::path& embeddings_path) {
  std::vector<std::pair<std::string, std::string>> edges;
  {
    std::ifstream in(edges_path);
    if (!in) throw LoadError("cannot open edge file " + edges_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view = trim_cr(line);
      if (view.empty()) continue;
      auto tab = view.find('\t');
      if (tab == std::string_view::npos || view.find('\t', tab + 1) != std::string_view::npos ||
          tab == 0 || tab + 1 == view.size()) {
        throw LoadError(error_at(edges_path, line_no, "malformed edge line, expected term_a<TAB>term_b"));
      }
      edges.emplace_back(std::string(view.substr(0, tab)), std::string(view.substr(tab + 1)));
    }
  }

  std::vector<std::pair<std::string, std::vector<float>>> embeddings;
  {
    std::ifstream in(embeddings_path);
    if (!in) throw LoadError("cannot open embedding file " + embeddings_path.string());
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> dim;
    while (std::getline(in, line)) {
      ++line_no;
      auto fields = split_ws(line);
      if (fields.empty()) continue;
      if (line_no == 1 && fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) {
        dim = std::stoul(std::string(fields[1]));
        continue;
      }
      if (fields.size() < 2) {
        throw LoadError(error_at(embeddings_path, line_no, "malformed embedding line"));
      }
      std::vector<float> values(fields.size() - 1);
      for (std::size_t k = 1; k < fields.size(); ++k) {
        auto f = fields[k];
        auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[k - 1]);
        if (ec != std::errc() || ptr != f.data() + f.size()) {
          throw LoadError(error_at(embeddings_path, line_no, "malformed number '" + std::string(f) + "'"));
        }
      }
      if (!dim) dim = values.size();
      if (values.size() != *dim) {
        throw LoadError(error_at(embeddings_path, line_no,
                                 "dimension mismatch: expected " + std::to_string(*dim) + ", got " +
                                     std::to_string(values.size())));
      }
      embeddings.emplace_back(std::string(fields[0]), std::move(values));
    }
  }
  return from_parts(edges, embeddings);
}

ConceptNetSnapshot ConceptNetSnapshot::load_dir(const std::filesystem::path& dir) {
  return load(dir / kEdgesFile, dir / kEmbeddingsFile);
}

ConceptNetSnapshot ConceptNetSnapshot::from_parts(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::vector<std::pair<std::string, std::vector<float>>>& embeddings) {
  ConceptNetSnapshot snap;

  std::set<std::string> all_terms;
  for (const auto& [a, b] : edges) {
    all_terms.insert(a);
    all_terms.insert(b);
  }
  std::size_t dim = 0;
  for (const auto& [t, v] : embeddings) {
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw LoadError("dimension mismatch for term '" + t + "'");
    all_terms.insert(t);
  }

  snap.terms_.assign(all_terms.begin(), all_terms.end());
  snap.index_.reserve(snap.terms_.size());
  for (TermId id = 0; id < snap.terms_.size(); ++id) snap.index_.emplace(snap.terms_[id], id);

  std::vector<std::pair<TermId, TermId>> pairs;
  pairs.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    TermId ia = snap.index_.at(a);
    TermId ib = snap.index_.at(b);
    if (ia == ib) continue;
    if (ia > ib) std::swap(ia, ib);
    pairs.emplace_back(ia, ib);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  const std::size_t n = snap.terms_.size();
  std::vector<std::size_t> degree(n, 0);
  for (const auto& [a, b] : pairs) {
    ++degree[a];
    ++degree[b];
  }
  snap.offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) snap.offsets_[i + 1] = snap.offsets_[i] + degree[i];
  snap.targets_.resize(snap.offsets_[n]);
  std::vector<std::size_t> cursor(snap.offsets_.begin(), snap.offsets_.end() - 1);
  for (const auto& [a, b] : pairs) {
    snap.targets_[cursor[a]++] = b;
    snap.targets_[cursor[b]++] = a;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(snap.targets_.begin() + static_cast<std::ptrdiff_t>(snap.offsets_[i]),
              snap.targets_.begin() + static_cast<std::ptrdiff_t>(snap.offsets_[i + 1]));
  }

  snap.embeddings_ = EmbeddingTable::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  snap.has_embedding_.assign(n, false);
  for (const auto& [t, v] : embeddings) {
    TermId id = snap.index_.at(t);
    snap.embeddings_.row(id) = Eigen::Map<const Eigen::RowVectorXf>(v.data(), static_cast<Eigen::Index>(dim));
    snap.has_embedding_[id] = true;
  }
  return snap;
}

std::optional<ConceptNetSnapshot::TermId> ConceptNetSnapshot::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const ConceptNetSnapshot::TermId> ConceptNetSnapshot::neighbors(TermId id) const {
  return {targets_.data() + offsets_[id], offsets_[id + 1] - offsets_[id]};
}

bool ConceptNetSnapshot::has_edge(std::string_view a, std::string_view b) const {
  auto ia = find(a);
  auto ib = find(b);
  if (!ia || !ib) return false;
  auto row = neighbors(*ia);
  return std::binary_search(row.begin(), row.end(), *ib);
}

std::optional<ConceptNetSnapshot::EmbeddingView> ConceptNetSnapshot::embedding(std::string_view term) const {
  auto id = find(term);
  if (!id) return std::nullopt;
  return embedding(*id);
}

std::optional<ConceptNetSnapshot::EmbeddingView> ConceptNetSnapshot::embedding(TermId id) const {
  if (!has_embedding_[id]) return std::nullopt;
  return EmbeddingView(embeddings_.row(id).data(), embeddings_.cols());
}

std::vector<ConceptNetSnapshot::TermId> ConceptNetSnapshot::k_hop_neighbor_ids(
    TermId term, int k, int limit, std::uint64_t ordering_seed) const {
  if (k < 1 || limit < 1) throw std::invalid_argument("k_hop_neighbors: k and limit must be positive");

  std::unordered_set<TermId> visited{term};
  std::vector<TermId> frontier{term};
  for (int depth = 0; depth < k && !frontier.empty(); ++depth) {
    std::vector<TermId> next;
    for (TermId u : frontier) {
      for (TermId v : neighbors(u)) {
        if (visited.insert(v).second) next.push_back(v);
      }
    }
    frontier = std::move(next);
  }

  // Ids follow lexicographic term order, so sorting ids sorts by term.
  std::sort(frontier.begin(), frontier.end());
  const auto want = static_cast<std::size_t>(limit);
  if (frontier.size() > want) {
    std::mt19937_64 rng(ordering_seed);
    for (std::size_t i = 0; i < want; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng() % (frontier.size() - i));
      std::swap(frontier[i], frontier[j]);
    }
    frontier.resize(want);
    std::sort(frontier.begin(), frontier.end());
  }
  return frontier;
}

std::vector<std::string> ConceptNetSnapshot::k_hop_neighbors(std::string_view term, int k, int limit,
                                                             std::uint64_t ordering_seed) const {
  auto id = find(term);
  if (!id) return {};
  std::vector<std::string> out;
  for (TermId t : k_hop_neighbor_ids(*id, k, limit, ordering_seed)) out.push_back(terms_[t]);
  return out;
}

std::optional<int> ConceptNetSnapshot::hop_distance(std::string_view a, std::string_view b,
                                                    int max_depth) const {
  auto ia = find(a);
  auto ib = find(b);
  if (!ia || !ib) return std::nullopt;
  return hop_distance(*ia, *ib, max_depth);
}

std::optional<int> ConceptNetSnapshot::hop_distance(TermId a, TermId b, int max_depth) const {
  if (a == b) return 0;
  if (max_depth < 1) return std::nullopt;

  // Bidirectional BFS, one full level at a time. If the searches first meet
  // while expanding to levels (la, lb), the distance is exactly la + lb.
  std::unordered_set<TermId> seen_a{a};
  std::unordered_set<TermId> seen_b{b};
  std::vector<TermId> frontier_a{a};
  std::vector<TermId> frontier_b{b};
  int level_a = 0;
  int level_b = 0;

  while (level_a + level_b < max_depth) {
    const bool expand_a = frontier_a.size() <= frontier_b.size();
    auto& frontier = expand_a ? frontier_a : frontier_b;
    auto& seen = expand_a ? seen_a : seen_b;
    const auto& other = expand_a ? seen_b : seen_a;
    if (frontier.empty()) return std::nullopt;

    std::vector<TermId> next;
    bool met = false;
    for (TermId u : frontier) {
      for (TermId v : neighbors(u)) {
        if (!seen.insert(v).second) continue;
        if (other.contains(v)) met = true;
        next.push_back(v);
      }
    }
    (expand_a ? level_a : level_b) += 1;
    if (met) return level_a + level_b;
    frontier = std::move(next);
  }
  return std::nullopt;
}

}  // namespace grade
