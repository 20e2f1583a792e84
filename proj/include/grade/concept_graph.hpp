#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace grade {

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected, unlabeled commonsense term graph plus a term -> vector table.
///
/// Term ids are assigned in lexicographic order of the term strings, so two
/// loads of the same data produce identical ids regardless of line order.
/// Immutable after construction; all queries are const and thread-safe.
class ConceptNetSnapshot {
 public:
  using TermId = std::uint32_t;
  using EmbeddingTable = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using EmbeddingView = Eigen::Map<const Eigen::VectorXf>;

  static constexpr int kDefaultMaxDepth = 6;
  static constexpr const char* kEdgesFile = "edges.tsv";
  static constexpr const char* kEmbeddingsFile = "embeddings.txt";

  ConceptNetSnapshot() = default;

  /// Edge file: `term_a<TAB>term_b` per line. Embedding file: `term v1 ... vd`
  /// per line, optionally preceded by a word2vec-style `count dim` header.
  static ConceptNetSnapshot load(const std::filesystem::path& edges_path,
                                 const std::filesystem::path& embeddings_path);
  /// Loads `edges.tsv` and `embeddings.txt` from `dir`.
  static ConceptNetSnapshot load_dir(const std::filesystem::path& dir);

  static ConceptNetSnapshot from_parts(
      const std::vector<std::pair<std::string, std::string>>& edges,
      const std::vector<std::pair<std::string, std::vector<float>>>& embeddings);

  std::size_t term_count() const { return terms_.size(); }
  std::size_t edge_count() const { return targets_.size() / 2; }
  int dimension() const { return static_cast<int>(embeddings_.cols()); }

  std::optional<TermId> find(std::string_view term) const;
  const std::string& term(TermId id) const { return terms_[id]; }
  std::span<const TermId> neighbors(TermId id) const;
  bool has_edge(std::string_view a, std::string_view b) const;

  bool has_embedding(TermId id) const { return has_embedding_[id]; }
  std::optional<EmbeddingView> embedding(std::string_view term) const;
  std::optional<EmbeddingView> embedding(TermId id) const;

  /// Terms at BFS distance exactly `k`. At most `limit` are returned; an
  /// overflowing shell is sorted by term and sub-sampled with `ordering_seed`.
  /// The result is sorted lexicographically.
  std::vector<std::string> k_hop_neighbors(std::string_view term, int k, int limit,
                                           std::uint64_t ordering_seed) const;
  std::vector<TermId> k_hop_neighbor_ids(TermId term, int k, int limit,
                                         std::uint64_t ordering_seed) const;

  /// Shortest path length in edges, or nullopt when farther than `max_depth`
  /// or when either term is absent.
  std::optional<int> hop_distance(std::string_view a, std::string_view b,
                                  int max_depth = kDefaultMaxDepth) const;
  std::optional<int> hop_distance(TermId a, TermId b, int max_depth = kDefaultMaxDepth) const;

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> index_;
  std::vector<std::size_t> offsets_;  // CSR, size term_count + 1
  std::vector<TermId> targets_;       // sorted per row
  EmbeddingTable embeddings_;         // zero rows where has_embedding_ is false
  std::vector<bool> has_embedding_;
};

}  // namespace grade
