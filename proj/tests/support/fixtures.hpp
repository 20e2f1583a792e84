#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "grade/coherence_model.hpp"
#include "grade/concept_graph.hpp"
#include "grade/keywords.hpp"
#include "grade/training.hpp"
#include "grade/vocabulary.hpp"

namespace fixtures {

using Edge = std::pair<std::string, std::string>;
using EmbeddingRows = std::vector<std::pair<std::string, std::vector<float>>>;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("grade_test_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<float> random_vector(int dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<float> n(0.0f, static_cast<float>(scale));
  std::vector<float> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = n(rng);
  return v;
}

/// Term names made of letters only so the lexicon tagger treats them as nouns.
inline std::string letter_term(std::size_t index) {
  std::string s = "q";
  do {
    s.push_back(static_cast<char>('a' + index % 26));
    index /= 26;
  } while (index > 0);
  s += "zn";
  return s;
}

struct RandomGraph {
  std::vector<std::string> terms;
  std::vector<Edge> edges;
  grade::ConceptNetSnapshot snapshot;
};

/// Erdos-Renyi style graph over `n` terms; every term has an embedding.
inline RandomGraph random_graph(int n, double edge_probability, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomGraph g;
  EmbeddingRows emb;
  for (int i = 0; i < n; ++i) {
    g.terms.push_back(letter_term(static_cast<std::size_t>(i)));
    emb.emplace_back(g.terms.back(), random_vector(dim, rng, 0.1));
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < edge_probability) g.edges.emplace_back(g.terms[static_cast<std::size_t>(i)], g.terms[static_cast<std::size_t>(j)]);
  g.snapshot = grade::ConceptNetSnapshot::from_parts(g.edges, emb);
  return g;
}

/// Floyd-Warshall over the snapshot's own adjacency; -1 marks unreachable.
inline std::vector<std::vector<int>> floyd_warshall(const grade::ConceptNetSnapshot& s) {
  const auto n = s.term_count();
  constexpr int inf = 1 << 28;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (auto j : s.neighbors(static_cast<grade::ConceptNetSnapshot::TermId>(i))) d[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  for (auto& row : d)
    for (auto& x : row)
      if (x >= inf) x = -1;
  return d;
}

/// Keyword extractor bundle with the built-in tagger and stopwords.
struct Extraction {
  grade::IdfTable idf;
  grade::LexiconTagger tagger;
  grade::KeywordExtractor extractor;

  explicit Extraction(const std::vector<std::string>& corpus, double threshold = 0.0)
      : idf(grade::IdfTable::build(corpus)),
        extractor(idf, [this](std::span<const std::string> t) { return tagger(t); }, grade::Stopwords::english(),
                  threshold) {}
  Extraction(const Extraction&) = delete;
};

/// Small model configuration used across unit tests.
inline grade::ModelConfig small_config(int vocab_size, int node_dim, int heads = 2) {
  grade::ModelConfig c;
  c.encoder_profile = grade::EncoderProfile::Toy;
  c.vocab_size = vocab_size;
  c.token_dim = 6;
  c.encoder_dim = 5;
  c.max_len = 64;
  c.node_dim = node_dim;
  c.neighbor_limits = {3, 3};
  c.gat_layers = 2;
  c.heads = heads;
  c.hidden1 = 7;
  c.hidden2 = 4;
  c.drop_rate = 0.2;
  return c;
}

/// Topic corpus: disconnected clusters of related terms. Gold responses mention
/// terms from the context's cluster, negatives terms from another cluster, and
/// both share one filler template so the token encoder cannot tell them apart.
struct TopicCorpus {
  int clusters = 0;
  int terms_per_cluster = 0;
  std::vector<std::vector<std::string>> cluster_terms;
  grade::ConceptNetSnapshot snapshot;
  std::vector<grade::TrainingTuple> tuples;
  std::vector<std::string> utterances;
  grade::Vocabulary vocabulary;  // fillers only; topic terms map to [UNK]

  std::size_t term_vocabulary() const { return static_cast<std::size_t>(clusters * terms_per_cluster); }
};

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{"so", "it", "is", "about", "and", "i", "think", "we", "should",
                                              "know", "what", "do", "you", "like", "or", "the", "with", "my",
                                              "your", "yes"};
  return words;
}

inline TopicCorpus topic_corpus(int clusters, int terms_per_cluster, int pairs, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TopicCorpus c;
  c.clusters = clusters;
  c.terms_per_cluster = terms_per_cluster;
  EmbeddingRows emb;
  std::vector<Edge> edges;
  const double per_dim = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int k = 0; k < clusters; ++k) {
    auto center = random_vector(dim, rng, per_dim);
    std::vector<std::string> terms;
    for (int t = 0; t < terms_per_cluster; ++t) {
      terms.push_back(letter_term(static_cast<std::size_t>(k * terms_per_cluster + t)));
      auto v = random_vector(dim, rng, 0.5 * per_dim);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += center[i];
      emb.emplace_back(terms.back(), std::move(v));
    }
    // A ring plus a few chords: all within-cluster distances are small.
    for (int t = 0; t < terms_per_cluster; ++t) {
      edges.emplace_back(terms[static_cast<std::size_t>(t)], terms[static_cast<std::size_t>((t + 1) % terms_per_cluster)]);
      if (t % 3 == 0) {
        edges.emplace_back(terms[static_cast<std::size_t>(t)],
                           terms[static_cast<std::size_t>((t + terms_per_cluster / 2) % terms_per_cluster)]);
      }
    }
    c.cluster_terms.push_back(std::move(terms));
  }
  for (const auto& w : filler_words()) emb.emplace_back(w, random_vector(dim, rng, per_dim));
  c.snapshot = grade::ConceptNetSnapshot::from_parts(edges, emb);

  std::uniform_int_distribution<int> pick_cluster(0, clusters - 1);
  auto draw_terms = [&](int cluster, int count) {
    std::vector<std::string> out;
    const auto& pool = c.cluster_terms[static_cast<std::size_t>(cluster)];
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> d(static_cast<std::size_t>(i), idx.size() - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[d(rng)]);
      out.push_back(pool[idx[static_cast<std::size_t>(i)]]);
    }
    return out;
  };
  auto response = [](const std::string& a, const std::string& b) { return "so it is about " + a + " and " + b; };
  std::set<std::string> seen;
  for (int p = 0; p < pairs; ++p) {
    const int topic = pick_cluster(rng);
    int other = pick_cluster(rng);
    while (other == topic) other = pick_cluster(rng);
    auto on_topic = draw_terms(topic, 6);
    auto off_topic = draw_terms(other, 2);
    grade::TrainingTuple t;
    t.context = {"i think we should know about " + on_topic[0] + " and " + on_topic[1],
                 "what do you like about " + on_topic[2] + " or " + on_topic[3]};
    t.gold_response = response(on_topic[4], on_topic[5]);
    t.negative_response = response(off_topic[0], off_topic[1]);
    t.sampling_method = p % 2 == 0 ? grade::SamplingMethod::Lexical : grade::SamplingMethod::Embedding;
    for (const auto* u : {&t.context[0], &t.context[1], &t.gold_response, &t.negative_response})
      if (seen.insert(*u).second) c.utterances.push_back(*u);
    c.tuples.push_back(std::move(t));
  }
  c.vocabulary = grade::Vocabulary(filler_words(), grade::SpecialTokens::toy());
  return c;
}

}  // namespace fixtures
