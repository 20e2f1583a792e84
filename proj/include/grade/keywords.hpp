#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace grade {

/// Lowercases, strips ASCII punctuation, then splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

class IdfTable {
 public:
  IdfTable() = default;

  /// One utterance is one document.
  static IdfTable build(std::span<const std::string> corpus);
  static IdfTable load_tsv(const std::filesystem::path& path);
  void save_tsv(const std::filesystem::path& path) const;

  /// ln(N / (1 + df)) + 1; unseen terms use df = 0.
  double idf(std::string_view term) const;
  std::size_t document_count() const { return document_count_; }
  std::size_t size() const { return idf_.size(); }

 private:
  std::size_t document_count_ = 0;
  std::unordered_map<std::string, double> idf_;
};

class Stopwords {
 public:
  static const Stopwords& english();
  /// One token per line; blank lines and `#` comments ignored.
  static Stopwords load(const std::filesystem::path& path);

  bool contains(std::string_view token) const { return words_.contains(std::string(token)); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

enum class PosTag { Noun, Verb, Adj, Other };

using Tagger = std::function<std::vector<PosTag>(std::span<const std::string>)>;

/// Deterministic tagger: a small closed lexicon plus suffix rules; anything
/// alphabetic and unrecognized is a noun.
class LexiconTagger {
 public:
  LexiconTagger();
  void add(std::string word, PosTag tag) { lexicon_[std::move(word)] = tag; }
  PosTag tag(const std::string& token) const;
  std::vector<PosTag> operator()(std::span<const std::string> tokens) const;

 private:
  std::unordered_map<std::string, PosTag> lexicon_;
};

enum class Origin { Context, Response };

struct KeywordList {
  std::vector<std::string> terms;
  Origin origin = Origin::Context;

  std::size_t size() const { return terms.size(); }
  bool empty() const { return terms.empty(); }
};

class KeywordExtractor {
 public:
  KeywordExtractor(const IdfTable& idf, Tagger tagger, const Stopwords& stopwords, double threshold = 0.0)
      : idf_(&idf), tagger_(std::move(tagger)), stopwords_(&stopwords), threshold_(threshold) {}

  /// Content-tagged, non-stopword tokens with tf-idf >= threshold, deduplicated
  /// in order of first occurrence.
  KeywordList extract(std::string_view utterance, Origin origin = Origin::Context) const;
  /// Keywords of a multi-utterance context, treated as one text.
  KeywordList extract_context(std::span<const std::string> utterances) const;

  double threshold() const { return threshold_; }

 private:
  const IdfTable* idf_;
  Tagger tagger_;
  const Stopwords* stopwords_;
  double threshold_;
};

}  // namespace grade
