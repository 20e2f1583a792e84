#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grade {

struct SpecialTokens {
  std::string bos = "[BOS]";
  std::string sep = "[SEP]";
  std::string eos = "[EOS]";
  std::string unk = "[UNK]";
  std::string pad = "[PAD]";

  static SpecialTokens toy() { return {}; }
  static SpecialTokens bert() { return {"[CLS]", "[SEP]", "[SEP]", "[UNK]", "[PAD]"}; }
};

/// Token <-> id table. Ids follow line order of the vocabulary file.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, SpecialTokens specials);

  /// Token-per-line text file. Missing special tokens are appended.
  static Vocabulary load(const std::filesystem::path& path, SpecialTokens specials = SpecialTokens::toy());
  /// Specials first, then corpus tokens sorted by descending frequency, ties by token.
  static Vocabulary build(std::span<const std::string> corpus, SpecialTokens specials = SpecialTokens::toy(),
                          std::size_t max_size = 0);
  void save(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;  // unk id when absent
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
  const SpecialTokens& specials() const { return specials_; }

  int bos() const { return id(specials_.bos); }
  int sep() const { return id(specials_.sep); }
  int eos() const { return id(specials_.eos); }
  int unk() const { return unk_; }

  /// Greedy longest-match-first WordPiece split of one word (continuation
  /// pieces carry a `##` prefix). Falls back to unk when no split exists.
  std::vector<int> wordpiece(std::string_view word) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  SpecialTokens specials_;
  int unk_ = 0;
};

}  // namespace grade
