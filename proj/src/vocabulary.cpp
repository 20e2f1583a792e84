#include "grade/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "grade/keywords.hpp"

namespace grade {

Vocabulary::Vocabulary(std::vector<std::string> tokens, SpecialTokens specials)
    : tokens_(std::move(tokens)), specials_(std::move(specials)) {
  for (const auto* s : {&specials_.pad, &specials_.unk, &specials_.bos, &specials_.sep, &specials_.eos}) {
    if (std::find(tokens_.begin(), tokens_.end(), *s) == tokens_.end()) tokens_.push_back(*s);
  }
  for (int i = 0; i < size(); ++i) {
    if (!index_.emplace(tokens_[static_cast<std::size_t>(i)], i).second) {
      throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[static_cast<std::size_t>(i)] + "'");
    }
  }
  unk_ = index_.at(specials_.unk);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, SpecialTokens specials) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens), std::move(specials));
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, SpecialTokens specials, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& u : corpus)
    for (auto& t : tokenize(u)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{specials.pad, specials.unk, specials.bos, specials.sep};
  if (specials.eos != specials.sep) tokens.push_back(specials.eos);
  for (auto& [t, c] : sorted) {
    if (max_size != 0 && tokens.size() >= max_size) break;
    if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(t);
  }
  return Vocabulary(std::move(tokens), std::move(specials));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_ : it->second;
}

std::vector<int> Vocabulary::wordpiece(std::string_view word) const {
  std::vector<int> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    int found = -1;
    while (end > start) {
      std::string piece(word.substr(start, end - start));
      if (start > 0) piece = "##" + piece;
      if (auto it = index_.find(piece); it != index_.end()) {
        found = it->second;
        break;
      }
      --end;
    }
    if (found < 0) return {unk_};
    pieces.push_back(found);
    start = end;
  }
  return pieces;
}

}  // namespace grade
