#include "grade/utterance_encoder.hpp"

#include <algorithm>
#include <stdexcept>

#include "grade/keywords.hpp"

namespace grade {

EncoderProfile parse_encoder_profile(std::string_view name) {
  if (name == "toy") return EncoderProfile::Toy;
  if (name == "pretrained") return EncoderProfile::Pretrained;
  throw std::invalid_argument("unknown encoder profile '" + std::string(name) + "' (expected toy or pretrained)");
}

std::string to_string(EncoderProfile profile) {
  return profile == EncoderProfile::Toy ? "toy" : "pretrained";
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

void EncoderInput::validate() const {
  if (blank(context[0]) || blank(context[1])) throw std::invalid_argument("encoder input: empty context utterance");
  if (blank(response)) throw std::invalid_argument("encoder input: empty response");
}

std::vector<int> utterance_ids(std::string_view text, const Vocabulary& vocab, bool wordpiece) {
  std::vector<int> ids;
  for (const auto& word : tokenize(text)) {
    if (wordpiece) {
      auto pieces = vocab.wordpiece(word);
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    } else {
      ids.push_back(vocab.id(word));
    }
  }
  return ids;
}

TokenSequence serialize(const EncoderInput& input, const Vocabulary& vocab, int max_len, bool wordpiece) {
  constexpr int kSpecials = 4;
  if (max_len < kSpecials + 3) throw std::invalid_argument("serialize: max_len too small");
  auto first = utterance_ids(input.context[0], vocab, wordpiece);
  auto second = utterance_ids(input.context[1], vocab, wordpiece);
  auto response = utterance_ids(input.response, vocab, wordpiece);

  auto excess = [&] {
    return static_cast<long>(first.size() + second.size() + response.size()) + kSpecials - max_len;
  };
  auto trim_back = [](std::vector<int>& v, long n) {
    auto k = std::min<long>(n, static_cast<long>(v.size()) - 1);
    if (k > 0) v.resize(v.size() - static_cast<std::size_t>(k));
  };
  auto trim_front = [](std::vector<int>& v, long n) {
    auto k = std::min<long>(n, static_cast<long>(v.size()) - 1);
    if (k > 0) v.erase(v.begin(), v.begin() + k);
  };
  if (excess() > 0) trim_back(response, excess());
  if (excess() > 0) trim_front(first, excess());
  if (excess() > 0) trim_front(second, excess());

  TokenSequence seq;
  auto push = [&](int id, int segment) {
    seq.ids.push_back(id);
    seq.segments.push_back(segment);
  };
  push(vocab.bos(), 0);
  for (int id : first) push(id, 0);
  push(vocab.sep(), 0);
  for (int id : second) push(id, 0);
  push(vocab.sep(), 0);
  for (int id : response) push(id, 1);
  push(vocab.eos(), 1);
  return seq;
}

}  // namespace grade
