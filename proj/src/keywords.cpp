#include "grade/keywords.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace grade {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (std::ispunct(c) && c != '_') {
      continue;
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

IdfTable IdfTable::build(std::span<const std::string> corpus) {
  if (corpus.empty()) throw std::invalid_argument("build_idf_table: empty corpus");
  std::unordered_map<std::string, std::size_t> doc_freq;
  for (const auto& utterance : corpus) {
    auto tokens = tokenize(utterance);
    std::set<std::string> unique(tokens.begin(), tokens.end());
    for (const auto& t : unique) ++doc_freq[t];
  }
  IdfTable table;
  table.document_count_ = corpus.size();
  const auto n = static_cast<double>(corpus.size());
  for (const auto& [term, df] : doc_freq) {
    table.idf_[term] = std::log(n / (1.0 + static_cast<double>(df))) + 1.0;
  }
  return table;
}

double IdfTable::idf(std::string_view term) const {
  auto it = idf_.find(std::string(term));
  if (it != idf_.end()) return it->second;
  return std::log(static_cast<double>(document_count_)) + 1.0;
}

void IdfTable::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write idf table " + path.string());
  std::vector<std::pair<std::string, double>> rows(idf_.begin(), idf_.end());
  std::sort(rows.begin(), rows.end());
  out << "#document_count\t" << document_count_ << "\n";
  out << std::setprecision(17);
  for (const auto& [term, value] : rows) out << term << '\t' << value << '\n';
}

IdfTable IdfTable::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open idf table " + path.string());
  IdfTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected term<TAB>idf");
    }
    std::string key = line.substr(0, tab);
    std::string value = line.substr(tab + 1);
    try {
      if (key == "#document_count") {
        table.document_count_ = std::stoul(value);
      } else {
        table.idf_[key] = std::stod(value);
      }
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad number '" + value + "'");
    }
  }
  if (table.document_count_ == 0) throw std::runtime_error(path.string() + ": missing #document_count");
  return table;
}

namespace {

constexpr const char* kEnglishStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as",
    "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can",
    "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further",
    "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my",
    "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our",
    "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
    "yours", "yourself", "yourselves", "im", "ive", "id", "ill", "youre", "dont", "doesnt", "didnt",
    "cant", "wont", "isnt", "arent", "wasnt", "werent", "thats", "theres", "its", "lets", "yes",
    "yeah", "oh", "ok", "okay", "well", "also", "really", "get", "got", "go", "going", "like",
    "know", "think", "want", "say", "said", "let", "us", "may", "might", "must", "shall", "one",
    "much", "many", "thing", "things", "something", "anything", "nothing", "hi", "hello"};

}  // namespace

const Stopwords& Stopwords::english() {
  static const Stopwords words = [] {
    Stopwords s;
    for (const char* w : kEnglishStopwords) s.words_.insert(w);
    return s;
  }();
  return words;
}

Stopwords Stopwords::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword list " + path.string());
  Stopwords s;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    if (line.starts_with('#') || tokens.empty()) continue;
    s.words_.insert(tokens.front());
  }
  return s;
}

LexiconTagger::LexiconTagger() {
  for (const char* w : {"is", "are", "was", "were", "be", "been", "have", "has", "had", "do", "does",
                        "did", "go", "went", "gone", "come", "came", "make", "made", "take", "took",
                        "see", "saw", "seen", "get", "got", "eat", "ate", "drink", "play", "played",
                        "like", "love", "hate", "want", "need", "think", "know", "buy", "bought",
                        "sell", "sold", "run", "ran", "read", "write", "wrote", "swim", "cook", "work",
                        "visit", "watch", "listen", "travel", "study", "learn", "sing", "dance"}) {
    lexicon_[w] = PosTag::Verb;
  }
  for (const char* w : {"good", "bad", "great", "nice", "big", "small", "new", "old", "happy", "sad",
                        "hot", "cold", "fast", "slow", "long", "short", "high", "low", "young",
                        "beautiful", "delicious", "expensive", "cheap", "easy", "hard", "busy",
                        "free", "late", "early", "red", "blue", "green", "white", "black"}) {
    lexicon_[w] = PosTag::Adj;
  }
  for (const char* w : {"very", "really", "not", "never", "always", "often", "quite", "too", "also",
                        "there", "here", "now", "then", "today", "tomorrow", "yesterday", "please",
                        "thanks", "thank", "sorry", "yes", "no", "hi", "hello", "bye", "well"}) {
    lexicon_[w] = PosTag::Other;
  }
}

PosTag LexiconTagger::tag(const std::string& token) const {
  if (auto it = lexicon_.find(token); it != lexicon_.end()) return it->second;
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](unsigned char c) {
        return std::isalpha(c) || c == '_';
      })) {
    return PosTag::Other;
  }
  auto ends = [&](std::string_view suffix) {
    return token.size() > suffix.size() + 2 && token.ends_with(suffix);
  };
  if (ends("ly")) return PosTag::Other;
  if (ends("ous") || ends("ful") || ends("ive") || ends("able") || ends("ible") || ends("less") ||
      ends("ish")) {
    return PosTag::Adj;
  }
  if (ends("ize") || ends("ise") || ends("ify")) return PosTag::Verb;
  return PosTag::Noun;
}

std::vector<PosTag> LexiconTagger::operator()(std::span<const std::string> tokens) const {
  std::vector<PosTag> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back(tag(t));
  return tags;
}

KeywordList KeywordExtractor::extract(std::string_view utterance, Origin origin) const {
  KeywordList out;
  out.origin = origin;
  auto tokens = tokenize(utterance);
  if (tokens.empty()) return out;

  auto tags = tagger_(tokens);
  if (tags.size() != tokens.size()) throw std::logic_error("tagger returned wrong number of tags");

  std::unordered_map<std::string, std::size_t> tf;
  for (const auto& t : tokens) ++tf[t];

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    if (tags[i] == PosTag::Other || stopwords_->contains(tok)) continue;
    const double score = static_cast<double>(tf[tok]) / static_cast<double>(tokens.size()) * idf_->idf(tok);
    if (score < threshold_) continue;
    if (seen.insert(tok).second) out.terms.push_back(tok);
  }
  return out;
}

KeywordList KeywordExtractor::extract_context(std::span<const std::string> utterances) const {
  std::string joined;
  for (const auto& u : utterances) {
    if (!joined.empty()) joined.push_back(' ');
    joined += u;
  }
  return extract(joined, Origin::Context);
}

}  // namespace grade
