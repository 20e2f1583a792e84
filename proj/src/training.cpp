#include "grade/training.hpp"

#include <fstream>
#include <iomanip>
#include <set>

namespace grade {

std::string to_string(SamplingMethod method) {
  return method == SamplingMethod::Lexical ? "lexical" : "embedding";
}

SamplingMethod parse_sampling_method(std::string_view name) {
  if (name == "lexical") return SamplingMethod::Lexical;
  if (name == "embedding") return SamplingMethod::Embedding;
  throw std::invalid_argument("unknown sampling method '" + std::string(name) + "'");
}

void TrainingTuple::validate() const {
  auto blank = [](const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  };
  if (blank(context[0]) || blank(context[1]) || blank(gold_response) || blank(negative_response)) {
    throw std::invalid_argument("training tuple has an empty field");
  }
  if (negative_response == gold_response) throw std::invalid_argument("training tuple negative equals gold response");
}

void TrainConfig::validate() const {
  if (!(margin >= 0.0)) throw std::invalid_argument("train config: margin must be nonnegative");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("train config: learning_rate must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train config: Adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("train config: epsilon must be positive");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
  if (epochs < 0) throw std::invalid_argument("train config: epochs must be nonnegative");
}

std::vector<ContextResponse> build_pairs(const std::vector<Dialogue>& dialogues, std::size_t* skipped) {
  std::vector<ContextResponse> pairs;
  std::size_t short_dialogues = 0;
  for (const auto& d : dialogues) {
    if (d.size() < 3) {
      ++short_dialogues;
      continue;
    }
    for (std::size_t t = 2; t < d.size(); ++t) pairs.push_back({{d[t - 2], d[t - 1]}, d[t]});
  }
  if (skipped) *skipped = short_dialogues;
  return pairs;
}

LexicalIndex::LexicalIndex(std::vector<std::string> pool, const Stopwords& stopwords) : stopwords_(&stopwords) {
  std::set<std::string> seen;
  for (auto& u : pool)
    if (seen.insert(u).second) pool_.push_back(std::move(u));
  if (pool_.empty()) throw std::invalid_argument("lexical index: empty training pool");
  idf_ = IdfTable::build(pool_);
  for (std::size_t i = 0; i < pool_.size(); ++i)
    for (const auto& k : keywords(pool_[i])) postings_[k].push_back(i);
}

std::vector<std::string> LexicalIndex::keywords(const std::string& utterance) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& t : tokenize(utterance))
    if (!stopwords_->contains(t) && seen.insert(t).second) out.push_back(t);
  return out;
}

std::map<std::string, double> LexicalIndex::weights(const std::string& utterance) const {
  std::map<std::string, double> w;
  for (auto& t : tokenize(utterance))
    if (!stopwords_->contains(t)) w[t] += 1.0;
  for (auto& [t, v] : w) v *= idf_.idf(t);
  return w;
}

std::vector<std::string> LexicalIndex::retrieve(const std::string& query) const {
  const auto q = weights(query);
  double q_norm = 0.0;
  for (const auto& [t, v] : q) q_norm += v * v;
  q_norm = std::sqrt(q_norm);

  std::set<std::size_t> candidates;
  for (const auto& [t, v] : q) {
    if (auto it = postings_.find(t); it != postings_.end()) candidates.insert(it->second.begin(), it->second.end());
  }
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i : candidates) {
    if (pool_[i] == query) continue;
    const auto d = weights(pool_[i]);
    double dot = 0.0, d_norm = 0.0;
    for (const auto& [t, v] : d) {
      d_norm += v * v;
      if (auto it = q.find(t); it != q.end()) dot += v * it->second;
    }
    ranked.emplace_back(dot / (q_norm * std::sqrt(d_norm)), i);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (const auto& [score, i] : ranked) out.push_back(pool_[i]);
  return out;
}

std::string sample_lexical_negative(const std::string& gold, const LexicalIndex& index, std::uint64_t seed) {
  auto retrieved = index.retrieve(gold);
  if (!retrieved.empty()) return retrieved[retrieved.size() / 2];

  const auto& pool = index.pool();
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i] != gold) others.push_back(i);
  if (others.empty()) throw std::invalid_argument("lexical sampling: no pool entry differs from the gold response");
  std::mt19937_64 rng(seed);
  return pool[others[static_cast<std::size_t>(rng() % others.size())]];
}

std::string sample_embedding_negative(const std::string& gold, const std::vector<std::string>& pool,
                                      const UtteranceEmbedder& embed, std::uint64_t seed) {
  if (pool.size() < kEmbeddingTopK + 1) {
    throw std::invalid_argument("embedding sampling: pool needs at least 6 utterances, got " +
                                std::to_string(pool.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t draw = std::min(kEmbeddingCandidates, pool.size());
  for (std::size_t i = 0; i < draw; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(draw);
  std::sort(idx.begin(), idx.end());

  const Eigen::VectorXd target = embed(gold);
  const double target_norm = target.norm();
  std::vector<std::pair<double, std::size_t>> ranked;
  std::set<std::string> seen;
  for (std::size_t i : idx) {
    if (pool[i] == gold || !seen.insert(pool[i]).second) continue;
    const Eigen::VectorXd v = embed(pool[i]);
    const double denom = target_norm * v.norm();
    ranked.emplace_back(denom > 0.0 ? target.dot(v) / denom : 0.0, i);
  }
  if (ranked.empty()) throw std::invalid_argument("embedding sampling: no candidate differs from the gold response");
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const std::size_t top = std::min(kEmbeddingTopK, ranked.size());
  return pool[ranked[static_cast<std::size_t>(rng() % top)].second];
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics log " + path.string());
  out << "epoch,loss,ranking_accuracy\n" << std::setprecision(17);
  for (const auto& m : log) out << m.epoch << ',' << m.loss << ',' << m.ranking_accuracy << '\n';
}

}  // namespace grade
