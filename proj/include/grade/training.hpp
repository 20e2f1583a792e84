#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "grade/coherence_model.hpp"
#include "grade/keywords.hpp"

namespace grade {

using Dialogue = std::vector<std::string>;

struct ContextResponse {
  std::array<std::string, 2> context;
  std::string response;
};

enum class SamplingMethod { Lexical, Embedding };
std::string to_string(SamplingMethod method);
SamplingMethod parse_sampling_method(std::string_view name);

struct TrainingTuple {
  std::array<std::string, 2> context;
  std::string gold_response;
  std::string negative_response;
  SamplingMethod sampling_method = SamplingMethod::Lexical;

  /// Throws when the negative equals the gold response or a field is blank.
  void validate() const;
};

/// Sliding window ((u[t-2], u[t-1]), u[t]) for t >= 2. Dialogues with fewer
/// than three utterances are skipped and counted in `skipped`.
std::vector<ContextResponse> build_pairs(const std::vector<Dialogue>& dialogues, std::size_t* skipped = nullptr);

/// tf-idf keyword-overlap retrieval over a pool of utterances.
class LexicalIndex {
 public:
  LexicalIndex(std::vector<std::string> pool, const Stopwords& stopwords = Stopwords::english());

  /// Pool entries sharing at least one index keyword with `query`, by
  /// descending tf-idf cosine (ties by pool order), with `query` itself removed.
  std::vector<std::string> retrieve(const std::string& query) const;
  std::vector<std::string> keywords(const std::string& utterance) const;

  const std::vector<std::string>& pool() const { return pool_; }

 private:
  std::map<std::string, double> weights(const std::string& utterance) const;

  std::vector<std::string> pool_;  // unique, first-occurrence order
  const Stopwords* stopwords_;
  IdfTable idf_;
  std::map<std::string, std::vector<std::size_t>> postings_;
};

/// Middle element (index n/2) of the retrieved list; a uniformly random
/// pool entry different from `gold` when nothing is retrieved.
std::string sample_lexical_negative(const std::string& gold, const LexicalIndex& index, std::uint64_t seed);

using UtteranceEmbedder = std::function<Eigen::VectorXd(const std::string&)>;

inline constexpr std::size_t kEmbeddingCandidates = 1000;
inline constexpr std::size_t kEmbeddingTopK = 5;

/// Draws up to 1000 pool entries, ranks them by cosine similarity to `gold`
/// (exact duplicates of gold excluded) and picks one of the top five.
std::string sample_embedding_negative(const std::string& gold, const std::vector<std::string>& pool,
                                      const UtteranceEmbedder& embed, std::uint64_t seed);

/// max(0, negative - gold + margin)
template <typename Scalar>
Scalar ranking_loss(Scalar gold_score, Scalar negative_score, Scalar margin = Scalar(0.1)) {
  return std::max(Scalar(0), negative_score - gold_score + margin);
}

struct TrainConfig {
  double margin = 0.1;
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 16;
  int epochs = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename Scalar>
struct AdamState {
  ModelParams<Scalar> first_moment;
  ModelParams<Scalar> second_moment;
  std::int64_t step = 0;

  static AdamState for_params(const ModelParams<Scalar>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }

  void apply(ModelParams<Scalar>& params, const ModelParams<Scalar>& grad, const TrainConfig& cfg) {
    ++step;
    const auto b1 = static_cast<Scalar>(cfg.beta1);
    const auto b2 = static_cast<Scalar>(cfg.beta2);
    const auto lr = static_cast<Scalar>(cfg.learning_rate);
    const auto eps = static_cast<Scalar>(cfg.epsilon);
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, static_cast<double>(step)));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, static_cast<double>(step)));
    for_each_parameter(
        [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
          m = b1 * m + (Scalar(1) - b1) * g;
          v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
          p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        },
        params, grad, first_moment, second_moment);
  }
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double ranking_accuracy = 0.0;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& log);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prepared gold/negative inputs for a tuple set; pairs are shared by key.
template <typename Scalar>
struct PreparedTuples {
  std::vector<PreparedPair<Scalar>> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> tuples;  // (gold, negative) into pairs

  static PreparedTuples build(const std::vector<TrainingTuple>& tuples, const CoherenceModel<Scalar>& model,
                              const Resources& res) {
    PreparedTuples out;
    std::map<std::string, std::size_t> index;
    auto intern = [&](const std::array<std::string, 2>& ctx, const std::string& resp) {
      std::string key = ctx[0] + '\x1f' + ctx[1] + '\x1f' + resp;
      auto [it, inserted] = index.emplace(key, out.pairs.size());
      if (inserted) out.pairs.push_back(model.prepare(EncoderInput{ctx, resp}, res));
      return it->second;
    };
    for (const auto& t : tuples) {
      t.validate();
      out.tuples.emplace_back(intern(t.context, t.gold_response), intern(t.context, t.negative_response));
    }
    return out;
  }
};

/// Evaluation-mode mean ranking loss and fraction of tuples with gold > negative.
template <typename Scalar>
EpochMetrics evaluate_tuples(const CoherenceModel<Scalar>& model, const PreparedTuples<Scalar>& data,
                             double margin) {
  std::vector<Scalar> scores(data.pairs.size());
  for (std::size_t i = 0; i < data.pairs.size(); ++i) scores[i] = model.forward(data.pairs[i], Mode::Eval, 0);
  EpochMetrics m;
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& [g, n] : data.tuples) {
    loss += static_cast<double>(ranking_loss(scores[g], scores[n], static_cast<Scalar>(margin)));
    if (scores[g] > scores[n]) ++correct;
  }
  const auto count = static_cast<double>(data.tuples.size());
  m.loss = loss / count;
  m.ranking_accuracy = static_cast<double>(correct) / count;
  return m;
}

template <typename Scalar>
using EpochCallback = std::function<void(const EpochMetrics&, const CoherenceModel<Scalar>&, const AdamState<Scalar>&)>;

struct TrainOptions {
  int start_epoch = 1;  // > 1 when resuming
};

/// Mean-batch margin ranking loss minimized with Adam. After each epoch the
/// model is evaluated (no edge dropping) on the training tuples and
/// `on_epoch` is called.
template <typename Scalar>
std::vector<EpochMetrics> train(const PreparedTuples<Scalar>& data, CoherenceModel<Scalar>& model,
                                const TrainConfig& config, AdamState<Scalar>& adam, const TrainOptions& options = {},
                                const EpochCallback<Scalar>& on_epoch = {}) {
  config.validate();
  if (data.tuples.empty()) throw std::invalid_argument("train: no training tuples");
  const auto margin = static_cast<Scalar>(config.margin);
  std::vector<EpochMetrics> log;
  std::vector<std::size_t> order(data.tuples.size());

  ForwardCache<Scalar> gold_cache;
  ForwardCache<Scalar> neg_cache;
  for (int epoch = options.start_epoch; epoch < options.start_epoch + config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng() % i)]);
    }

    const auto batch_size = static_cast<std::size_t>(config.batch_size);
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      const auto inv_batch = Scalar(1) / static_cast<Scalar>(end - start);
      ModelParams<Scalar> grad = model.params.zeros_like();
      for (std::size_t b = start; b < end; ++b) {
        const auto [g, n] = data.tuples[order[b]];
        const std::uint64_t step_seed =
            mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(b));
        auto abort = [&](const std::string& what) {
          std::ostringstream os;
          os << what << " in epoch " << epoch << ", batch " << batch_no << " (tuple " << order[b] << ")";
          throw TrainingError(os.str());
        };
        Scalar s(0), s_neg(0);
        try {
          s = model.forward(data.pairs[g], Mode::Train, mix_seed(step_seed, 1), &gold_cache);
          s_neg = model.forward(data.pairs[n], Mode::Train, mix_seed(step_seed, 2), &neg_cache);
        } catch (const NonFiniteError&) {
          abort("non-finite score");
        }
        const Scalar loss = ranking_loss(s, s_neg, margin);
        if (!std::isfinite(loss)) abort("non-finite ranking loss");
        if (loss > Scalar(0)) {
          model.backward(data.pairs[g], gold_cache, -inv_batch, grad);
          model.backward(data.pairs[n], neg_cache, inv_batch, grad);
        }
      }
      adam.apply(model.params, grad, config);
    }

    EpochMetrics metrics = evaluate_tuples(model, data, config.margin);
    metrics.epoch = epoch;
    if (!std::isfinite(metrics.loss)) {
      throw TrainingError("non-finite evaluation loss after epoch " + std::to_string(epoch));
    }
    log.push_back(metrics);
    if (on_epoch) on_epoch(metrics, model, adam);
  }
  return log;
}

template <typename Scalar>
std::vector<EpochMetrics> train(const std::vector<TrainingTuple>& tuples, CoherenceModel<Scalar>& model,
                                const TrainConfig& config, const Resources& res) {
  auto data = PreparedTuples<Scalar>::build(tuples, model, res);
  auto adam = AdamState<Scalar>::for_params(model.params);
  return train(data, model, config, adam);
}

}  // namespace grade
