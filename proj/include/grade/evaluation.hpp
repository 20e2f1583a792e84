#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace grade {

class CorrelationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Judgments that have no scored counterpart.
class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Correlation {
  double coefficient = 0.0;
  double p_value = 1.0;
};

/// Sample Pearson r with a two-sided p-value from Student's t, n - 2 dof.
Correlation pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of fractional (tie-averaged) ranks.
Correlation spearman(std::span<const double> x, std::span<const double> y);
/// 1-based ranks; tied values share the average of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Two-sided p-value of a correlation coefficient from n samples.
double correlation_p_value(double r, std::size_t n);

inline constexpr double kSignificanceLevel = 0.05;
/// "*" when the result is not statistically significant (p > 0.05).
std::string significance_marker(double p_value);

/// Min-max map onto [lo, hi]; a constant batch maps to the midpoint.
std::vector<double> normalize_scores(std::span<const double> scores, double lo = 1.0, double hi = 5.0);

/// Sentence BLEU with clipped n-gram precisions up to 4, geometric mean and
/// brevity penalty against the closest reference length. Orders longer than
/// the hypothesis are left out of the mean.
double bleu4(const std::vector<std::string>& hypothesis, const std::vector<std::vector<std::string>>& references);
/// Corpus BLEU-4: n-gram statistics pooled over all segments.
double corpus_bleu4(const std::vector<std::vector<std::string>>& hypotheses,
                    const std::vector<std::vector<std::vector<std::string>>>& references);
/// ROUGE-L F1 from the longest common subsequence.
double rouge_l(const std::vector<std::string>& hypothesis, const std::vector<std::string>& reference);

struct JudgmentRecord {
  std::array<std::string, 2> context;
  std::string response;
  double human_score = 0.0;
  std::vector<double> annotator_scores;

  void validate() const;
};

struct MetricScore {
  std::array<std::string, 2> context;
  std::string response;
  double score = 0.0;
};

struct CorrelationReport {
  Correlation pearson;
  Correlation spearman;
  std::size_t n = 0;
  std::vector<std::pair<double, double>> normalized_scores;  // (metric normalized to [1,5], human)

  nlohmann::json to_json() const;
  void write_scatter_csv(const std::filesystem::path& path) const;
};

/// Aligns metric scores to judgments on the exact (context, response) strings.
CorrelationReport correlation_report(const std::vector<MetricScore>& metric_scores,
                                     const std::vector<JudgmentRecord>& judgments);

}  // namespace grade
