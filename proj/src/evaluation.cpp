#include "grade/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace grade {

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) throw CorrelationError("correlation needs at least 3 samples");
  const double dof = static_cast<double>(n - 2);
  const double r2 = std::min(1.0, r * r);
  if (r2 >= 1.0) return 0.0;
  const double t = std::abs(r) * std::sqrt(dof / (1.0 - r2));
  boost::math::students_t dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw CorrelationError("correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw CorrelationError("correlation needs at least 3 samples, got " + std::to_string(n));
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw CorrelationError("correlation undefined: zero variance input");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return {r, correlation_p_value(r, n)};
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw CorrelationError("correlation inputs differ in length");
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

std::string significance_marker(double p_value) { return p_value > kSignificanceLevel ? "*" : ""; }

std::vector<double> normalize_scores(std::span<const double> scores, double lo, double hi) {
  if (scores.empty()) throw std::invalid_argument("normalize_scores: empty input");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  if (*mx == *mn) {
    std::fill(out.begin(), out.end(), (lo + hi) / 2.0);
    return out;
  }
  const double scale = (hi - lo) / (*mx - *mn);
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = lo + (scores[i] - *mn) * scale;
  return out;
}

namespace {

using Tokens = std::vector<std::string>;

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[Tokens(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

struct BleuStats {
  std::array<double, 4> matched{};
  std::array<double, 4> total{};
  double hyp_len = 0.0;
  double ref_len = 0.0;
};

void accumulate_bleu(const Tokens& hyp, const std::vector<Tokens>& refs, BleuStats& stats) {
  for (std::size_t n = 1; n <= 4; ++n) {
    auto hyp_counts = ngram_counts(hyp, n);
    std::map<std::vector<std::string>, int> max_ref;
    for (const auto& ref : refs)
      for (const auto& [g, c] : ngram_counts(ref, n)) max_ref[g] = std::max(max_ref[g], c);
    for (const auto& [g, c] : hyp_counts) {
      auto it = max_ref.find(g);
      stats.matched[n - 1] += std::min(c, it == max_ref.end() ? 0 : it->second);
      stats.total[n - 1] += c;
    }
  }
  stats.hyp_len += static_cast<double>(hyp.size());
  // Closest reference length, shorter one on ties.
  double best = -1.0;
  for (const auto& ref : refs) {
    const auto len = static_cast<double>(ref.size());
    if (best < 0.0 || std::abs(len - static_cast<double>(hyp.size())) < std::abs(best - static_cast<double>(hyp.size())) ||
        (std::abs(len - static_cast<double>(hyp.size())) == std::abs(best - static_cast<double>(hyp.size())) && len < best)) {
      best = len;
    }
  }
  stats.ref_len += std::max(best, 0.0);
}

double bleu_from_stats(const BleuStats& s) {
  if (s.hyp_len == 0.0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.total[n] == 0.0) continue;
    if (s.matched[n] == 0.0) return 0.0;
    log_sum += std::log(s.matched[n] / s.total[n]);
    ++orders;
  }
  if (orders == 0) return 0.0;
  const double bp = s.hyp_len >= s.ref_len ? 1.0 : std::exp(1.0 - s.ref_len / s.hyp_len);
  return bp * std::exp(log_sum / orders);
}

}  // namespace

double bleu4(const Tokens& hypothesis, const std::vector<Tokens>& references) {
  if (hypothesis.empty() || references.empty()) return 0.0;
  BleuStats stats;
  accumulate_bleu(hypothesis, references, stats);
  return bleu_from_stats(stats);
}

double corpus_bleu4(const std::vector<Tokens>& hypotheses, const std::vector<std::vector<Tokens>>& references) {
  if (hypotheses.size() != references.size()) throw std::invalid_argument("corpus_bleu4: size mismatch");
  BleuStats stats;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (!references[i].empty()) accumulate_bleu(hypotheses[i], references[i], stats);
  }
  return bleu_from_stats(stats);
}

double rouge_l(const Tokens& hypothesis, const Tokens& reference) {
  if (hypothesis.empty() || reference.empty()) return 0.0;
  const std::size_t m = hypothesis.size();
  const std::size_t n = reference.size();
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = hypothesis[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const auto lcs = static_cast<double>(prev[n]);
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(m);
  const double recall = lcs / static_cast<double>(n);
  return 2.0 * precision * recall / (precision + recall);
}

void JudgmentRecord::validate() const {
  if (!(human_score >= 1.0 && human_score <= 5.0)) {
    throw std::invalid_argument("judgment human_score must be in [1, 5]");
  }
  if (context[0].empty() || context[1].empty() || response.empty()) {
    throw std::invalid_argument("judgment has an empty context or response");
  }
}

nlohmann::json CorrelationReport::to_json() const {
  return {{"n", n},
          {"pearson", {{"r", pearson.coefficient}, {"p", pearson.p_value},
                       {"significant", pearson.p_value <= kSignificanceLevel},
                       {"marker", significance_marker(pearson.p_value)}}},
          {"spearman", {{"rho", spearman.coefficient}, {"p", spearman.p_value},
                        {"significant", spearman.p_value <= kSignificanceLevel},
                        {"marker", significance_marker(spearman.p_value)}}}};
}

void CorrelationReport::write_scatter_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scatter data " + path.string());
  out << "metric_score_normalized,human_score\n" << std::setprecision(17);
  for (const auto& [m, h] : normalized_scores) out << m << ',' << h << '\n';
}

CorrelationReport correlation_report(const std::vector<MetricScore>& metric_scores,
                                     const std::vector<JudgmentRecord>& judgments) {
  auto key = [](const std::array<std::string, 2>& c, const std::string& r) { return c[0] + '\x1f' + c[1] + '\x1f' + r; };
  std::map<std::string, double> by_key;
  for (const auto& m : metric_scores) by_key[key(m.context, m.response)] = m.score;

  std::vector<double> metric, human;
  std::vector<std::string> unmatched;
  for (const auto& j : judgments) {
    j.validate();
    auto it = by_key.find(key(j.context, j.response));
    if (it == by_key.end()) {
      unmatched.push_back(j.response);
      continue;
    }
    metric.push_back(it->second);
    human.push_back(j.human_score);
  }
  if (!unmatched.empty()) {
    std::ostringstream os;
    os << unmatched.size() << " judgment(s) have no scored counterpart; responses:";
    for (std::size_t i = 0; i < unmatched.size() && i < 10; ++i) os << " \"" << unmatched[i] << "\"";
    if (unmatched.size() > 10) os << " ...";
    throw AlignmentError(os.str());
  }
  if (metric.size() < 3) throw CorrelationError("correlation report needs at least 3 aligned records");

  CorrelationReport report;
  report.n = metric.size();
  const auto normalized = normalize_scores(metric);
  report.pearson = pearson(normalized, human);
  report.spearman = spearman(normalized, human);
  for (std::size_t i = 0; i < metric.size(); ++i) report.normalized_scores.emplace_back(normalized[i], human[i]);
  return report;
}

}  // namespace grade
