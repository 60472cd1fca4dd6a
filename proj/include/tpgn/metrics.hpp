#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tpgn/corpus.hpp"

namespace tpgn::metrics {

using corpus::Tokens;
using References = std::vector<Tokens>;

/// Length of the longest common subsequence.
std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// Max over references of the LCS F-measure
/// (1 + b^2) R P / (R + b^2 P), b = 1.2. Throws EmptyInput.
double rouge_l(const Tokens& candidate, const References& references);

/// Clipped unigram precision times the brevity penalty, using the reference
/// length closest to the candidate length (shorter wins ties).
double bleu_1(const Tokens& candidate, const References& references);
/// Corpus-level BLEU-1: clipped counts and lengths summed before dividing.
double corpus_bleu_1(const std::vector<Tokens>& candidates, const std::vector<References>& references);

/// CIDEr-D over a fixed reference corpus: document frequencies come from the
/// references of every article; candidates are scored against the
/// references of one article.
class CiderD {
 public:
  static constexpr int kMaxN = 4;
  static constexpr double kSigma = 6.0;

  /// Throws CorpusTooSmall for fewer than two articles.
  explicit CiderD(std::vector<References> references);

  double score(const Tokens& candidate, std::size_t article) const;
  std::size_t num_articles() const { return refs_.size(); }

 private:
  struct Vec {
    std::map<Tokens, double> weights[kMaxN];
    double norm[kMaxN] = {};
    double length = 0.0;
  };
  Vec vectorize(const Tokens& tokens) const;

  std::vector<References> refs_;
  std::vector<std::vector<Vec>> ref_vecs_;
  std::map<Tokens, double> doc_freq_;
  double log_corpus_size_ = 0.0;
};

/// Mean CIDEr-D over articles, one candidate each.
double cider_d(const std::vector<Tokens>& candidates, const std::vector<References>& references);

enum class Metric { RougeL, Bleu1, CiderD };
const char* metric_name(Metric m);

enum class TopNMode {
  MeanOfBest,  // mean of the N best candidate scores
  NthBest,     // the N-th best score (worst when fewer candidates)
  MaxOfFirst,  // best score among the first N candidates in generation order
};
const char* top_n_mode_name(TopNMode m);

/// Per-candidate scores for every article, in candidate order.
std::vector<std::vector<double>> score_candidates(const std::vector<std::vector<Tokens>>& candidates,
                                                  const std::vector<References>& references, Metric metric);

/// Averages the per-article top-N reduction over articles.
double top_n_from_scores(const std::vector<std::vector<double>>& scores, std::size_t n,
                         TopNMode mode = TopNMode::MeanOfBest);

double top_n_score(const std::vector<std::vector<Tokens>>& candidates, const std::vector<References>& references,
                   std::size_t n, Metric metric, TopNMode mode = TopNMode::MeanOfBest);

/// Mean number of distinct candidates per article.
double diversity_count(const std::vector<std::vector<Tokens>>& candidates);

// Scores in reports are scaled by 100.
struct ScoreRow {
  std::size_t n = 1;
  double rouge_l = 0.0;
  double bleu_1 = 0.0;
  std::optional<double> cider_d;  // unset when the corpus is too small
};

struct ArticleScores {
  std::string id;
  std::size_t candidates = 0;
  std::size_t distinct = 0;
  std::vector<double> rouge_l, bleu_1, cider_d;  // per candidate
};

struct ScoreReport {
  TopNMode mode = TopNMode::MeanOfBest;
  std::vector<ScoreRow> rows;
  double diversity = 0.0;
  std::vector<ArticleScores> articles;
};

/// Empty candidates score 0 on every metric.
ScoreReport score_report(const std::vector<std::string>& ids, const std::vector<std::vector<Tokens>>& candidates,
                         const std::vector<References>& references, const std::vector<std::size_t>& n_list,
                         TopNMode mode = TopNMode::MeanOfBest);
/// METEOR is listed as unavailable.
std::string report_json(const ScoreReport& report);

}  // namespace tpgn::metrics
