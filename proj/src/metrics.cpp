#include "tpgn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include <nlohmann/json.hpp>

#include "tpgn/error.hpp"

namespace tpgn::metrics {

namespace {

void require_inputs(const Tokens& candidate, const References& references, const char* metric) {
  if (candidate.empty()) throw Error(ErrorKind::EmptyInput, std::string(metric) + ": empty candidate");
  if (references.empty()) throw Error(ErrorKind::EmptyInput, std::string(metric) + ": no references");
  for (const auto& r : references) {
    if (r.empty()) throw Error(ErrorKind::EmptyInput, std::string(metric) + ": empty reference");
  }
}

std::map<std::string, std::size_t> unigram_counts(const Tokens& tokens) {
  std::map<std::string, std::size_t> out;
  for (const auto& t : tokens) ++out[t];
  return out;
}

struct BleuStats {
  double clipped = 0.0;
  double cand_len = 0.0;
  double ref_len = 0.0;
};

BleuStats bleu_stats(const Tokens& candidate, const References& references) {
  require_inputs(candidate, references, "BLEU-1");
  std::map<std::string, std::size_t> max_ref;
  for (const auto& r : references) {
    for (const auto& [tok, n] : unigram_counts(r)) max_ref[tok] = std::max(max_ref[tok], n);
  }
  BleuStats s;
  for (const auto& [tok, n] : unigram_counts(candidate)) {
    auto it = max_ref.find(tok);
    if (it != max_ref.end()) s.clipped += static_cast<double>(std::min(n, it->second));
  }
  const auto c = static_cast<long>(candidate.size());
  long best = static_cast<long>(references.front().size());
  for (const auto& r : references) {
    const auto len = static_cast<long>(r.size());
    const auto diff = std::labs(len - c), best_diff = std::labs(best - c);
    if (diff < best_diff || (diff == best_diff && len < best)) best = len;
  }
  s.cand_len = static_cast<double>(c);
  s.ref_len = static_cast<double>(best);
  return s;
}

double bleu_from(const BleuStats& s) {
  const double precision = s.clipped / s.cand_len;
  const double bp = s.cand_len < s.ref_len ? std::exp(1.0 - s.ref_len / s.cand_len) : 1.0;
  return precision * bp;
}

}  // namespace

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const References& references) {
  require_inputs(candidate, references, "ROUGE-L");
  constexpr double beta2 = 1.2 * 1.2;
  double best = 0.0;
  for (const auto& ref : references) {
    const auto lcs = static_cast<double>(lcs_length(candidate, ref));
    if (lcs == 0.0) continue;
    const double recall = lcs / static_cast<double>(ref.size());
    const double precision = lcs / static_cast<double>(candidate.size());
    best = std::max(best, (1.0 + beta2) * recall * precision / (recall + beta2 * precision));
  }
  return best;
}

double bleu_1(const Tokens& candidate, const References& references) {
  return bleu_from(bleu_stats(candidate, references));
}

double corpus_bleu_1(const std::vector<Tokens>& candidates, const std::vector<References>& references) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorKind::InvalidArgument, "BLEU-1: candidate and reference counts differ");
  }
  if (candidates.empty()) throw Error(ErrorKind::EmptyInput, "BLEU-1: empty corpus");
  BleuStats total;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto s = bleu_stats(candidates[i], references[i]);
    total.clipped += s.clipped;
    total.cand_len += s.cand_len;
    total.ref_len += s.ref_len;
  }
  return bleu_from(total);
}

// ---- CIDEr-D ----

CiderD::CiderD(std::vector<References> references) : refs_(std::move(references)) {
  if (refs_.size() < 2) throw Error(ErrorKind::CorpusTooSmall, "CIDEr-D needs at least two articles");
  for (const auto& refs : refs_) {
    if (refs.empty()) throw Error(ErrorKind::EmptyInput, "CIDEr-D: article without references");
    std::set<Tokens> grams;
    for (const auto& r : refs) {
      for (int n = 1; n <= kMaxN; ++n) {
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= r.size(); ++i) {
          grams.emplace(r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(i + n));
        }
      }
    }
    for (const auto& g : grams) doc_freq_[g] += 1.0;
  }
  log_corpus_size_ = std::log(static_cast<double>(refs_.size()));
  for (const auto& refs : refs_) {
    std::vector<Vec> vecs;
    for (const auto& r : refs) vecs.push_back(vectorize(r));
    ref_vecs_.push_back(std::move(vecs));
  }
}

CiderD::Vec CiderD::vectorize(const Tokens& tokens) const {
  Vec v;
  for (int n = 1; n <= kMaxN; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
      v.weights[n - 1][Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                              tokens.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1.0;
    }
  }
  for (int n = 0; n < kMaxN; ++n) {
    for (auto& [gram, tf] : v.weights[n]) {
      auto it = doc_freq_.find(gram);
      const double df = std::log(std::max(1.0, it == doc_freq_.end() ? 0.0 : it->second));
      tf *= log_corpus_size_ - df;
      v.norm[n] += tf * tf;
    }
    v.norm[n] = std::sqrt(v.norm[n]);
  }
  // The reference scorer measures length in bigrams; kept for comparability.
  v.length = static_cast<double>(v.weights[1].empty() ? 0 : tokens.size() - 1);
  return v;
}

double CiderD::score(const Tokens& candidate, std::size_t article) const {
  if (article >= refs_.size()) throw Error(ErrorKind::InvalidArgument, "CIDEr-D: article index out of range");
  if (candidate.empty()) throw Error(ErrorKind::EmptyInput, "CIDEr-D: empty candidate");
  const Vec hyp = vectorize(candidate);
  double total = 0.0;
  for (const auto& ref : ref_vecs_[article]) {
    const double delta = hyp.length - ref.length;
    const double penalty = std::exp(-(delta * delta) / (2.0 * kSigma * kSigma));
    double sum_n = 0.0;
    for (int n = 0; n < kMaxN; ++n) {
      double val = 0.0;
      for (const auto& [gram, w] : hyp.weights[n]) {
        auto it = ref.weights[n].find(gram);
        if (it != ref.weights[n].end()) val += std::min(w, it->second) * it->second;
      }
      if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) val /= hyp.norm[n] * ref.norm[n];
      sum_n += val * penalty;
    }
    total += sum_n / kMaxN;
  }
  return total / static_cast<double>(ref_vecs_[article].size()) * 10.0;
}

double cider_d(const std::vector<Tokens>& candidates, const std::vector<References>& references) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorKind::InvalidArgument, "CIDEr-D: candidate and reference counts differ");
  }
  CiderD scorer(references);
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += scorer.score(candidates[i], i);
  return total / static_cast<double>(candidates.size());
}

// ---- top-N ----

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::RougeL: return "ROUGE-L";
    case Metric::Bleu1: return "BLEU-1";
    case Metric::CiderD: return "CIDEr-D";
  }
  return "?";
}

const char* top_n_mode_name(TopNMode m) {
  switch (m) {
    case TopNMode::MeanOfBest: return "mean_of_best_n";
    case TopNMode::NthBest: return "nth_best";
    case TopNMode::MaxOfFirst: return "max_of_first_n";
  }
  return "?";
}

std::vector<std::vector<double>> score_candidates(const std::vector<std::vector<Tokens>>& candidates,
                                                  const std::vector<References>& references, Metric metric) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorKind::InvalidArgument, "candidate and reference article counts differ");
  }
  std::unique_ptr<CiderD> cider;
  if (metric == Metric::CiderD) cider = std::make_unique<CiderD>(references);
  std::vector<std::vector<double>> out(candidates.size());
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    for (const auto& c : candidates[a]) {
      if (c.empty()) {
        out[a].push_back(0.0);
        continue;
      }
      switch (metric) {
        case Metric::RougeL: out[a].push_back(rouge_l(c, references[a])); break;
        case Metric::Bleu1: out[a].push_back(bleu_1(c, references[a])); break;
        case Metric::CiderD: out[a].push_back(cider->score(c, a)); break;
      }
    }
  }
  return out;
}

double top_n_from_scores(const std::vector<std::vector<double>>& scores, std::size_t n, TopNMode mode) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "top-N needs N >= 1");
  if (scores.empty()) throw Error(ErrorKind::EmptyInput, "top-N over no articles");
  double total = 0.0;
  for (const auto& article : scores) {
    if (article.empty()) throw Error(ErrorKind::EmptyInput, "top-N: article without candidates");
    const std::size_t k = std::min(n, article.size());
    double value = 0.0;
    if (mode == TopNMode::MaxOfFirst) {
      value = *std::max_element(article.begin(), article.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      std::vector<double> sorted = article;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      if (mode == TopNMode::NthBest) {
        value = sorted[k - 1];
      } else {
        for (std::size_t i = 0; i < k; ++i) value += sorted[i];
        value /= static_cast<double>(k);
      }
    }
    total += value;
  }
  return total / static_cast<double>(scores.size());
}

double top_n_score(const std::vector<std::vector<Tokens>>& candidates, const std::vector<References>& references,
                   std::size_t n, Metric metric, TopNMode mode) {
  return top_n_from_scores(score_candidates(candidates, references, metric), n, mode);
}

double diversity_count(const std::vector<std::vector<Tokens>>& candidates) {
  if (candidates.empty()) return 0.0;
  double total = 0.0;
  for (const auto& article : candidates) total += static_cast<double>(std::set<Tokens>(article.begin(), article.end()).size());
  return total / static_cast<double>(candidates.size());
}

ScoreReport score_report(const std::vector<std::string>& ids, const std::vector<std::vector<Tokens>>& candidates,
                         const std::vector<References>& references, const std::vector<std::size_t>& n_list,
                         TopNMode mode) {
  if (ids.size() != candidates.size()) throw Error(ErrorKind::InvalidArgument, "id and candidate counts differ");
  const auto rouge = score_candidates(candidates, references, Metric::RougeL);
  const auto bleu = score_candidates(candidates, references, Metric::Bleu1);
  std::optional<std::vector<std::vector<double>>> cider;
  if (references.size() >= 2) cider = score_candidates(candidates, references, Metric::CiderD);

  ScoreReport report;
  report.mode = mode;
  for (auto n : n_list) {
    ScoreRow row;
    row.n = n;
    row.rouge_l = 100.0 * top_n_from_scores(rouge, n, mode);
    row.bleu_1 = 100.0 * top_n_from_scores(bleu, n, mode);
    if (cider) row.cider_d = 100.0 * top_n_from_scores(*cider, n, mode);
    report.rows.push_back(row);
  }
  report.diversity = diversity_count(candidates);
  for (std::size_t a = 0; a < ids.size(); ++a) {
    ArticleScores s;
    s.id = ids[a];
    s.candidates = candidates[a].size();
    s.distinct = std::set<Tokens>(candidates[a].begin(), candidates[a].end()).size();
    for (double v : rouge[a]) s.rouge_l.push_back(100.0 * v);
    for (double v : bleu[a]) s.bleu_1.push_back(100.0 * v);
    if (cider) {
      for (double v : (*cider)[a]) s.cider_d.push_back(100.0 * v);
    }
    report.articles.push_back(std::move(s));
  }
  return report;
}

std::string report_json(const ScoreReport& report) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"N", r.n},
                    {"ROUGE-L", r.rouge_l},
                    {"BLEU-1", r.bleu_1},
                    {"CIDEr-D", r.cider_d ? json(*r.cider_d) : json(nullptr)},
                    {"METEOR", nullptr}});
  }
  json articles = json::array();
  for (const auto& a : report.articles) {
    articles.push_back({{"article_id", a.id},
                        {"candidates", a.candidates},
                        {"distinct", a.distinct},
                        {"ROUGE-L", a.rouge_l},
                        {"BLEU-1", a.bleu_1},
                        {"CIDEr-D", a.cider_d}});
  }
  json unavailable = {{"METEOR", "not implemented (needs external paraphrase resources)"}};
  if (!report.rows.empty() && !report.rows.front().cider_d) {
    unavailable["CIDEr-D"] = "needs at least two articles";
  }
  json out = {{"top_n_mode", top_n_mode_name(report.mode)},
              {"scale", 100},
              {"rows", rows},
              {"unavailable", unavailable},
              {"diversity", report.diversity},
              {"articles", articles}};
  return out.dump(2) + "\n";
}

}  // namespace tpgn::metrics
