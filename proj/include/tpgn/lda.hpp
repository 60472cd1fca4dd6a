#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tpgn/corpus.hpp"

namespace tpgn::lda {

using corpus::Tokens;

/// Trained LDA model. `counts` is the V x T word-topic assignment matrix
/// (row-major), `topic_totals[z]` its column sums.
class TopicModel {
 public:
  TopicModel() = default;
  TopicModel(std::size_t num_topics, Tokens vocabulary, std::vector<std::int64_t> counts, double alpha,
             double beta);

  std::size_t num_topics() const { return num_topics_; }
  std::size_t vocab_size() const { return vocabulary_.size(); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const Tokens& vocabulary() const { return vocabulary_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  const std::vector<std::int64_t>& topic_totals() const { return topic_totals_; }

  std::int64_t count(std::size_t word, std::size_t topic) const { return counts_[word * num_topics_ + topic]; }
  /// Index into the vocabulary, or -1.
  std::int64_t word_index(const std::string& word) const;

  /// Per-topic top-n lists consulted by article_topic_words. Defaults to n = 50.
  void set_top_words(std::size_t n);
  const std::vector<Tokens>& top_words() const { return top_words_; }

  /// Binary format: "TPGNLDA1", T, V (u64), alpha, beta (f64), V length-prefixed
  /// words, then the count matrix as int64; all little-endian.
  std::string serialize() const;
  static TopicModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static TopicModel load(const std::filesystem::path& path);

 private:
  std::size_t num_topics_ = 0;
  Tokens vocabulary_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> topic_totals_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Tokens> top_words_;
};

struct GibbsOptions {
  std::size_t num_topics = 10;
  double alpha = -1.0;  // negative: 50 / T
  double beta = 0.01;
  std::size_t iterations = 500;
  std::uint64_t seed = 1;
  std::size_t top_n = 50;
  /// Called every `report_every` sweeps with (sweep, mean log p(w|d)).
  std::function<void(std::size_t, double)> on_report;
  std::size_t report_every = 100;
};

/// Collapsed Gibbs sampling. The returned counts are the assignments after
/// the final sweep. Throws EmptyCorpus.
TopicModel gibbs_train(const std::vector<Tokens>& docs, const GibbsOptions& options);

/// Top n words per topic by count, descending, ties lexicographic. Words
/// never assigned to a topic are left out.
std::vector<Tokens> topic_words(const TopicModel& model, std::size_t n);

/// p(z | w) = C_wz / sum_z' C_wz'. Throws UnknownWord for unseen words.
std::vector<double> topic_embedding(const TopicModel& model, const std::string& word);

struct ArticleTopics {
  Tokens words;
  std::vector<double> prior;
  std::size_t dominant_topic = 0;
};

/// Infers topic proportions for an article with frozen counts and returns the
/// article's words found in its dominant topic's top-word list. Without any
/// such word: no words and the uniform 1/T prior.
ArticleTopics article_topic_words(const TopicModel& model, const Tokens& article_tokens, std::size_t infer_iters,
                                  std::uint64_t seed);

}  // namespace tpgn::lda
