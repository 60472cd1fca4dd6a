#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpgn/corpus.hpp"
#include "tpgn/lda.hpp"
#include "tpgn/model.hpp"

namespace tpgn::generation {

using corpus::Tokens;

enum class DecodeMode { Greedy, Beam };

struct GenConfig {
  DecodeMode mode = DecodeMode::Greedy;
  std::size_t beam_width = 4;
  std::size_t max_len = 30;
  bool dedup = true;
  std::size_t keywords_per_sentence = 3;
  std::size_t keyword_window = 5;
  std::size_t max_article_len = 400;
  std::size_t topic_infer_iters = 50;
  std::uint64_t seed = 1;
  /// Concurrent per-sentence decodes; 0 reads TPGN_THREADS (default 1).
  std::size_t threads = 0;

  void validate() const;
};

struct Decoded {
  std::vector<std::int32_t> ids;  // extended ids, STOP included when emitted
  Tokens tokens;                  // rendered, STOP stripped
  double log_prob = 0.0;
  /// log_prob / ids.size()
  double normalized() const { return ids.empty() ? 0.0 : log_prob / static_cast<double>(ids.size()); }
};

/// Greedy: per-step argmax (lowest id on ties). Beam: hypotheses pruned by
/// cumulative log-probability and ranked by mean log-probability; the greedy
/// path always competes, so the result never scores below greedy. PAD and
/// START are never emitted.
Decoded decode(const model::TpgnModel& model, const model::EncodedArticle& enc, nn::Graph& g, const GenConfig& config);

/// Mean log-probability of a given continuation (ids, STOP included).
double sequence_score(const model::TpgnModel& model, const model::EncodedArticle& enc, nn::Graph& g,
                      const std::vector<std::int32_t>& ids);

struct GeneratedComment {
  std::size_t sentence_index = 0;
  Tokens keywords;
  Tokens comment;
};

/// One decode per sentence keyword list, in sentence order; topic words are
/// inferred once per article. With dedup, repeated comments keep their first
/// occurrence.
std::vector<GeneratedComment> generate_comments(const model::TpgnModel& model, const corpus::Article& article,
                                                const lda::TopicModel* topics, const GenConfig& config);

/// Same as above with explicit keyword lists instead of TextRank.
std::vector<GeneratedComment> generate_for_keywords(const model::TpgnModel& model, const corpus::Article& article,
                                                    const std::vector<Tokens>& keyword_lists,
                                                    const lda::TopicModel* topics, const GenConfig& config);

std::string format_generated(const std::string& article_id, const GeneratedComment& c);

/// TPGN_THREADS when set to a positive integer, else 1.
std::size_t default_threads();

}  // namespace tpgn::generation
