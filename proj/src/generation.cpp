#include "tpgn/generation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "tpgn/error.hpp"
#include "tpgn/rng.hpp"
#include "tpgn/textrank.hpp"
#include "tpgn/training.hpp"

namespace tpgn::generation {

using corpus::Vocab;

namespace {

bool blocked(std::int32_t id) { return id == Vocab::kPad || id == Vocab::kStart; }

struct Hyp {
  std::vector<std::int32_t> ids;
  model::DecoderState state;
  double log_prob = 0.0;
  bool done = false;
};

Tokens render(const model::EncodedArticle& enc, const std::vector<std::int32_t>& ids) {
  Tokens out;
  for (auto id : ids) {
    if (id == Vocab::kStop) break;
    out.push_back(enc.extended_vocab.token(id));
  }
  return out;
}

Decoded greedy(const model::TpgnModel& model, const model::EncodedArticle& enc, nn::Graph& g, std::size_t max_len) {
  Decoded out;
  auto state = model.initial_state(g, enc);
  std::int32_t input = Vocab::kStart;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto step = model.decode_step(g, enc, state, input);
    const auto dist = step.distribution.value();
    std::int32_t best = -1;
    for (std::size_t w = 0; w < dist.size(); ++w) {
      const auto id = static_cast<std::int32_t>(w);
      if (blocked(id)) continue;
      if (best < 0 || dist[w] > dist[static_cast<std::size_t>(best)]) best = id;
    }
    out.ids.push_back(best);
    out.log_prob += std::log(std::max(dist[static_cast<std::size_t>(best)], training::kProbabilityFloor));
    if (best == Vocab::kStop) break;
    state = step.next;
    input = best;
  }
  out.tokens = render(enc, out.ids);
  return out;
}

Decoded beam(const model::TpgnModel& model, const model::EncodedArticle& enc, nn::Graph& g, const GenConfig& config) {
  const std::size_t width = config.beam_width;
  std::vector<Hyp> live{Hyp{{}, model.initial_state(g, enc), 0.0, false}};
  std::vector<Hyp> finished;

  for (std::size_t t = 0; t < config.max_len && !live.empty(); ++t) {
    std::vector<Hyp> candidates;
    for (const auto& h : live) {
      const std::int32_t input = h.ids.empty() ? Vocab::kStart : h.ids.back();
      auto step = model.decode_step(g, enc, h.state, input);
      const auto dist = step.distribution.value();
      std::vector<std::int32_t> ranked;
      for (std::size_t w = 0; w < dist.size(); ++w) {
        if (!blocked(static_cast<std::int32_t>(w))) ranked.push_back(static_cast<std::int32_t>(w));
      }
      const std::size_t keep = std::min(width, ranked.size());
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                        [&](std::int32_t a, std::int32_t b) {
                          const double pa = dist[static_cast<std::size_t>(a)], pb = dist[static_cast<std::size_t>(b)];
                          return pa != pb ? pa > pb : a < b;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        const auto id = ranked[k];
        Hyp c;
        c.ids = h.ids;
        c.ids.push_back(id);
        c.state = step.next;
        c.log_prob = h.log_prob + std::log(std::max(dist[static_cast<std::size_t>(id)], training::kProbabilityFloor));
        c.done = id == Vocab::kStop;
        candidates.push_back(std::move(c));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hyp& a, const Hyp& b) { return a.log_prob > b.log_prob; });
    live.clear();
    const std::size_t take = std::min(width, candidates.size());
    for (std::size_t k = 0; k < take; ++k) {
      (candidates[k].done ? finished : live).push_back(std::move(candidates[k]));
    }
  }
  for (auto& h : live) finished.push_back(std::move(h));

  Decoded best = greedy(model, enc, g, config.max_len);
  for (const auto& h : finished) {
    Decoded d;
    d.ids = h.ids;
    d.log_prob = h.log_prob;
    if (d.normalized() > best.normalized()) {
      d.tokens = render(enc, d.ids);
      best = std::move(d);
    }
  }
  return best;
}

}  // namespace

void GenConfig::validate() const {
  if (beam_width < 1) throw Error(ErrorKind::InvalidArgument, "beam_width must be >= 1");
  if (max_len < 1) throw Error(ErrorKind::InvalidArgument, "max_len must be >= 1");
  if (keywords_per_sentence < 1) throw Error(ErrorKind::InvalidArgument, "keywords_per_sentence must be >= 1");
}

Decoded decode(const model::TpgnModel& model, const model::EncodedArticle& enc, nn::Graph& g, const GenConfig& config) {
  config.validate();
  if (config.mode == DecodeMode::Greedy || config.beam_width == 1) return greedy(model, enc, g, config.max_len);
  return beam(model, enc, g, config);
}

double sequence_score(const model::TpgnModel& model, const model::EncodedArticle& enc, nn::Graph& g,
                      const std::vector<std::int32_t>& ids) {
  if (ids.empty()) return 0.0;
  auto state = model.initial_state(g, enc);
  std::int32_t input = Vocab::kStart;
  double lp = 0.0;
  for (auto id : ids) {
    auto step = model.decode_step(g, enc, state, input);
    lp += std::log(std::max(step.distribution.value()[static_cast<std::size_t>(id)], training::kProbabilityFloor));
    state = step.next;
    input = id;
  }
  return lp / static_cast<double>(ids.size());
}

std::size_t default_threads() {
  if (const char* env = std::getenv("TPGN_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return 1;
}

std::vector<GeneratedComment> generate_for_keywords(const model::TpgnModel& model, const corpus::Article& article,
                                                    const std::vector<Tokens>& keyword_lists,
                                                    const lda::TopicModel* topics, const GenConfig& config) {
  config.validate();
  std::vector<GeneratedComment> out(keyword_lists.size());
  if (keyword_lists.empty()) return out;

  Tokens text = article.text();
  text.resize(std::min(text.size(), config.max_article_len));
  const auto base = training::build_article_input(text, {}, topics, config.topic_infer_iters, config.seed);

  auto run = [&](std::size_t i) {
    auto input = base;
    input.keywords = keyword_lists[i];
    nn::Graph g;
    auto enc = model.encode_article(g, input);
    out[i] = {i, keyword_lists[i], decode(model, enc, g, config).tokens};
  };

  const std::size_t threads = std::min(config.threads ? config.threads : default_threads(), keyword_lists.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < keyword_lists.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < keyword_lists.size(); i = next++) {
          try {
            run(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  if (config.dedup) {
    std::set<Tokens> seen;
    std::vector<GeneratedComment> unique;
    for (auto& c : out) {
      if (seen.insert(c.comment).second) unique.push_back(std::move(c));
    }
    out = std::move(unique);
  }
  return out;
}

std::vector<GeneratedComment> generate_comments(const model::TpgnModel& model, const corpus::Article& article,
                                                const lda::TopicModel* topics, const GenConfig& config) {
  textrank::KeywordOptions kw;
  kw.window = config.keyword_window;
  const auto keyword_lists = textrank::extract_sentence_keywords(article, config.keywords_per_sentence, kw);
  return generate_for_keywords(model, article, keyword_lists, topics, config);
}

std::string format_generated(const std::string& article_id, const GeneratedComment& c) {
  nlohmann::json obj = {{"article_id", article_id},
                        {"sentence_index", c.sentence_index},
                        {"keywords", c.keywords},
                        {"comment", corpus::join(c.comment)}};
  return obj.dump();
}

}  // namespace tpgn::generation
