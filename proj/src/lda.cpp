#include "tpgn/lda.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <set>

#include "tpgn/binary_io.hpp"
#include "tpgn/error.hpp"
#include "tpgn/rng.hpp"

namespace tpgn::lda {

namespace {

constexpr std::string_view kMagic = "TPGNLDA1";

// Draws an index from unnormalized non-negative weights.
std::size_t sample_index(const std::vector<double>& weights, double total, Rng& rng) {
#ifndef NDEBUG
  double check = 0.0;
  for (double w : weights) {
    assert(w >= 0.0 && std::isfinite(w));
    check += w / total;
  }
  assert(std::abs(check - 1.0) < 1e-9);
#endif
  double u = rng.uniform() * total;
  for (std::size_t z = 0; z + 1 < weights.size(); ++z) {
    u -= weights[z];
    if (u < 0.0) return z;
  }
  return weights.size() - 1;
}

}  // namespace

TopicModel::TopicModel(std::size_t num_topics, Tokens vocabulary, std::vector<std::int64_t> counts, double alpha,
                       double beta)
    : num_topics_(num_topics),
      vocabulary_(std::move(vocabulary)),
      counts_(std::move(counts)),
      alpha_(alpha),
      beta_(beta) {
  if (counts_.size() != vocabulary_.size() * num_topics_) {
    throw Error(ErrorKind::ShapeMismatch, "count matrix does not match V x T");
  }
  topic_totals_.assign(num_topics_, 0);
  for (std::size_t w = 0; w < vocabulary_.size(); ++w) {
    if (!index_.emplace(vocabulary_[w], w).second) {
      throw Error(ErrorKind::Format, "duplicate topic-model word '" + vocabulary_[w] + "'");
    }
    for (std::size_t z = 0; z < num_topics_; ++z) {
      if (count(w, z) < 0) throw Error(ErrorKind::Format, "negative topic count");
      topic_totals_[z] += count(w, z);
    }
  }
  set_top_words(50);
}

std::int64_t TopicModel::word_index(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void TopicModel::set_top_words(std::size_t n) { top_words_ = topic_words(*this, n); }

std::string TopicModel::serialize() const {
  std::string out(kMagic);
  io::put_u64(out, num_topics_);
  io::put_u64(out, vocabulary_.size());
  io::put_f64(out, alpha_);
  io::put_f64(out, beta_);
  for (const auto& w : vocabulary_) io::put_str(out, w);
  for (auto c : counts_) io::put_i64(out, c);
  return out;
}

TopicModel TopicModel::deserialize(std::string_view bytes) {
  io::Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) throw Error(ErrorKind::Format, "not a topic-model file");
  const auto t = in.u64();
  const auto v = in.u64();
  const double alpha = in.f64();
  const double beta = in.f64();
  if (t < 1 || v > bytes.size()) throw Error(ErrorKind::Format, "corrupt topic-model header");
  Tokens vocab;
  vocab.reserve(v);
  for (std::uint64_t i = 0; i < v; ++i) vocab.push_back(in.str());
  std::vector<std::int64_t> counts(v * t);
  for (auto& c : counts) c = in.i64();
  if (!in.done()) throw Error(ErrorKind::Format, "trailing bytes in topic-model file");
  return TopicModel(t, std::move(vocab), std::move(counts), alpha, beta);
}

void TopicModel::save(const std::filesystem::path& path) const { corpus::write_file(path, serialize()); }

TopicModel TopicModel::load(const std::filesystem::path& path) { return deserialize(corpus::read_file(path)); }

TopicModel gibbs_train(const std::vector<Tokens>& docs, const GibbsOptions& options) {
  const std::size_t T = options.num_topics;
  if (T < 2) throw Error(ErrorKind::InvalidArgument, "LDA needs at least 2 topics");
  if (options.iterations < 1) throw Error(ErrorKind::InvalidArgument, "LDA needs at least 1 iteration");
  const double alpha = options.alpha > 0.0 ? options.alpha : 50.0 / static_cast<double>(T);
  const double beta = options.beta;
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");

  std::set<std::string> words;
  for (const auto& d : docs) words.insert(d.begin(), d.end());
  if (words.empty()) throw Error(ErrorKind::EmptyCorpus, "no tokens to train LDA on");
  const Tokens vocab(words.begin(), words.end());
  const std::size_t V = vocab.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < V; ++i) index.emplace(vocab[i], i);

  std::vector<std::vector<std::size_t>> doc_words(docs.size());
  std::vector<std::vector<std::size_t>> assign(docs.size());
  std::vector<std::int64_t> n_wz(V * T, 0), n_z(T, 0);
  std::vector<std::vector<std::int64_t>> n_dz(docs.size(), std::vector<std::int64_t>(T, 0));

  Rng rng(options.seed);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& tok : docs[d]) {
      const auto w = index.at(tok);
      const auto z = static_cast<std::size_t>(rng.below(T));
      doc_words[d].push_back(w);
      assign[d].push_back(z);
      ++n_wz[w * T + z];
      ++n_z[z];
      ++n_dz[d][z];
    }
  }

  const double vbeta = static_cast<double>(V) * beta;
  std::vector<double> p(T);
  for (std::size_t sweep = 1; sweep <= options.iterations; ++sweep) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (std::size_t i = 0; i < doc_words[d].size(); ++i) {
        const auto w = doc_words[d][i];
        auto z = assign[d][i];
        --n_wz[w * T + z];
        --n_z[z];
        --n_dz[d][z];
        double total = 0.0;
        for (std::size_t k = 0; k < T; ++k) {
          p[k] = (static_cast<double>(n_dz[d][k]) + alpha) * (static_cast<double>(n_wz[w * T + k]) + beta) /
                 (static_cast<double>(n_z[k]) + vbeta);
          total += p[k];
        }
        z = sample_index(p, total, rng);
        assign[d][i] = z;
        ++n_wz[w * T + z];
        ++n_z[z];
        ++n_dz[d][z];
      }
    }

    if (options.on_report && options.report_every > 0 &&
        (sweep % options.report_every == 0 || sweep == options.iterations)) {
      double ll = 0.0;
      std::size_t n = 0;
      for (std::size_t d = 0; d < docs.size(); ++d) {
        const double nd = static_cast<double>(doc_words[d].size());
        for (auto w : doc_words[d]) {
          double pw = 0.0;
          for (std::size_t k = 0; k < T; ++k) {
            const double theta = (static_cast<double>(n_dz[d][k]) + alpha) / (nd + static_cast<double>(T) * alpha);
            const double phi = (static_cast<double>(n_wz[w * T + k]) + beta) / (static_cast<double>(n_z[k]) + vbeta);
            pw += theta * phi;
          }
          ll += std::log(pw);
          ++n;
        }
      }
      options.on_report(sweep, ll / static_cast<double>(n));
    }
  }

  TopicModel model(T, vocab, std::move(n_wz), alpha, beta);
  model.set_top_words(options.top_n);
  return model;
}

std::vector<Tokens> topic_words(const TopicModel& model, std::size_t n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "topic word count must be >= 1");
  const std::size_t V = model.vocab_size();
  std::vector<Tokens> out(model.num_topics());
  std::vector<std::size_t> order(V);
  for (std::size_t z = 0; z < model.num_topics(); ++z) {
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min(n, V);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const auto ca = model.count(a, z), cb = model.count(b, z);
                        return ca != cb ? ca > cb : model.vocabulary()[a] < model.vocabulary()[b];
                      });
    for (std::size_t i = 0; i < keep && model.count(order[i], z) > 0; ++i) out[z].push_back(model.vocabulary()[order[i]]);
  }
  return out;
}

std::vector<double> topic_embedding(const TopicModel& model, const std::string& word) {
  const auto w = model.word_index(word);
  if (w < 0) throw Error(ErrorKind::UnknownWord, "word '" + word + "' was not seen by the topic model");
  const auto row = static_cast<std::size_t>(w);
  std::vector<double> dist(model.num_topics());
  double total = 0.0;
  for (std::size_t z = 0; z < dist.size(); ++z) total += static_cast<double>(model.count(row, z));
  // A vocabulary word always carries at least one assignment.
  for (std::size_t z = 0; z < dist.size(); ++z) dist[z] = static_cast<double>(model.count(row, z)) / total;
  return dist;
}

ArticleTopics article_topic_words(const TopicModel& model, const Tokens& article_tokens, std::size_t infer_iters,
                                  std::uint64_t seed) {
  const std::size_t T = model.num_topics();
  ArticleTopics out;
  out.prior.assign(T, 1.0 / static_cast<double>(T));

  std::vector<std::size_t> words;
  for (const auto& tok : article_tokens) {
    const auto w = model.word_index(tok);
    if (w >= 0) words.push_back(static_cast<std::size_t>(w));
  }
  if (words.empty()) return out;

  const double alpha = model.alpha(), beta = model.beta();
  const double vbeta = static_cast<double>(model.vocab_size()) * beta;
  Rng rng(seed);
  std::vector<std::size_t> assign(words.size());
  std::vector<std::int64_t> n_dz(T, 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    assign[i] = static_cast<std::size_t>(rng.below(T));
    ++n_dz[assign[i]];
  }
  std::vector<double> p(T);
  for (std::size_t it = 0; it < infer_iters; ++it) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      --n_dz[assign[i]];
      double total = 0.0;
      for (std::size_t k = 0; k < T; ++k) {
        p[k] = (static_cast<double>(n_dz[k]) + alpha) * (static_cast<double>(model.count(words[i], k)) + beta) /
               (static_cast<double>(model.topic_totals()[k]) + vbeta);
        total += p[k];
      }
      assign[i] = sample_index(p, total, rng);
      ++n_dz[assign[i]];
    }
  }

  std::vector<double> theta(T);
  const double denom = static_cast<double>(words.size()) + static_cast<double>(T) * alpha;
  for (std::size_t k = 0; k < T; ++k) theta[k] = (static_cast<double>(n_dz[k]) + alpha) / denom;
  const auto dominant =
      static_cast<std::size_t>(std::max_element(theta.begin(), theta.end()) - theta.begin());

  out.dominant_topic = dominant;
  const auto& top = model.top_words()[dominant];
  const std::set<std::string> top_set(top.begin(), top.end());
  std::set<std::string> seen;
  for (const auto& tok : article_tokens) {
    if (top_set.count(tok) && seen.insert(tok).second) out.words.push_back(tok);
  }
  if (!out.words.empty()) out.prior = std::move(theta);
  return out;
}

}  // namespace tpgn::lda
