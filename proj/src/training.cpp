#include "tpgn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tpgn/error.hpp"
#include "tpgn/rng.hpp"

namespace tpgn::training {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::InvalidArgument, "lr must be a finite value >= 0");
  if (!(accumulator_init > 0.0)) throw Error(ErrorKind::InvalidArgument, "accumulator_init must be positive");
  if (batch_size < 1 || max_article_len < 1 || max_comment_len < 1) {
    throw Error(ErrorKind::InvalidArgument, "batch size and length limits must be >= 1");
  }
}

model::ArticleInput build_article_input(const Tokens& tokens, const Tokens& keywords, const lda::TopicModel* topics,
                                        std::size_t infer_iters, std::uint64_t seed) {
  model::ArticleInput in;
  in.tokens = tokens;
  in.keywords = keywords;
  if (topics) {
    auto info = lda::article_topic_words(*topics, tokens, infer_iters, seed);
    for (const auto& w : info.words) in.topic_vectors.push_back(lda::topic_embedding(*topics, w));
    in.topic_prior = std::move(info.prior);
  }
  return in;
}

std::vector<Example> prepare_examples(const std::vector<corpus::TrainingTriple>& triples,
                                      const lda::TopicModel* topics, const TrainConfig& config) {
  std::map<std::string, model::ArticleInput> cache;
  std::vector<Example> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    if (t.target_comment.empty()) throw Error(ErrorKind::EmptyTarget, "triple for " + t.article_id + " has no comment");
    Tokens article(t.article_tokens.begin(),
                   t.article_tokens.begin() + static_cast<std::ptrdiff_t>(std::min(t.article_tokens.size(), config.max_article_len)));
    auto it = cache.find(t.article_id);
    if (it == cache.end()) {
      const auto seed = mix_seed(config.seed, cache.size());
      it = cache.emplace(t.article_id, build_article_input(article, {}, topics, config.topic_infer_iters, seed)).first;
    }
    Example ex;
    ex.input = it->second;
    ex.input.tokens = article;
    ex.input.keywords = t.keywords;
    ex.target.assign(t.target_comment.begin(),
                     t.target_comment.begin() + static_cast<std::ptrdiff_t>(std::min(t.target_comment.size(), config.max_comment_len)));
    out.push_back(std::move(ex));
  }
  return out;
}

nn::Var nll_loss(const model::TpgnModel& model, nn::Graph& g, const model::EncodedArticle& enc, const Tokens& target) {
  if (target.empty()) throw Error(ErrorKind::EmptyTarget, "target comment is empty");
  const auto& ext = enc.extended_vocab;
  std::vector<std::int32_t> ids;
  ids.reserve(target.size() + 1);
  for (const auto& tok : target) ids.push_back(ext.id(tok));
  ids.push_back(corpus::Vocab::kStop);

  std::vector<nn::Var> terms;
  terms.reserve(ids.size());
  auto state = model.initial_state(g, enc);
  std::int32_t input = corpus::Vocab::kStart;
  for (auto id : ids) {
    auto step = model.decode_step(g, enc, state, input);
    terms.push_back(nn::log_floor(nn::pick(step.distribution, static_cast<std::size_t>(id)), kProbabilityFloor));
    state = step.next;
    input = id;
  }
  return nn::scale(nn::mean(nn::concat(terms)), -1.0);
}

nn::Var example_loss(const model::TpgnModel& model, nn::Graph& g, const Example& example) {
  auto enc = model.encode_article(g, example.input);
  return nll_loss(model, g, enc, example.target);
}

TrainReport train(model::TpgnModel& model, const std::vector<Example>& examples, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  if (examples.empty()) throw Error(ErrorKind::EmptyCorpus, "no training examples");
  auto& params = model.params();
  params.reset_accumulators(config.accumulator_init);
  params.zero_grad();
  if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);

  Rng rng(config.seed);
  TrainReport report;
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(examples.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // Shuffle, then bucket by article length; batches are visited in random order.
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return examples[a].input.tokens.size() < examples[b].input.tokens.size();
    });
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      batches.emplace_back(i, std::min(order.size(), i + config.batch_size));
    }
    rng.shuffle(batches.begin(), batches.end());

    // Summed in example order so the epoch mean does not depend on the shuffle.
    std::vector<double> losses(examples.size());
    for (auto [lo, hi] : batches) {
      const double weight = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        nn::Graph g;
        nn::Var loss = example_loss(model, g, examples[order[i]]);
        const double value = loss.scalar();
        if (!std::isfinite(value)) {
          throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": loss " + std::to_string(value));
        }
        losses[order[i]] = value;
        g.backward(nn::scale(loss, weight));
      }
      const double norm = nn::clip_grad_norm(params, config.clip_norm);
      if (!std::isfinite(norm)) {
        throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": non-finite gradient norm");
      }
      nn::adagrad_step(params, config.lr);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(examples.size());
    stats.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool improved = report.epochs.empty() || stats.mean_loss < report.best_loss;
    if (improved) {
      report.best_loss = stats.mean_loss;
      report.best_epoch = epoch;
    }
    report.epochs.push_back(stats);
    if (!config.checkpoint_dir.empty()) {
      nn::save_checkpoint(params, config.checkpoint_dir / "last.ckpt");
      if (improved) nn::save_checkpoint(params, config.checkpoint_dir / "best.ckpt");
    }
    if (on_epoch) on_epoch(stats);
  }
  return report;
}

std::string report_json(const TrainReport& report) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"wallclock", e.wallclock}});
  }
  nlohmann::json out = {{"epochs", epochs}, {"best_epoch", report.best_epoch}, {"best_loss", report.best_loss}};
  return out.dump(2) + "\n";
}

}  // namespace tpgn::training
