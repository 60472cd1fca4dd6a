#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tpgn/corpus.hpp"
#include "tpgn/lda.hpp"
#include "tpgn/model.hpp"

namespace tpgn::training {

using corpus::Tokens;

struct TrainConfig {
  double lr = 0.1;
  double accumulator_init = 0.1;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::size_t max_article_len = 400;
  std::size_t max_comment_len = 100;
  double clip_norm = 2.0;
  std::uint64_t seed = 1;
  /// Gibbs sweeps when inferring an article's topic words.
  std::size_t topic_infer_iters = 50;
  /// When set, last.ckpt is written every epoch and best.ckpt whenever the
  /// epoch mean loss improves.
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

struct Example {
  model::ArticleInput input;
  Tokens target;
};

/// Topic words and their p(z|w) embeddings for one article. A null topic
/// model yields no topic words (uniform prior).
model::ArticleInput build_article_input(const Tokens& tokens, const Tokens& keywords, const lda::TopicModel* topics,
                                        std::size_t infer_iters, std::uint64_t seed);

/// Truncates articles and comments and attaches topic information. Topic
/// inference runs once per distinct article id.
std::vector<Example> prepare_examples(const std::vector<corpus::TrainingTriple>& triples,
                                      const lda::TopicModel* topics, const TrainConfig& config);

constexpr double kProbabilityFloor = 1e-12;

/// Teacher-forced mean token NLL of `target` followed by STOP, decoding from
/// START. Target tokens outside the base vocabulary use their article-local
/// id when copyable, UNK otherwise. Throws EmptyTarget.
nn::Var nll_loss(const model::TpgnModel& model, nn::Graph& g, const model::EncodedArticle& enc, const Tokens& target);

/// Encodes and scores one example on a fresh graph node set.
nn::Var example_loss(const model::TpgnModel& model, nn::Graph& g, const Example& example);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double wallclock = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
};

/// Seeded shuffled passes over length-bucketed batches: per batch, backward
/// of the mean example loss, global-norm clipping, then one Adagrad step.
/// Throws NonFiniteLoss when a loss or gradient stops being finite.
TrainReport train(model::TpgnModel& model, const std::vector<Example>& examples, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

std::string report_json(const TrainReport& report);

}  // namespace tpgn::training
