#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tpgn/corpus.hpp"
#include "tpgn/nn.hpp"

namespace tpgn::model {

using corpus::Tokens;
using corpus::Vocab;
using nn::Graph;
using nn::Var;

struct TpgnConfig {
  std::size_t embed_dim = 128;
  std::size_t hidden = 256;
  std::size_t vocab_cap = 9000;
  std::size_t topics = 100;
  bool use_keyword_attention = true;
  bool use_topic_attention = true;
  bool use_pointer = true;
  /// Adds the previous-token term W_y^T y_{t-1} to p_gen in topic-aware mode.
  bool pgen_prev_embedding = false;
  std::uint64_t seed = 1;
  double init_scale = 0.1;

  /// Either attention level active; selects the topic-aware p_gen form.
  bool topic_aware() const { return use_keyword_attention || use_topic_attention; }
  void validate() const;
};

/// Base vocabulary plus article-local ids for source tokens outside it.
class ExtendedVocab {
 public:
  ExtendedVocab() = default;
  ExtendedVocab(const Vocab& base, const Tokens& source);

  std::size_t base_size() const { return base_size_; }
  std::size_t size() const { return base_size_ + extra_.size(); }
  const Tokens& extra() const { return extra_; }
  /// Base id, else article-local id, else UNK.
  std::int32_t id(const std::string& token) const;
  const std::string& token(std::int32_t id) const;
  /// Extended id of every source position.
  const std::vector<std::int32_t>& source_ids() const { return source_ids_; }
  bool is_extra(std::int32_t id) const { return id >= static_cast<std::int32_t>(base_size_); }

 private:
  const Vocab* base_ = nullptr;
  std::size_t base_size_ = 0;
  Tokens extra_;
  std::unordered_map<std::string, std::int32_t> extra_id_;
  std::vector<std::int32_t> source_ids_;
};

/// Everything the encoder consumes for one article.
struct ArticleInput {
  Tokens tokens;
  Tokens keywords;
  /// Topic-word embeddings p(z|w), each of length T. May be empty.
  std::vector<std::vector<double>> topic_vectors;
  /// Used only when topic_vectors is empty; empty means uniform 1/T.
  std::vector<double> topic_prior;
};

struct EncodedArticle {
  std::vector<Var> states;  // h_i, 2H each
  Var state_matrix;         // N x 2H
  Var final;                // article BiLSTM final state
  Var keyword_repr;         // k_kw
  Var keyword_context;      // C_kkw
  Var topic_repr;           // k_t
  Var topic_context;        // C_kt
  Var joint;                // k_j = [k_kw, C_kkw, k_t, C_kt]
  ExtendedVocab extended_vocab;

  // Per-article terms of the decoder attention, computed once.
  Var projected_states;  // W_h h_i, N x A
  Var joint_term;        // W_k k_j
};

struct DecoderState {
  Var s;        // decoder hidden state s_t
  Var cell;     // LSTM memory
  Var context;  // previous context vector, fed back as input
};

struct Attention {
  Var weights;  // a_t
  Var context;  // c_t
};

struct StepOutput {
  Var distribution;  // over the extended vocabulary
  Var attention;
  Var p_gen;
  DecoderState next;
};

/// Topic-aware pointer-generator network. Parameters are registered in a
/// fixed order; every variant allocates all of them so checkpoints share one
/// layout. Not copyable: layers hold pointers into the parameter set.
class TpgnModel {
 public:
  TpgnModel(const TpgnConfig& config, Vocab vocab);
  TpgnModel(const TpgnModel&) = delete;
  TpgnModel& operator=(const TpgnModel&) = delete;
  TpgnModel(TpgnModel&&) = default;

  const TpgnConfig& config() const { return config_; }
  TpgnConfig& mutable_config() { return config_; }
  const Vocab& vocab() const { return vocab_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Throws EmptyArticle for an empty token list.
  EncodedArticle encode_article(Graph& g, const ArticleInput& input) const;

  /// e_i = v^T tanh(W_h h_i + W_s s + W_k k_j), a = softmax(e), c = sum_i a_i h_i.
  Attention decoder_attention(Graph& g, Var states, Var s, Var joint) const;

  /// sigma(w_c.c + w_s.s + w_j.k_j + b) in topic-aware mode, the plain
  /// pointer-generator form with w_y.y_{t-1} otherwise; 1 without the pointer.
  Var generation_probability(Graph& g, Var context, Var s, Var joint, Var prev_embedding) const;

  Var vocab_logits(Graph& g, Var s, Var context) const;

  DecoderState initial_state(Graph& g, const EncodedArticle& enc) const;

  /// One step: LSTM on [embed(input); previous context], attention, p_gen
  /// and the extended-vocabulary mixture. Extra ids embed as UNK.
  StepOutput decode_step(Graph& g, const EncodedArticle& enc, const DecoderState& state,
                         std::int32_t input_id) const;

  Var embed(Graph& g, std::int32_t id) const;

 private:
  Attention static_attention(Graph& g, const EncodedArticle& enc, Var query) const;
  Attention attend(Graph& g, Var projected_states, Var query_term, Var states) const;

  TpgnConfig config_;
  Vocab vocab_;
  nn::ParameterSet params_;

  nn::Parameter* embedding_ = nullptr;
  nn::LstmCell enc_fwd_, enc_bwd_, kw_fwd_, kw_bwd_, decoder_;
  nn::Parameter *static_wh_ = nullptr, *static_wq_ = nullptr, *static_v_ = nullptr;
  std::vector<nn::DenseLayer> topic_mlp_;
  nn::DenseLayer init_h_, init_c_;
  nn::Parameter *att_wh_ = nullptr, *att_ws_ = nullptr, *att_wk_ = nullptr, *att_v_ = nullptr;
  nn::DenseLayer out_;
  nn::Parameter *gen_wc_ = nullptr, *gen_ws_ = nullptr, *gen_wj_ = nullptr, *gen_wy_ = nullptr, *gen_b_ = nullptr;
};

/// P(w) = p_gen P_vocab(w) + (1 - p_gen) sum_{i: w_i = w} a_i over the
/// extended vocabulary, with P_vocab = softmax(vocab_logits).
Var output_distribution(Var p_gen, Var vocab_logits, Var attention, std::span<const std::int32_t> source_ids,
                        std::size_t extended_size);

}  // namespace tpgn::model
