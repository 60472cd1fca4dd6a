#include "tpgn/model.hpp"

#include "tpgn/error.hpp"
#include "tpgn/rng.hpp"

namespace tpgn::model {

void TpgnConfig::validate() const {
  if (embed_dim == 0 || hidden == 0 || topics == 0) {
    throw Error(ErrorKind::InvalidArgument, "model dimensions must be positive");
  }
  if (vocab_cap < 5) throw Error(ErrorKind::InvalidArgument, "vocab_cap must be at least 5");
}

// ---- ExtendedVocab ----

ExtendedVocab::ExtendedVocab(const Vocab& base, const Tokens& source) : base_(&base), base_size_(base.size()) {
  source_ids_.reserve(source.size());
  for (const auto& tok : source) {
    if (base.contains(tok)) {
      source_ids_.push_back(base.id(tok));
      continue;
    }
    auto [it, inserted] = extra_id_.emplace(tok, static_cast<std::int32_t>(base_size_ + extra_.size()));
    if (inserted) extra_.push_back(tok);
    source_ids_.push_back(it->second);
  }
}

std::int32_t ExtendedVocab::id(const std::string& token) const {
  if (base_->contains(token)) return base_->id(token);
  auto it = extra_id_.find(token);
  return it == extra_id_.end() ? Vocab::kUnk : it->second;
}

const std::string& ExtendedVocab::token(std::int32_t id) const {
  if (is_extra(id)) {
    const auto k = static_cast<std::size_t>(id) - base_size_;
    if (k >= extra_.size()) throw Error(ErrorKind::InvalidArgument, "extended id out of range");
    return extra_[k];
  }
  return base_->token(id);
}

// ---- TpgnModel ----

TpgnModel::TpgnModel(const TpgnConfig& config, Vocab vocab) : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  if (vocab_.size() > config_.vocab_cap) {
    throw Error(ErrorKind::ShapeMismatch, "vocabulary of " + std::to_string(vocab_.size()) +
                                              " exceeds vocab_cap " + std::to_string(config_.vocab_cap));
  }
  Rng rng(config_.seed);
  const double s = config_.init_scale;
  const std::size_t E = config_.embed_dim, H = config_.hidden, H2 = 2 * H, A = 2 * H, T = config_.topics;
  const std::size_t V = vocab_.size();
  using nn::Init;

  embedding_ = &params_.add("embedding", V, E, Init::Uniform, rng, s);
  enc_fwd_ = nn::LstmCell::create(params_, "encoder.fwd", E, H, rng);
  enc_bwd_ = nn::LstmCell::create(params_, "encoder.bwd", E, H, rng);
  kw_fwd_ = nn::LstmCell::create(params_, "keywords.fwd", E, H, rng);
  kw_bwd_ = nn::LstmCell::create(params_, "keywords.bwd", E, H, rng);

  static_wh_ = &params_.add("query_attention.w_state", A, H2, Init::Uniform, rng, s);
  static_wq_ = &params_.add("query_attention.w_query", A, H2, Init::Uniform, rng, s);
  static_v_ = &params_.add("query_attention.v", A, 1, Init::Uniform, rng, s);

  topic_mlp_.push_back(nn::make_dense(params_, "topic_mlp.0", T, H2, nn::Activation::Tanh, rng));
  topic_mlp_.push_back(nn::make_dense(params_, "topic_mlp.1", H2, H2, nn::Activation::Tanh, rng));

  init_h_ = nn::make_dense(params_, "decoder_init.h", H2, H, nn::Activation::Linear, rng);
  init_c_ = nn::make_dense(params_, "decoder_init.c", H2, H, nn::Activation::Linear, rng);
  decoder_ = nn::LstmCell::create(params_, "decoder", E + H2, H, rng);

  att_wh_ = &params_.add("attention.w_state", A, H2, Init::Uniform, rng, s);
  att_ws_ = &params_.add("attention.w_decoder", A, H, Init::Uniform, rng, s);
  att_wk_ = &params_.add("attention.w_joint", A, 8 * H, Init::Uniform, rng, s);
  att_v_ = &params_.add("attention.v", A, 1, Init::Uniform, rng, s);

  out_ = nn::make_dense(params_, "output", H + H2, V, nn::Activation::Linear, rng);

  gen_wc_ = &params_.add("p_gen.w_context", H2, 1, Init::Uniform, rng, s);
  gen_ws_ = &params_.add("p_gen.w_state", H, 1, Init::Uniform, rng, s);
  gen_wj_ = &params_.add("p_gen.w_joint", 8 * H, 1, Init::Uniform, rng, s);
  gen_wy_ = &params_.add("p_gen.w_prev", E, 1, Init::Uniform, rng, s);
  gen_b_ = &params_.add("p_gen.bias", 1, 1, Init::Zero, rng);
}

Var TpgnModel::embed(Graph& g, std::int32_t id) const {
  const auto row = (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) ? Vocab::kUnk : id;
  return nn::embedding(g, *embedding_, static_cast<std::size_t>(row));
}

Attention TpgnModel::attend(Graph& g, Var projected_states, Var query_term, Var states) const {
  Var scores = nn::matvec(nn::tanh(nn::add_rows(projected_states, query_term)), g.param(*att_v_));
  Var weights = nn::softmax(scores);
  return {weights, nn::weighted_rows(weights, states)};
}

Attention TpgnModel::static_attention(Graph& g, const EncodedArticle& enc, Var query) const {
  Var projected = nn::project_rows(*static_wh_, enc.state_matrix);
  Var scores = nn::matvec(nn::tanh(nn::add_rows(projected, nn::matvec(*static_wq_, query))), g.param(*static_v_));
  Var weights = nn::softmax(scores);
  return {weights, nn::weighted_rows(weights, enc.state_matrix)};
}

EncodedArticle TpgnModel::encode_article(Graph& g, const ArticleInput& input) const {
  if (input.tokens.empty()) throw Error(ErrorKind::EmptyArticle, "article has no tokens");
  const std::size_t H2 = 2 * config_.hidden, T = config_.topics;

  EncodedArticle enc;
  enc.extended_vocab = ExtendedVocab(vocab_, input.tokens);

  std::vector<Var> xs;
  xs.reserve(input.tokens.size());
  for (const auto& tok : input.tokens) xs.push_back(embed(g, vocab_.id(tok)));
  auto article = nn::bilstm_encode(enc_fwd_, enc_bwd_, xs);
  enc.states = std::move(article.states);
  enc.final = article.final;
  enc.state_matrix = nn::stack(enc.states);

  if (config_.use_keyword_attention) {
    if (input.keywords.empty()) {
      enc.keyword_repr = g.zeros(H2);
    } else {
      std::vector<Var> ks;
      for (const auto& kw : input.keywords) ks.push_back(embed(g, vocab_.id(kw)));
      enc.keyword_repr = nn::bilstm_encode(kw_fwd_, kw_bwd_, ks).final;
    }
    enc.keyword_context = static_attention(g, enc, enc.keyword_repr).context;
  } else {
    enc.keyword_repr = g.zeros(H2);
    enc.keyword_context = g.zeros(H2);
  }

  if (config_.use_topic_attention) {
    Var topic_in;
    if (!input.topic_vectors.empty()) {
      std::vector<Var> rows;
      for (const auto& v : input.topic_vectors) {
        if (v.size() != T) throw Error(ErrorKind::ShapeMismatch, "topic embedding length differs from topic count");
        rows.push_back(g.constant(v));
      }
      topic_in = nn::mean_rows(nn::stack(rows));
    } else if (!input.topic_prior.empty()) {
      if (input.topic_prior.size() != T) throw Error(ErrorKind::ShapeMismatch, "topic prior length differs from topic count");
      topic_in = g.constant(input.topic_prior);
    } else {
      topic_in = g.constant(std::vector<double>(T, 1.0 / static_cast<double>(T)));
    }
    enc.topic_repr = nn::mlp_forward(topic_mlp_, topic_in);
    enc.topic_context = static_attention(g, enc, enc.topic_repr).context;
  } else {
    enc.topic_repr = g.zeros(H2);
    enc.topic_context = g.zeros(H2);
  }

  enc.joint = nn::concat({enc.keyword_repr, enc.keyword_context, enc.topic_repr, enc.topic_context});
  enc.projected_states = nn::project_rows(*att_wh_, enc.state_matrix);
  enc.joint_term = nn::matvec(*att_wk_, enc.joint);
  return enc;
}

Attention TpgnModel::decoder_attention(Graph& g, Var states, Var s, Var joint) const {
  if (states.cols() != 2 * config_.hidden || s.size() != config_.hidden || joint.size() != 8 * config_.hidden) {
    throw Error(ErrorKind::ShapeMismatch, "decoder attention inputs do not match the model dimensions");
  }
  Var projected = nn::project_rows(*att_wh_, states);
  Var query = nn::add(nn::matvec(*att_ws_, s), nn::matvec(*att_wk_, joint));
  return attend(g, projected, query, states);
}

Var TpgnModel::generation_probability(Graph& g, Var context, Var s, Var joint, Var prev_embedding) const {
  if (!config_.use_pointer) return g.constant({1.0});
  Var z = nn::add(nn::dot(g.param(*gen_wc_), context), nn::dot(g.param(*gen_ws_), s));
  if (config_.topic_aware()) {
    z = nn::add(z, nn::dot(g.param(*gen_wj_), joint));
    if (config_.pgen_prev_embedding) z = nn::add(z, nn::dot(g.param(*gen_wy_), prev_embedding));
  } else {
    z = nn::add(z, nn::dot(g.param(*gen_wy_), prev_embedding));
  }
  return nn::sigmoid(nn::add(z, g.param(*gen_b_)));
}

Var TpgnModel::vocab_logits(Graph&, Var s, Var context) const { return nn::dense_forward(out_, nn::concat({s, context})); }

DecoderState TpgnModel::initial_state(Graph& g, const EncodedArticle& enc) const {
  return {nn::dense_forward(init_h_, enc.final), nn::dense_forward(init_c_, enc.final), g.zeros(2 * config_.hidden)};
}

StepOutput TpgnModel::decode_step(Graph& g, const EncodedArticle& enc, const DecoderState& state,
                                  std::int32_t input_id) const {
  Var y = embed(g, input_id);
  auto lstm = nn::lstm_step(decoder_, nn::concat({y, state.context}), state.s, state.cell);
  Var query = nn::add(nn::matvec(*att_ws_, lstm.h), enc.joint_term);
  Attention att = attend(g, enc.projected_states, query, enc.state_matrix);
  Var p_gen = generation_probability(g, att.context, lstm.h, enc.joint, y);
  Var logits = vocab_logits(g, lstm.h, att.context);
  const auto& ext = enc.extended_vocab;
  Var dist = output_distribution(p_gen, logits, att.weights, ext.source_ids(), ext.size());
  return {dist, att.weights, p_gen, {lstm.h, lstm.c, att.context}};
}

Var output_distribution(Var p_gen, Var vocab_logits, Var attention, std::span<const std::int32_t> source_ids,
                        std::size_t extended_size) {
  return nn::pointer_mixture(p_gen, nn::softmax(vocab_logits), attention, source_ids, extended_size);
}

}  // namespace tpgn::model
