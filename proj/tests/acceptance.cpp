// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metric_oracles.hpp"
#include "model_fixture.hpp"
#include "planted.hpp"
#include "support.hpp"
#include "textrank_oracle.hpp"
#include "tpgn/generation.hpp"
#include "tpgn/lda.hpp"
#include "tpgn/metrics.hpp"
#include "tpgn/pipeline.hpp"
#include "tpgn/textrank.hpp"
#include "tpgn/training.hpp"

using namespace tpgn;
using corpus::Tokens;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// ---------------------------------------------------------------------------
// Overfit corpus shared by 4 and 8.

struct OverfitCorpus {
  std::vector<corpus::Article> articles;
  corpus::Vocab vocab;
  lda::TopicModel topics;
  std::vector<training::Example> examples;
};

constexpr std::size_t kTopics = 4;

training::TrainConfig overfit_train_config(std::uint64_t seed) {
  training::TrainConfig c;
  c.lr = 0.1;
  c.epochs = 500;
  c.batch_size = 4;
  c.seed = seed;
  c.topic_infer_iters = 20;
  return c;
}

model::TpgnConfig overfit_model_config(std::size_t vocab_size, std::uint64_t seed) {
  model::TpgnConfig c;
  c.embed_dim = 16;
  c.hidden = 16;
  c.topics = kTopics;
  c.vocab_cap = vocab_size;
  c.seed = seed;
  c.init_scale = 0.1;
  return c;
}

Tokens article_keywords(const corpus::Article& a, std::size_t k) {
  Tokens text;
  for (const auto& s : textrank::split_sentences(a.text())) text.insert(text.end(), s.begin(), s.end());
  return textrank::extract_keywords(text, k);
}

const OverfitCorpus& overfit_corpus() {
  static const OverfitCorpus oc = [] {
    OverfitCorpus c;
    c.articles = testing::synthetic_articles(20, 11);
    c.vocab = corpus::build_vocab(c.articles, 1000);
    std::vector<Tokens> docs;
    for (const auto& a : c.articles) docs.push_back(a.text());
    lda::GibbsOptions lo;
    lo.num_topics = kTopics;
    lo.iterations = 200;
    lo.seed = 5;
    c.topics = lda::gibbs_train(docs, lo);

    std::vector<corpus::TrainingTriple> triples;
    for (std::size_t i = 0; i < c.articles.size(); ++i) {
      for (auto& t : corpus::build_triples(c.articles[i], article_keywords(c.articles[i], 5), {}, mix_seed(3, i))) {
        triples.push_back(std::move(t));
      }
    }
    c.examples = training::prepare_examples(triples, &c.topics, overfit_train_config(1));

    return c;
  }();
  return oc;
}

struct TrainedModel {
  model::TpgnModel model;
  double final_loss = 0.0;
  double seconds = 0.0;
};

TrainedModel train_overfit(bool keyword_attn, bool topic_attn, std::uint64_t seed) {
  const auto& oc = overfit_corpus();
  auto mc = overfit_model_config(oc.vocab.size(), seed);
  mc.use_keyword_attention = keyword_attn;
  mc.use_topic_attention = topic_attn;
  TrainedModel out{model::TpgnModel(mc, oc.vocab)};
  const auto t0 = std::chrono::steady_clock::now();
  training::train(out.model, oc.examples, overfit_train_config(seed));
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double total = 0.0;
  for (const auto& ex : oc.examples) {
    nn::Graph g;
    total += training::example_loss(out.model, g, ex).scalar();
  }
  out.final_loss = total / static_cast<double>(oc.examples.size());
  return out;
}

const TrainedModel& full_overfit_model() {
  static const TrainedModel m = train_overfit(true, true, 1);
  return m;
}

Tokens greedy(const model::TpgnModel& m, const model::ArticleInput& in, std::size_t max_len = 12) {
  nn::Graph g;
  const auto enc = m.encode_article(g, in);
  generation::GenConfig gc;
  gc.max_len = max_len;
  return generation::decode(m, enc, g, gc).tokens;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto vocab = testing::word_vocab(20);
  auto cfg = testing::small_config(vocab.size(), 2);
  cfg.hidden = 8;
  cfg.embed_dim = 6;
  cfg.topics = 4;
  model::TpgnModel m(cfg, vocab);
  training::Example a, b;
  a.input.tokens = {"w1", "w5", "oovA", "w7", "w1", "w12"};
  a.input.keywords = {"w5", "oovA"};
  a.input.topic_vectors = {{0.1, 0.2, 0.3, 0.4}, {0.6, 0.2, 0.1, 0.1}};
  a.target = {"w5", "oovA", "w3"};
  b.input.tokens = {"w9", "w2", "w19", "w4"};
  b.input.keywords = {"w19"};
  b.input.topic_prior = {0.4, 0.3, 0.2, 0.1};
  b.target = {"w19", "w0"};

  const auto t0 = std::chrono::steady_clock::now();
  const auto r = testing::check_gradients(m.params(), [&](nn::Graph& g) {
    return nn::scale(nn::add(training::example_loss(m, g, a), training::example_loss(m, g, b)), 0.5);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {r.max_rel_error < 1e-3 && secs < 60.0 && r.checked == m.params().num_values(),
          std::to_string(r.checked) + " entries (" + std::to_string(r.nonzero) + " nonzero), max rel error " +
              fmt("%.3g", r.max_rel_error) + ", max abs error " + fmt("%.2g", r.max_abs_error) + ", " +
              fmt("%.1f", secs) + " s"};
}

Outcome normalization() {
  Rng rng(1001);
  double worst_sum = 0.0, min_p = 1.0;
  std::size_t oov_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto words = 5 + rng.below(20);
    const auto vocab = testing::word_vocab(words);
    auto cfg = testing::small_config(vocab.size(), 5000 + static_cast<std::uint64_t>(trial));
    cfg.hidden = 2 + rng.below(8);
    cfg.embed_dim = 2 + rng.below(8);
    cfg.topics = 2 + rng.below(4);
    cfg.init_scale = rng.uniform(0.05, 2.0);
    cfg.use_keyword_attention = rng.below(2);
    cfg.use_topic_attention = rng.below(2);
    cfg.use_pointer = rng.below(5) != 0;
    cfg.pgen_prev_embedding = rng.below(2);
    const model::TpgnModel m(cfg, vocab);
    const bool oov = rng.below(2);
    const auto in = testing::random_input(rng, words, cfg.topics, 1 + rng.below(12), oov);
    nn::Graph g;
    const auto enc = m.encode_article(g, in);
    oov_cases += enc.extended_vocab.extra().empty() ? 0 : 1;
    auto state = m.initial_state(g, enc);
    std::int32_t prev = corpus::Vocab::kStart;
    for (int t = 0; t < 4; ++t) {
      const auto step = m.decode_step(g, enc, state, prev);
      double s = 0.0;
      for (double p : step.distribution.value()) {
        min_p = std::min(min_p, p);
        s += p;
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      state = step.next;
      prev = static_cast<std::int32_t>(rng.below(enc.extended_vocab.size()));
    }
  }
  return {worst_sum <= 1e-9 && min_p >= 0.0 && oov_cases > 0,
          "max |sum - 1| " + fmt("%.2g", worst_sum) + ", min p " + fmt("%.2g", min_p) + ", " +
              std::to_string(oov_cases) + " instances with oov tokens"};
}

Outcome copy_mechanism() {
  Rng rng(77);
  double worst = 0.0;
  bool all_zero = true;
  for (int trial = 0; trial < 200; ++trial) {
    const auto vocab = testing::word_vocab(10);
    auto cfg = testing::small_config(vocab.size(), 900 + static_cast<std::uint64_t>(trial));
    cfg.use_keyword_attention = rng.below(2);
    cfg.use_topic_attention = rng.below(2);
    model::TpgnModel m(cfg, vocab);
    m.params().get("p_gen.bias").value.data = {-1e4};
    const auto in = testing::random_input(rng, 10, 4, 1 + rng.below(10));
    nn::Graph g;
    const auto enc = m.encode_article(g, in);
    const auto step = m.decode_step(g, enc, m.initial_state(g, enc), corpus::Vocab::kStart);
    all_zero = all_zero && step.p_gen.scalar() == 0.0;
    std::vector<double> expect(enc.extended_vocab.size(), 0.0);
    const auto att = step.attention.value();
    for (std::size_t i = 0; i < att.size(); ++i) {
      expect[static_cast<std::size_t>(enc.extended_vocab.source_ids()[i])] += att[i];
    }
    const auto d = step.distribution.value();
    for (std::size_t w = 0; w < d.size(); ++w) worst = std::max(worst, std::abs(d[w] - expect[w]));
  }

  // Out-of-vocabulary keywords: one unknown word per article, which has to be
  // copied since it embeds as UNK.
  const Tokens unknown = {"zeta", "omega", "kappa", "sigma", "theta", "delta"};
  const auto vocab = testing::word_vocab(12);
  std::vector<corpus::TrainingTriple> triples;
  Rng art_rng(78);
  for (std::size_t i = 0; i < unknown.size(); ++i) {
    Tokens text;
    for (int k = 0; k < 8; ++k) text.push_back("w" + std::to_string(art_rng.below(12)));
    text.insert(text.begin() + static_cast<std::ptrdiff_t>(1 + art_rng.below(7)), unknown[i]);
    const Tokens target = {"w" + std::to_string(i), unknown[i], "w" + std::to_string(11 - i)};
    triples.push_back({"oov" + std::to_string(i), text, {unknown[i]}, target, corpus::MatchKind::Matched});
  }
  auto tc = overfit_train_config(2);
  tc.epochs = 200;
  const auto examples = training::prepare_examples(triples, nullptr, tc);
  auto mc = overfit_model_config(vocab.size(), 2);
  mc.use_topic_attention = false;
  model::TpgnModel m(mc, vocab);
  training::train(m, examples, tc);
  std::size_t copied = 0;
  for (const auto& ex : examples) {
    const auto out = greedy(m, ex.input);
    copied += std::find(out.begin(), out.end(), ex.input.keywords[0]) != out.end();
  }
  const std::size_t tried = examples.size();
  return {all_zero && worst <= 1e-12 && copied == tried,
          "max |p - aggregated attention| " + fmt("%.2g", worst) + "; oov keyword decoded in " + std::to_string(copied) +
              "/" + std::to_string(tried) + " articles"};
}

Outcome overfit() {
  const auto& oc = overfit_corpus();
  const auto& tm = full_overfit_model();
  std::size_t exact = 0;
  for (const auto& ex : oc.examples) exact += greedy(tm.model, ex.input) == ex.target;
  const double frac = static_cast<double>(exact) / static_cast<double>(oc.examples.size());
  const auto epochs = overfit_train_config(1).epochs;
  return {tm.final_loss < 0.1 && frac >= 0.8 && epochs <= 500 && tm.seconds < 600.0,
          std::to_string(oc.articles.size()) + " articles, " + std::to_string(oc.examples.size()) + " triples, " +
              std::to_string(epochs) + " epochs: mean nll " + fmt("%.4f", tm.final_loss) + ", exact greedy " +
              std::to_string(exact) + "/" + std::to_string(oc.examples.size()) + ", " + fmt("%.1f", tm.seconds) + " s"};
}

Outcome lda_recovery() {
  const auto pc = testing::planted_corpus(3, 300, 42);
  lda::GibbsOptions opts;
  opts.num_topics = 3;
  opts.iterations = 500;
  opts.seed = 9;
  const auto m = lda::gibbs_train(pc.docs, opts);
  const double c = testing::best_permutation_cosine(m, pc);
  return {c >= 0.9, "min matched cosine " + fmt("%.4f", c)};
}

Outcome textrank_oracle() {
  Rng rng(606);
  double worst = 0.0;
  bool converged = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::random_graph(rng, 1 + rng.below(15));
    const auto r = textrank::rank(g);
    converged = converged && r.converged;
    const auto oracle = testing::power_iteration(g.size(), g.weights, 0.85);
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(r.scores[i] - oracle[i]));
  }
  return {converged && worst <= 1e-6, "max-norm error " + fmt("%.2g", worst) + " over 20 graphs"};
}

Outcome metric_oracles() {
  using corpus::tokenize;
  double worst = 0.0;
  std::size_t cases_r = 0, cases_b = 0, cases_c = 0;
  auto track = [&](double got, double want, std::size_t& counter) {
    worst = std::max(worst, std::abs(got - want));
    ++counter;
  };

  // hand values
  const double f = (1 + 1.44) * 1.0 * 0.75 / (1.0 + 1.44 * 0.75);
  track(metrics::rouge_l(tokenize("a b c d"), {tokenize("a c d")}), f, cases_r);
  track(metrics::rouge_l(tokenize("a b"), {tokenize("c d")}), 0.0, cases_r);
  track(metrics::bleu_1(tokenize("the the the"), {tokenize("the cat the")}), 2.0 / 3.0, cases_b);
  track(metrics::bleu_1(tokenize("a b"), {tokenize("a b c d")}), std::exp(-1.0), cases_b);
  {
    const std::vector<metrics::References> refs{{tokenize("a b c")}, {tokenize("a d")}, {tokenize("e f")}};
    const double l3 = std::log(3.0), l15 = std::log(1.5);
    const double cos1 = std::sqrt(l15 * l15 + l3 * l3) / std::sqrt(l15 * l15 + 2 * l3 * l3);
    track(metrics::CiderD(refs).score(tokenize("a b"), 0),
          10.0 * std::exp(-1.0 / 72.0) * (cos1 + 1.0 / std::sqrt(2.0)) / 4.0, cases_c);
    track(metrics::CiderD({{tokenize("a b")}, {tokenize("c d")}}).score(tokenize("a b"), 0), 5.0, cases_c);
  }

  // brute-force oracles
  Rng rng(707);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = testing::random_sentence(rng, 9, 4);
    std::vector<Tokens> refs;
    for (std::size_t r = 0, n = 1 + rng.below(3); r < n; ++r) refs.push_back(testing::random_sentence(rng, 9, 4));
    track(metrics::rouge_l(c, refs), testing::oracle_rouge_l(c, refs), cases_r);
    track(metrics::bleu_1(c, refs), testing::oracle_bleu_1(c, refs), cases_b);
  }
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<metrics::References> corpus_refs;
    for (std::size_t a = 0, n = 2 + rng.below(4); a < n; ++a) {
      metrics::References r;
      for (std::size_t k = 0, m = 1 + rng.below(3); k < m; ++k) r.push_back(testing::random_sentence(rng, 9, 6));
      corpus_refs.push_back(r);
    }
    const metrics::CiderD scorer(corpus_refs);
    const auto a = rng.below(corpus_refs.size());
    const auto c = testing::random_sentence(rng, 9, 6);
    track(scorer.score(c, a), testing::oracle_cider_d(c, a, corpus_refs), cases_c);
  }

  // identity: every reference scored against its own article
  std::vector<std::string> ids;
  std::vector<std::vector<Tokens>> cands;
  std::vector<metrics::References> refs;
  for (int a = 0; a < 5; ++a) {
    const auto s = testing::random_sentence(rng, 8, 26);
    ids.push_back("a" + std::to_string(a));
    cands.push_back({s});
    refs.push_back({s});
  }
  const auto report = metrics::score_report(ids, cands, refs, {1});
  const bool identity = report.rows[0].rouge_l == 100.0 && report.rows[0].bleu_1 == 100.0;

  return {worst <= 1e-9 && identity && std::min({cases_r, cases_b, cases_c}) >= 10,
          "cases rouge " + std::to_string(cases_r) + ", bleu " + std::to_string(cases_b) + ", cider " +
              std::to_string(cases_c) + ", max error " + fmt("%.2g", worst) + ", identity rouge/bleu " +
              fmt("%.1f", report.rows[0].rouge_l) + "/" + fmt("%.1f", report.rows[0].bleu_1)};
}

// Held-out paraphrases of a trained comment; never seen in training.
metrics::References paraphrases(const Tokens& target) {
  Tokens a = target, b = target;
  a.insert(a.begin() + 1, "really");
  b.push_back("today");
  return {a, b};
}

Outcome ablation_ordering() {
  // One scoring unit per trained (article, keyword list): the greedy comment
  // for that keyword list against paraphrases of the comment it was paired with.
  const auto& oc = overfit_corpus();
  std::vector<std::string> ids;
  std::vector<metrics::References> refs;
  for (std::size_t i = 0; i < oc.examples.size(); ++i) {
    ids.push_back(std::to_string(i));
    refs.push_back(paraphrases(oc.examples[i].target));
  }
  auto n1_rouge = [&](const model::TpgnModel& m) {
    std::vector<std::vector<Tokens>> cands;
    for (const auto& ex : oc.examples) cands.push_back({greedy(m, ex.input)});
    return metrics::score_report(ids, cands, refs, {1}).rows[0].rouge_l;
  };

  int holds = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const double full =
        seed == 1 ? n1_rouge(full_overfit_model().model) : n1_rouge(train_overfit(true, true, seed).model);
    const double topic_level = n1_rouge(train_overfit(false, true, seed).model);
    const double keyword_level = n1_rouge(train_overfit(true, false, seed).model);
    const bool ok = full >= topic_level && full >= keyword_level;
    holds += ok;
    detail += "seed " + std::to_string(seed) + ": full " + fmt("%.2f", full) + " topic-level " +
              fmt("%.2f", topic_level) + " keyword-level " + fmt("%.2f", keyword_level) + (ok ? "; " : " (violated); ");
  }
  return {holds >= 2, detail + std::to_string(holds) + "/3 seeds ordered"};
}

Outcome diversity() {
  // A 3-sentence article in the overfit corpus vocabulary, decoded by the
  // overfit model with and without dedup.
  const auto& m = full_overfit_model().model;
  corpus::Article a = overfit_corpus().articles[0];
  a.body.insert(a.body.end(), {"subj0y", "and", "subj0x", "news", "."});
  const auto sentences = textrank::extract_sentence_keywords(a, 2);

  generation::GenConfig gc;
  gc.max_len = 12;
  gc.keywords_per_sentence = 2;
  gc.dedup = false;
  const auto raw = generation::generate_comments(m, a, nullptr, gc);
  gc.dedup = true;
  const auto dedup = generation::generate_comments(m, a, nullptr, gc);

  std::vector<Tokens> raw_comments, kept, expected;
  for (const auto& c : raw) raw_comments.push_back(c.comment);
  for (const auto& c : dedup) kept.push_back(c.comment);
  std::set<Tokens> seen;
  for (const auto& c : raw_comments) {
    if (seen.insert(c).second) expected.push_back(c);
  }
  const double count = metrics::diversity_count({kept});

  // hand counts
  using V = std::vector<std::vector<Tokens>>;
  const std::vector<std::pair<V, double>> fixtures = {
      {{{{"x"}, {"x"}, {"y"}}, {{"z"}}}, 1.5},
      {{{{"x"}, {"y"}, {"z"}}}, 3.0},
      {{{{"x", "y"}, {"y", "x"}, {"x", "y"}}}, 2.0},
      {{{{"x"}}, {{"x"}, {"x"}}, {{"a"}, {"b"}, {"c"}}}, 5.0 / 3.0},
  };
  bool hand = true;
  for (const auto& [v, want] : fixtures) hand = hand && metrics::diversity_count(v) == want;

  const bool ok = sentences.size() == 3 && raw.size() == 3 && dedup.size() <= 3 && kept == expected &&
                  count == static_cast<double>(seen.size()) && hand;
  return {ok, std::to_string(sentences.size()) + " sentences, " + std::to_string(raw.size()) + " raw comments, " +
                  std::to_string(dedup.size()) + " after dedup, diversity " + fmt("%.1f", count) + " vs " +
                  std::to_string(seen.size()) + " distinct by hand, hand fixtures " + (hand ? "match" : "differ")};
}

// Strips the timing field, the one non-reproducible value in report.json.
std::string without_wallclock(const std::string& report) {
  auto j = nlohmann::json::parse(report);
  for (auto& e : j["epochs"]) e.erase("wallclock");
  return j.dump();
}

Outcome determinism() {
  const auto root = testing::scratch_dir("acceptance_determinism");
  corpus::save_dataset(testing::synthetic_articles(6, 21), root / "data.jsonl");
  auto run_all = [&](const std::string& name) {
    const auto dir = root / name;
    cli::RunConfig c;
    c.set("dataset", (root / "data.jsonl").string());
    c.set("vocab", (dir / "prep" / "vocab.txt").string());
    c.set("triples", (dir / "prep" / "triples.jsonl").string());
    c.set("topic_model", (dir / "lda" / "topics.lda").string());
    c.set("checkpoint", (dir / "train" / "best.ckpt").string());
    c.set("embed_dim", "6");
    c.set("hidden", "6");
    c.set("topics", "3");
    c.set("lda_iters", "40");
    c.set("epochs", "3");
    c.set("topic_infer_iters", "5");
    c.set("max_len", "8");
    c.set("threads", "3");
    std::ostringstream out, err;
    int worst = 0;
    for (auto [cmd, sub] : {std::pair{&cli::cmd_prep, "prep"}, std::pair{&cli::cmd_lda, "lda"},
                            std::pair{&cli::cmd_train, "train"}, std::pair{&cli::cmd_generate, "gen"}}) {
      c.set("out_dir", (dir / sub).string());
      worst = std::max(worst, cmd(c, out, err));
    }
    return worst;
  };
  if (run_all("a") != 0 || run_all("b") != 0) return {false, "a pipeline command failed"};

  std::size_t same = 0, total = 0;
  std::string differing;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), root / "a");
    auto x = corpus::read_file(entry.path()), y = corpus::read_file(root / "b" / rel);
    if (rel.filename() == "report.json") {
      x = without_wallclock(x);
      y = without_wallclock(y);
    }
    ++total;
    if (x == y) ++same;
    else differing += " " + rel.string();
  }
  return {total == 8 && same == total,
          std::to_string(same) + "/" + std::to_string(total) + " artifacts identical" +
              (differing.empty() ? "" : "; differ:" + differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient check", gradient_check},
      {"distribution normalization", normalization},
      {"copy mechanism", copy_mechanism},
      {"overfit", overfit},
      {"lda recovery", lda_recovery},
      {"textrank oracle", textrank_oracle},
      {"metric oracles", metric_oracles},
      {"ablation ordering", ablation_ordering},
      {"diversity accounting", diversity},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
