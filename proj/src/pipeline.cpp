#include "tpgn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tpgn/corpus.hpp"
#include "tpgn/error.hpp"
#include "tpgn/lda.hpp"
#include "tpgn/rng.hpp"
#include "tpgn/textrank.hpp"

namespace tpgn::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

Error bad_value(const std::string& key, const std::string& value, const char* expected) {
  return Error(ErrorKind::InvalidArgument, "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw bad_value(key, value, "a non-negative integer");
  return out;
}

void require_file(const RunConfig& config, const std::string& key) {
  const auto& value = config.get(key);
  if (value.empty()) throw Error(ErrorKind::InvalidArgument, "missing required path '" + key + "'");
  if (!fs::is_regular_file(value)) throw Error(ErrorKind::Io, key + " '" + value + "' is not a readable file");
}

fs::path prepare_out_dir(const RunConfig& config) {
  const auto dir = config.get_path("out_dir");
  if (dir.empty()) throw Error(ErrorKind::InvalidArgument, "missing required path 'out_dir'");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");
  return dir;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NonFiniteLoss: return kNumericFailure;
    case ErrorKind::ShapeMismatch: return kModelMismatch;
    default: return kInputError;
  }
}

template <typename Fn>
int guarded(const char* name, std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << name << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
    return kFailure;
  }
}

std::optional<lda::TopicModel> load_topics(const RunConfig& config, std::size_t expected_topics) {
  if (config.get("topic_model").empty()) return std::nullopt;
  require_file(config, "topic_model");
  auto topics = lda::TopicModel::load(config.get_path("topic_model"));
  topics.set_top_words(config.get_size("top_words"));
  if (topics.num_topics() != expected_topics) {
    throw Error(ErrorKind::ShapeMismatch, "topic model has " + std::to_string(topics.num_topics()) +
                                              " topics, config expects " + std::to_string(expected_topics));
  }
  return topics;
}

}  // namespace

// ---- RunConfig ----

const std::vector<KeySpec>& RunConfig::keys() {
  static const std::vector<KeySpec> table = {
      // paths
      {"dataset", "", "article JSONL (prep, lda, generate)"},
      {"out_dir", "", "directory for command outputs"},
      {"vocab", "", "vocabulary file from prep"},
      {"triples", "", "training triples JSONL from prep"},
      {"topic_model", "", "LDA model from lda; empty disables topic words"},
      {"checkpoint", "", "model checkpoint for generate"},
      {"candidates", "", "generated comments JSONL for evaluate"},
      {"references", "", "article JSONL whose comments are the references"},
      // prep
      {"vocab_cap", "9000", "vocabulary size including reserved symbols"},
      {"train_keywords", "5", "TextRank keywords per article for triple building"},
      {"keyword_window", "5", "TextRank co-occurrence window"},
      {"subset_size_max", "2", "largest keyword subset used for comment matching"},
      {"max_triples", "32", "triple cap per article"},
      // lda
      {"topics", "100", "number of topics"},
      {"lda_iters", "500", "Gibbs sweeps"},
      {"alpha", "auto", "document-topic prior; auto = 50 / topics"},
      {"beta", "0.01", "topic-word prior"},
      {"top_words", "50", "top words per topic considered as article topic words"},
      {"report_every", "100", "sweeps between LDA progress lines"},
      // model
      {"embed_dim", "128", "word embedding size"},
      {"hidden", "256", "LSTM hidden size"},
      {"use_keyword_attention", "true", "keyword-level encoder attention"},
      {"use_topic_attention", "true", "topic-level encoder attention"},
      {"use_pointer", "true", "copy mechanism"},
      {"pgen_prev_embedding", "false", "previous-token term in the topic-aware p_gen"},
      {"init_scale", "0.1", "uniform init range"},
      // train
      {"lr", "0.1", "Adagrad learning rate"},
      {"accumulator_init", "0.1", "Adagrad initial accumulator"},
      {"epochs", "10", "training epochs"},
      {"batch_size", "16", "examples per update"},
      {"max_article_len", "400", "article truncation"},
      {"max_comment_len", "100", "comment truncation"},
      {"clip_norm", "2.0", "global gradient norm cap"},
      {"topic_infer_iters", "50", "Gibbs sweeps for per-article topic inference"},
      // generate
      {"decode", "greedy", "greedy or beam"},
      {"beam_width", "4", "beam width"},
      {"max_len", "30", "maximum generated tokens"},
      {"dedup", "true", "drop duplicate comments per article"},
      {"keywords_per_sentence", "3", "TextRank keywords per sentence at generation"},
      {"threads", "0", "parallel decodes; 0 reads TPGN_THREADS"},
      // evaluate
      {"top_n", "1,3,5", "comma-separated N values"},
      {"top_n_mode", "mean_of_best_n", "mean_of_best_n, nth_best or max_of_first_n"},
      {"seed", "1", "master seed"},
  };
  return table;
}

bool RunConfig::known(const std::string& key) {
  const auto& k = keys();
  return std::any_of(k.begin(), k.end(), [&](const KeySpec& s) { return s.name == key; });
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::parse(std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    if (!known(key)) throw ParseError(line_no, "unknown key '" + key + "'");
    values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
}

void RunConfig::load_file(const fs::path& path) { parse(corpus::read_file(path)); }

std::size_t RunConfig::get_size(const std::string& key) const { return parse_integer<std::size_t>(key, get(key)); }

std::uint64_t RunConfig::get_u64(const std::string& key) const { return parse_integer<std::uint64_t>(key, get(key)); }

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) throw bad_value(key, v, "a number");
  return out;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw bad_value(key, v, "true or false");
}

fs::path RunConfig::get_path(const std::string& key) const { return fs::path(get(key)); }

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto n = parse_integer<std::size_t>(key, trim(item));
    if (n < 1) throw bad_value(key, get(key), "positive integers");
    out.push_back(n);
  }
  if (out.empty()) throw bad_value(key, get(key), "a comma-separated list");
  return out;
}

model::TpgnConfig RunConfig::model_config() const {
  model::TpgnConfig c;
  c.embed_dim = get_size("embed_dim");
  c.hidden = get_size("hidden");
  c.vocab_cap = get_size("vocab_cap");
  c.topics = get_size("topics");
  c.use_keyword_attention = get_bool("use_keyword_attention");
  c.use_topic_attention = get_bool("use_topic_attention");
  c.use_pointer = get_bool("use_pointer");
  c.pgen_prev_embedding = get_bool("pgen_prev_embedding");
  c.seed = get_u64("seed");
  c.init_scale = get_double("init_scale");
  c.validate();
  return c;
}

training::TrainConfig RunConfig::train_config() const {
  training::TrainConfig c;
  c.lr = get_double("lr");
  c.accumulator_init = get_double("accumulator_init");
  c.epochs = get_size("epochs");
  c.batch_size = get_size("batch_size");
  c.max_article_len = get_size("max_article_len");
  c.max_comment_len = get_size("max_comment_len");
  c.clip_norm = get_double("clip_norm");
  c.seed = get_u64("seed");
  c.topic_infer_iters = get_size("topic_infer_iters");
  c.validate();
  return c;
}

generation::GenConfig RunConfig::gen_config() const {
  generation::GenConfig c;
  const auto& mode = get("decode");
  if (mode == "greedy") {
    c.mode = generation::DecodeMode::Greedy;
  } else if (mode == "beam") {
    c.mode = generation::DecodeMode::Beam;
  } else {
    throw bad_value("decode", mode, "greedy or beam");
  }
  c.beam_width = get_size("beam_width");
  c.max_len = get_size("max_len");
  c.dedup = get_bool("dedup");
  c.keywords_per_sentence = get_size("keywords_per_sentence");
  c.keyword_window = get_size("keyword_window");
  c.max_article_len = get_size("max_article_len");
  c.topic_infer_iters = get_size("topic_infer_iters");
  c.seed = get_u64("seed");
  c.threads = get_size("threads");
  c.validate();
  return c;
}

metrics::TopNMode RunConfig::top_n_mode() const {
  const auto& v = get("top_n_mode");
  for (auto m : {metrics::TopNMode::MeanOfBest, metrics::TopNMode::NthBest, metrics::TopNMode::MaxOfFirst}) {
    if (v == metrics::top_n_mode_name(m)) return m;
  }
  throw bad_value("top_n_mode", v, "mean_of_best_n, nth_best or max_of_first_n");
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

// ---- commands ----

int cmd_prep(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("prep", err, [&] {
    require_file(config, "dataset");
    const auto dir = prepare_out_dir(config);
    const auto articles = corpus::load_dataset(config.get_path("dataset"));
    if (articles.empty()) throw Error(ErrorKind::EmptyCorpus, "dataset has no articles");

    const auto vocab = corpus::build_vocab(articles, config.get_size("vocab_cap"));
    textrank::KeywordOptions kw;
    kw.window = config.get_size("keyword_window");
    corpus::TripleOptions opts;
    opts.subset_size_max = config.get_size("subset_size_max");
    opts.max_triples = config.get_size("max_triples");
    const auto k = config.get_size("train_keywords");
    const auto seed = config.get_u64("seed");

    std::string keyword_lines;
    std::vector<corpus::TrainingTriple> triples;
    std::size_t matched = 0, fallback = 0, skipped = 0;
    for (std::size_t i = 0; i < articles.size(); ++i) {
      const auto& a = articles[i];
      // Delimiters would otherwise rank as hub words.
      corpus::Tokens text;
      for (const auto& sentence : textrank::split_sentences(a.text())) text.insert(text.end(), sentence.begin(), sentence.end());
      const auto keywords = text.empty() ? corpus::Tokens{} : textrank::extract_keywords(text, k, kw);
      keyword_lines += nlohmann::json{{"article_id", a.id}, {"keywords", keywords}}.dump() + "\n";
      if (a.comments.empty()) {
        ++skipped;
        continue;
      }
      for (auto& t : corpus::build_triples(a, keywords, opts, mix_seed(seed, i))) {
        (t.match_kind == corpus::MatchKind::Matched ? matched : fallback) += 1;
        triples.push_back(std::move(t));
      }
    }

    vocab.save(dir / "vocab.txt");
    corpus::write_file(dir / "keywords.jsonl", keyword_lines);
    corpus::save_triples(triples, dir / "triples.jsonl");
    out << "articles " << articles.size() << "\n"
        << "vocab " << vocab.size() << "\n"
        << "triples " << triples.size() << " (matched " << matched << ", random_fallback " << fallback << ")\n";
    if (skipped) out << "skipped " << skipped << " articles without comments\n";
    return kOk;
  });
}

int cmd_lda(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("lda", err, [&] {
    require_file(config, "dataset");
    lda::GibbsOptions opts;
    opts.num_topics = config.get_size("topics");
    if (opts.num_topics < 2) throw Error(ErrorKind::InvalidArgument, "topics must be >= 2");
    opts.iterations = config.get_size("lda_iters");
    opts.alpha = config.get("alpha") == "auto" ? -1.0 : config.get_double("alpha");
    opts.beta = config.get_double("beta");
    opts.seed = config.get_u64("seed");
    opts.top_n = config.get_size("top_words");
    opts.report_every = std::max<std::size_t>(1, config.get_size("report_every"));
    opts.on_report = [&](std::size_t sweep, double mean_log) {
      out << "sweep " << sweep << " mean_log_p " << mean_log << "\n";
    };
    const auto dir = prepare_out_dir(config);

    const auto articles = corpus::load_dataset(config.get_path("dataset"));
    std::vector<corpus::Tokens> docs;
    for (const auto& a : articles) docs.push_back(a.text());
    const auto model = lda::gibbs_train(docs, opts);
    model.save(dir / "topics.lda");
    out << "topics " << model.num_topics() << " vocab " << model.vocab_size() << "\n";
    return kOk;
  });
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("train", err, [&] {
    require_file(config, "triples");
    require_file(config, "vocab");
    const auto mcfg = config.model_config();
    auto tcfg = config.train_config();
    const auto topics = load_topics(config, mcfg.topics);
    const auto dir = prepare_out_dir(config);
    tcfg.checkpoint_dir = dir;

    const auto triples = corpus::load_triples(config.get_path("triples"));
    if (triples.empty()) throw Error(ErrorKind::EmptyCorpus, "no training triples");
    model::TpgnModel model(mcfg, corpus::Vocab::load(config.get_path("vocab")));
    const auto examples = training::prepare_examples(triples, topics ? &*topics : nullptr, tcfg);
    const auto report = training::train(model, examples, tcfg, [&](const training::EpochStats& s) {
      out << "epoch " << s.epoch << " loss " << s.mean_loss << "\n";
    });
    corpus::write_file(dir / "report.json", training::report_json(report));
    out << "best epoch " << report.best_epoch << " loss " << report.best_loss << "\n";
    return kOk;
  });
}

int cmd_generate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("generate", err, [&] {
    require_file(config, "dataset");
    require_file(config, "vocab");
    require_file(config, "checkpoint");
    const auto mcfg = config.model_config();
    const auto gcfg = config.gen_config();
    const auto topics = load_topics(config, mcfg.topics);
    const auto dir = prepare_out_dir(config);

    model::TpgnModel model(mcfg, corpus::Vocab::load(config.get_path("vocab")));
    nn::load_checkpoint(model.params(), config.get_path("checkpoint"));

    const auto articles = corpus::load_dataset(config.get_path("dataset"));
    std::string lines;
    std::size_t total = 0;
    for (const auto& a : articles) {
      for (const auto& c : generation::generate_comments(model, a, topics ? &*topics : nullptr, gcfg)) {
        lines += generation::format_generated(a.id, c) + "\n";
        ++total;
      }
    }
    corpus::write_file(dir / "candidates.jsonl", lines);
    out << "articles " << articles.size() << " comments " << total << "\n";
    return kOk;
  });
}

int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded("evaluate", err, [&] {
    require_file(config, "candidates");
    require_file(config, "references");
    const auto n_list = config.get_size_list("top_n");
    const auto mode = config.top_n_mode();
    const auto dir = prepare_out_dir(config);

    const auto articles = corpus::load_dataset(config.get_path("references"));
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < articles.size(); ++i) {
      if (!index.emplace(articles[i].id, i).second) {
        throw Error(ErrorKind::InvalidArgument, "duplicate article id '" + articles[i].id + "' in references");
      }
    }

    std::vector<std::vector<corpus::Tokens>> candidates(articles.size());
    const auto text = corpus::read_file(config.get_path("candidates"));
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("article_id") || !j.contains("comment") ||
          !j["comment"].is_string()) {
        throw ParseError(line_no, "expected {article_id, comment}");
      }
      const auto id = j["article_id"].is_string() ? j["article_id"].get<std::string>() : j["article_id"].dump();
      auto it = index.find(id);
      if (it == index.end()) throw Error(ErrorKind::InvalidArgument, "candidate article id '" + id + "' not in references");
      candidates[it->second].push_back(corpus::tokenize(j["comment"].get<std::string>()));
    }

    std::vector<std::string> ids;
    std::vector<metrics::References> refs;
    for (std::size_t i = 0; i < articles.size(); ++i) {
      if (candidates[i].empty()) {
        throw Error(ErrorKind::InvalidArgument, "reference article id '" + articles[i].id + "' has no candidates");
      }
      if (articles[i].comments.empty()) {
        throw Error(ErrorKind::NoComments, "reference article '" + articles[i].id + "' has no comments");
      }
      ids.push_back(articles[i].id);
      refs.push_back(articles[i].comments);
    }

    const auto report = metrics::score_report(ids, candidates, refs, n_list, mode);
    corpus::write_file(dir / "scores.json", metrics::report_json(report));
    out << "top-N (" << metrics::top_n_mode_name(mode) << ")\n";
    for (const auto& r : report.rows) {
      out << "N=" << r.n << " ROUGE-L " << r.rouge_l << " BLEU-1 " << r.bleu_1 << " CIDEr-D ";
      if (r.cider_d) {
        out << *r.cider_d;
      } else {
        out << "n/a";
      }
      out << " METEOR n/a\n";
    }
    out << "diversity " << report.diversity << "\n";
    return kOk;
  });
}

}  // namespace tpgn::cli
