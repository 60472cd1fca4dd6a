#include "tpgn/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tpgn/error.hpp"
#include "tpgn/rng.hpp"

namespace tpgn::corpus {

using nlohmann::json;

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

Tokens field_tokens(const json& obj, const char* key, std::size_t line_no) {
  if (!obj.contains(key)) throw ParseError(line_no, std::string("missing field ") + key);
  const json& v = obj.at(key);
  if (!v.is_string()) throw ParseError(line_no, std::string("field ") + key + " is not a string");
  return tokenize(v.get<std::string>());
}

Article parse_article(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_no, "not a JSON object");

  Article a;
  if (!obj.contains("id")) throw ParseError(line_no, "missing field id");
  const json& id = obj.at("id");
  if (id.is_string()) {
    a.id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    a.id = std::to_string(id.get<long long>());
  } else {
    throw ParseError(line_no, "field id is not a string");
  }
  a.title = field_tokens(obj, "title", line_no);
  a.body = field_tokens(obj, "body", line_no);
  if (a.body.empty()) throw ParseError(line_no, "empty body");
  if (!obj.contains("comments")) throw ParseError(line_no, "missing field comments");
  const json& comments = obj.at("comments");
  if (!comments.is_array()) throw ParseError(line_no, "field comments is not an array");
  for (const json& c : comments) {
    if (!c.is_string()) throw ParseError(line_no, "comment is not a string");
    Tokens toks = tokenize(c.get<std::string>());
    if (toks.empty()) throw ParseError(line_no, "empty comment");
    a.comments.push_back(std::move(toks));
  }
  return a;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Tokens Article::text() const {
  Tokens out = title;
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<Article> parse_dataset(std::string_view jsonl) {
  std::vector<Article> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    out.push_back(parse_article(line, line_no));
  }
  return out;
}

std::vector<Article> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path));
}

std::string format_article(const Article& article) {
  json obj;
  obj["id"] = article.id;
  obj["title"] = join(article.title);
  obj["body"] = join(article.body);
  json comments = json::array();
  for (const auto& c : article.comments) comments.push_back(join(c));
  obj["comments"] = comments;
  return obj.dump();
}

void save_dataset(const std::vector<Article>& articles, const std::filesystem::path& path) {
  std::string out;
  for (const auto& a : articles) {
    out += format_article(a);
    out.push_back('\n');
  }
  write_file(path, out);
}

// ---- Vocab ----

const std::string& Vocab::pad_token() {
  static const std::string s = "[PAD]";
  return s;
}
const std::string& Vocab::unk_token() {
  static const std::string s = "[UNK]";
  return s;
}
const std::string& Vocab::start_token() {
  static const std::string s = "[START]";
  return s;
}
const std::string& Vocab::stop_token() {
  static const std::string s = "[STOP]";
  return s;
}

Vocab::Vocab() {
  append(pad_token());
  append(unk_token());
  append(start_token());
  append(stop_token());
}

void Vocab::append(const std::string& token) {
  if (token.empty() || std::any_of(token.begin(), token.end(), is_space)) {
    throw Error(ErrorKind::InvalidArgument, "vocabulary token must be non-empty without whitespace");
  }
  if (!id_of_.emplace(token, static_cast<std::int32_t>(token_of_.size())).second) {
    throw Error(ErrorKind::InvalidArgument, "duplicate vocabulary token '" + token + "'");
  }
  token_of_.push_back(token);
}

Vocab Vocab::from_tokens(const Tokens& tokens) {
  Vocab v;
  for (const auto& t : tokens) v.append(t);
  return v;
}

std::int32_t Vocab::id(const std::string& token) const {
  auto it = id_of_.find(token);
  return it == id_of_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= token_of_.size()) {
    throw Error(ErrorKind::InvalidArgument, "vocabulary id out of range: " + std::to_string(id));
  }
  return token_of_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& t : token_of_) {
    out += t;
    out.push_back('\n');
  }
  write_file(path, out);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  Tokens lines = tokenize(read_file(path));
  if (lines.size() < kReserved || lines[0] != pad_token() || lines[1] != unk_token() ||
      lines[2] != start_token() || lines[3] != stop_token()) {
    throw Error(ErrorKind::Format, path.string() + ": vocabulary must start with reserved symbols");
  }
  return from_tokens(Tokens(lines.begin() + kReserved, lines.end()));
}

Vocab build_vocab(const std::vector<Article>& articles, std::size_t cap) {
  if (cap < 5) throw Error(ErrorKind::InvalidArgument, "vocabulary cap must be at least 5");
  std::unordered_map<std::string, std::size_t> counts;
  auto add = [&](const Tokens& toks) {
    for (const auto& t : toks) ++counts[t];
  };
  for (const auto& a : articles) {
    add(a.title);
    add(a.body);
    for (const auto& c : a.comments) add(c);
  }
  // Reserved names in the data would collide with the fixed ids.
  for (const auto& r : {Vocab::pad_token(), Vocab::unk_token(), Vocab::start_token(), Vocab::stop_token()}) {
    counts.erase(r);
  }
  if (counts.empty()) throw Error(ErrorKind::EmptyCorpus, "no tokens in corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  ranked.resize(std::min(ranked.size(), cap - Vocab::kReserved));
  Tokens keep;
  keep.reserve(ranked.size());
  for (auto& [tok, _] : ranked) keep.push_back(tok);
  return Vocab::from_tokens(keep);
}

// ---- triples ----

const char* match_kind_name(MatchKind kind) {
  return kind == MatchKind::Matched ? "matched" : "random_fallback";
}

MatchKind parse_match_kind(std::string_view name) {
  if (name == "matched") return MatchKind::Matched;
  if (name == "random_fallback") return MatchKind::RandomFallback;
  throw Error(ErrorKind::InvalidArgument, "unknown match kind '" + std::string(name) + "'");
}

std::vector<TrainingTriple> build_triples(const Article& article, const Tokens& keywords,
                                          const TripleOptions& options, std::uint64_t rng_seed) {
  if (article.comments.empty()) throw Error(ErrorKind::NoComments, "article " + article.id + " has no comments");
  if (options.subset_size_max < 1) throw Error(ErrorKind::InvalidArgument, "subset_size_max must be >= 1");

  const Tokens text = article.text();
  const std::set<std::string> text_set(text.begin(), text.end());
  Tokens kws;
  for (const auto& k : keywords) {
    if (!text_set.count(k)) {
      throw Error(ErrorKind::InvalidArgument, "keyword '" + k + "' does not occur in article " + article.id);
    }
    if (std::find(kws.begin(), kws.end(), k) == kws.end()) kws.push_back(k);
  }

  std::vector<std::set<std::string>> comment_sets;
  for (const auto& c : article.comments) comment_sets.emplace_back(c.begin(), c.end());

  std::vector<TrainingTriple> out;
  auto emit = [&](Tokens subset, const Tokens& comment, MatchKind kind) {
    out.push_back(TrainingTriple{article.id, text, std::move(subset), comment, kind});
  };

  const std::size_t max_size = std::min(options.subset_size_max, kws.size());
  for (std::size_t size = 1; size <= max_size && out.size() < options.max_triples; ++size) {
    // Lexicographic walk over index combinations of the given size.
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    while (true) {
      Tokens subset;
      for (auto i : idx) subset.push_back(kws[i]);
      for (std::size_t c = 0; c < article.comments.size() && out.size() < options.max_triples; ++c) {
        const bool all = std::all_of(subset.begin(), subset.end(),
                                     [&](const std::string& k) { return comment_sets[c].count(k) != 0; });
        if (all) emit(subset, article.comments[c], MatchKind::Matched);
      }
      if (out.size() >= options.max_triples) break;

      std::size_t i = size;
      while (i > 0 && idx[i - 1] == kws.size() - size + (i - 1)) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
  }

  if (out.empty()) {
    Rng rng(rng_seed);
    const auto pick = rng.below(article.comments.size());
    emit(kws, article.comments[pick], MatchKind::RandomFallback);
  }
  return out;
}

std::string format_triple(const TrainingTriple& t) {
  json obj;
  obj["article_id"] = t.article_id;
  obj["article"] = join(t.article_tokens);
  obj["keywords"] = t.keywords;
  obj["comment"] = join(t.target_comment);
  obj["match_kind"] = match_kind_name(t.match_kind);
  return obj.dump();
}

TrainingTriple parse_triple(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  try {
    TrainingTriple t;
    t.article_id = obj.at("article_id").get<std::string>();
    t.article_tokens = tokenize(obj.at("article").get<std::string>());
    t.keywords = obj.at("keywords").get<Tokens>();
    t.target_comment = tokenize(obj.at("comment").get<std::string>());
    t.match_kind = parse_match_kind(obj.at("match_kind").get<std::string>());
    if (t.article_tokens.empty()) throw ParseError(line_no, "empty article");
    if (t.target_comment.empty()) throw ParseError(line_no, "empty comment");
    return t;
  } catch (const json::exception& e) {
    throw ParseError(line_no, e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(line_no, e.what());
  }
}

void save_triples(const std::vector<TrainingTriple>& triples, const std::filesystem::path& path) {
  std::string out;
  for (const auto& t : triples) {
    out += format_triple(t);
    out.push_back('\n');
  }
  write_file(path, out);
}

std::vector<TrainingTriple> load_triples(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<TrainingTriple> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    out.push_back(parse_triple(line, line_no));
  }
  return out;
}

}  // namespace tpgn::corpus
