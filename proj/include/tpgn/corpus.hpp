#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tpgn::corpus {

using Tokens = std::vector<std::string>;

/// Splits on ASCII whitespace. Multi-byte UTF-8 tokens pass through untouched.
Tokens tokenize(std::string_view text);
std::string join(const Tokens& tokens);

struct Article {
  std::string id;
  Tokens title;
  Tokens body;
  std::vector<Tokens> comments;

  /// Model input: title followed by body.
  Tokens text() const;
};

/// Reads one JSON article per line. Blank lines are skipped.
/// Throws Error(Io) or ParseError(line, reason).
std::vector<Article> load_dataset(const std::filesystem::path& path);
std::vector<Article> parse_dataset(std::string_view jsonl);
void save_dataset(const std::vector<Article>& articles, const std::filesystem::path& path);
std::string format_article(const Article& article);

class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kStart = 2;
  static constexpr std::int32_t kStop = 3;
  static constexpr std::int32_t kReserved = 4;

  static const std::string& pad_token();
  static const std::string& unk_token();
  static const std::string& start_token();
  static const std::string& stop_token();

  /// Reserved symbols only.
  Vocab();

  /// Reserved symbols followed by `tokens` in order. Duplicates and reserved
  /// names are rejected.
  static Vocab from_tokens(const Tokens& tokens);

  std::size_t size() const { return token_of_.size(); }
  /// UNK for unknown tokens.
  std::int32_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return id_of_.count(token) != 0; }
  const std::string& token(std::int32_t id) const;
  const Tokens& tokens() const { return token_of_; }

  /// One token per line; line i holds id i, reserved symbols first.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  void append(const std::string& token);

  std::unordered_map<std::string, std::int32_t> id_of_;
  Tokens token_of_;
};

/// Keeps the (cap - 4) most frequent tokens over titles, bodies and comments,
/// ties broken lexicographically. Requires cap >= 5.
Vocab build_vocab(const std::vector<Article>& articles, std::size_t cap);

enum class MatchKind { Matched, RandomFallback };
const char* match_kind_name(MatchKind kind);
MatchKind parse_match_kind(std::string_view name);

struct TrainingTriple {
  std::string article_id;
  Tokens article_tokens;
  Tokens keywords;
  Tokens target_comment;
  MatchKind match_kind = MatchKind::Matched;
};

struct TripleOptions {
  std::size_t subset_size_max = 2;
  std::size_t max_triples = 32;
};

/// Pairs comments with keyword subsets: for every subset of size at most
/// `subset_size_max` (smallest first), each comment containing all its tokens
/// yields a triple. Without any match a single triple with the full keyword
/// list and a seeded random comment is emitted.
std::vector<TrainingTriple> build_triples(const Article& article, const Tokens& keywords,
                                          const TripleOptions& options, std::uint64_t rng_seed);

std::string format_triple(const TrainingTriple& triple);
TrainingTriple parse_triple(std::string_view json_line, std::size_t line_no);
void save_triples(const std::vector<TrainingTriple>& triples, const std::filesystem::path& path);
std::vector<TrainingTriple> load_triples(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace tpgn::corpus
