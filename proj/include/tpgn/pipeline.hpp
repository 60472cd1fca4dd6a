#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tpgn/generation.hpp"
#include "tpgn/metrics.hpp"
#include "tpgn/model.hpp"
#include "tpgn/training.hpp"

namespace tpgn::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInputError = 2,
  kNumericFailure = 3,
  kModelMismatch = 4,
};

struct KeySpec {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Flat key=value run configuration. Every key has a default; unknown keys
/// are rejected.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<KeySpec>& keys();
  static bool known(const std::string& key);

  /// Throws InvalidArgument for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  /// "key = value" lines; blank lines and lines starting with '#' are
  /// ignored. Throws ParseError.
  void parse(std::string_view text);
  void load_file(const std::filesystem::path& path);

  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::filesystem::path get_path(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  model::TpgnConfig model_config() const;
  training::TrainConfig train_config() const;
  generation::GenConfig gen_config() const;
  metrics::TopNMode top_n_mode() const;

  /// Sorted "key = value" lines; parse(dump()) round-trips.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

// Each command writes fixed file names under out_dir:
//   prep      vocab.txt keywords.jsonl triples.jsonl
//   lda       topics.lda
//   train     best.ckpt last.ckpt report.json
//   generate  candidates.jsonl
//   evaluate  scores.json
// Errors are reported on `err` and mapped to an ExitCode.
int cmd_prep(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_lda(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_generate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace tpgn::cli
