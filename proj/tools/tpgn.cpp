#include <algorithm>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpgn/error.hpp"
#include "tpgn/pipeline.hpp"

namespace {

using tpgn::cli::RunConfig;

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  bool no_keyword_attn = false, no_topic_attn = false, no_pointer = false;
};

void add_options(Command& cmd) {
  cmd.app->add_option("-c,--config", cmd.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd.app->add_option("--set", cmd.sets, "override as key=value (repeatable)");
  for (const auto& k : RunConfig::keys()) {
    std::string help = k.help;
    if (!k.default_value.empty()) help += " [" + k.default_value + "]";
    cmd.app->add_option(flag_name(k.name), cmd.flags[k.name], help);
  }
  cmd.app->add_flag("--no-keyword-attn", cmd.no_keyword_attn, "disable keyword-level attention");
  cmd.app->add_flag("--no-topic-attn", cmd.no_topic_attn, "disable topic-level attention");
  cmd.app->add_flag("--no-pointer", cmd.no_pointer, "disable the copy mechanism");
}

// File values first, then explicit flags.
RunConfig resolve(const Command& cmd) {
  RunConfig config;
  if (!cmd.config_file.empty()) config.load_file(cmd.config_file);
  for (const auto& [key, value] : cmd.flags) {
    if (cmd.app->count(flag_name(key)) > 0) config.set(key, value);
  }
  for (const auto& s : cmd.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw tpgn::Error(tpgn::ErrorKind::InvalidArgument, "--set expects key=value, got '" + s + "'");
    config.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (cmd.no_keyword_attn) config.set("use_keyword_attention", "false");
  if (cmd.no_topic_attn) config.set("use_topic_attention", "false");
  if (cmd.no_pointer) config.set("use_pointer", "false");
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic-aware pointer-generator comment generation"};
  app.require_subcommand(1);

  using Fn = int (*)(const RunConfig&, std::ostream&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Fn>> table = {
      {"prep", "build vocab, keywords and training triples", tpgn::cli::cmd_prep},
      {"lda", "train the LDA topic model", tpgn::cli::cmd_lda},
      {"train", "train a model", tpgn::cli::cmd_train},
      {"generate", "generate comments per article", tpgn::cli::cmd_generate},
      {"evaluate", "score candidates against reference comments", tpgn::cli::cmd_evaluate},
  };
  std::vector<Command> commands(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    commands[i].app = app.add_subcommand(std::get<0>(table[i]), std::get<1>(table[i]));
    add_options(commands[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tpgn::cli::kInputError;
  }

  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!*commands[i].app) continue;
    try {
      const auto config = resolve(commands[i]);
      return std::get<2>(table[i])(config, std::cout, std::cerr);
    } catch (const std::exception& e) {
      std::cerr << std::get<0>(table[i]) << ": " << e.what() << "\n";
      return tpgn::cli::kInputError;
    }
  }
  return tpgn::cli::kInputError;
}
