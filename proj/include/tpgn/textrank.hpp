#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tpgn/corpus.hpp"

namespace tpgn::textrank {

using corpus::Tokens;

/// Undirected co-occurrence graph. `weights` is dense row-major n x n,
/// symmetric with a zero diagonal.
struct WordGraph {
  Tokens nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  double weight(std::size_t u, std::size_t v) const { return weights[u * nodes.size() + v]; }
};

struct RankOptions {
  double damping = 0.85;
  double tol = 1e-6;
  int max_iter = 100;
};

struct RankResult {
  std::vector<double> scores;  // aligned with WordGraph::nodes
  int iterations = 0;
  bool converged = false;
};

/// Nodes in first-occurrence order; weight(u, v) counts the position pairs
/// closer than `window` tokens apart holding u and v. Throws EmptyInput.
WordGraph build_graph(const Tokens& tokens, std::size_t window = 5);

/// Weighted TextRank iteration S(v) = (1-d) + d * sum_u w_uv / out(u) * S(u),
/// started from S = 1. Stops once the iterate is provably within `tol` of the
/// fixed point in max-norm; a result with converged == false is the last
/// iterate after max_iter sweeps.
RankResult rank(const WordGraph& graph, const RankOptions& options = {});

std::map<std::string, double> rank_map(const WordGraph& graph, const RankOptions& options = {});

struct KeywordOptions {
  std::size_t window = 5;
  RankOptions rank;
};

/// Top-k tokens by score, ties broken lexicographically.
Tokens extract_keywords(const Tokens& tokens, std::size_t k, const KeywordOptions& options = {});

const std::set<std::string>& default_sentence_delimiters();

/// Splits a token stream on delimiter tokens; empty sentences are dropped.
std::vector<Tokens> split_sentences(const Tokens& tokens,
                                    const std::set<std::string>& delimiters = default_sentence_delimiters());

/// One keyword list per non-empty sentence of title ++ body.
std::vector<Tokens> extract_sentence_keywords(const corpus::Article& article, std::size_t k_per_sentence,
                                              const KeywordOptions& options = {},
                                              const std::set<std::string>& delimiters = default_sentence_delimiters());

}  // namespace tpgn::textrank
