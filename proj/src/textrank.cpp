#include "tpgn/textrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "tpgn/error.hpp"

namespace tpgn::textrank {

WordGraph build_graph(const Tokens& tokens, std::size_t window) {
  if (tokens.empty()) throw Error(ErrorKind::EmptyInput, "cannot build a word graph from no tokens");
  if (window < 2) throw Error(ErrorKind::InvalidArgument, "co-occurrence window must be >= 2");

  WordGraph g;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto [it, inserted] = index.emplace(t, g.nodes.size());
    if (inserted) g.nodes.push_back(t);
    ids.push_back(it->second);
  }
  const std::size_t n = g.nodes.size();
  g.weights.assign(n * n, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size() && j < i + window; ++j) {
      const auto u = ids[i], v = ids[j];
      if (u == v) continue;
      g.weights[u * n + v] += 1.0;
      g.weights[v * n + u] += 1.0;
    }
  }
  return g;
}

RankResult rank(const WordGraph& graph, const RankOptions& options) {
  const std::size_t n = graph.size();
  if (n == 0) throw Error(ErrorKind::EmptyInput, "cannot rank an empty graph");
  const double d = options.damping;
  if (!(d > 0.0 && d < 1.0)) throw Error(ErrorKind::InvalidArgument, "damping must lie in (0, 1)");

  std::vector<double> out_weight(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) out_weight[u] += graph.weight(u, v);
  }

  // The update is a d-contraction in the 1-norm, so
  // |S_k - S*|_max <= |S_k - S*|_1 <= d / (1 - d) * |S_k - S_{k-1}|_1.
  const double bound_factor = d / (1.0 - d);
  RankResult r;
  r.scores.assign(n, 1.0);
  std::vector<double> next(n);
  for (int it = 0; it < options.max_iter; ++it) {
    for (std::size_t v = 0; v < n; ++v) {
      double acc = 0.0;
      for (std::size_t u = 0; u < n; ++u) {
        const double w = graph.weight(u, v);
        if (w != 0.0) acc += w / out_weight[u] * r.scores[u];
      }
      next[v] = (1.0 - d) + d * acc;
    }
    double delta = 0.0;
    for (std::size_t v = 0; v < n; ++v) delta += std::abs(next[v] - r.scores[v]);
    r.scores.swap(next);
    r.iterations = it + 1;
    if (bound_factor * delta < options.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

std::map<std::string, double> rank_map(const WordGraph& graph, const RankOptions& options) {
  const RankResult r = rank(graph, options);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < graph.size(); ++i) out.emplace(graph.nodes[i], r.scores[i]);
  return out;
}

Tokens extract_keywords(const Tokens& tokens, std::size_t k, const KeywordOptions& options) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "keyword count must be >= 1");
  const WordGraph g = build_graph(tokens, options.window);
  const RankResult r = rank(g, options.rank);

  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.scores[a] != r.scores[b] ? r.scores[a] > r.scores[b] : g.nodes[a] < g.nodes[b];
  });
  Tokens out;
  for (std::size_t i = 0; i < order.size() && i < k; ++i) out.push_back(g.nodes[order[i]]);
  return out;
}

const std::set<std::string>& default_sentence_delimiters() {
  static const std::set<std::string> delims = {"。", "！", "？", ".", "!", "?"};
  return delims;
}

std::vector<Tokens> split_sentences(const Tokens& tokens, const std::set<std::string>& delimiters) {
  std::vector<Tokens> out;
  Tokens current;
  for (const auto& t : tokens) {
    if (delimiters.count(t)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(t);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<Tokens> extract_sentence_keywords(const corpus::Article& article, std::size_t k_per_sentence,
                                              const KeywordOptions& options,
                                              const std::set<std::string>& delimiters) {
  std::vector<Tokens> out;
  for (const auto& sentence : split_sentences(article.text(), delimiters)) {
    out.push_back(extract_keywords(sentence, k_per_sentence, options));
  }
  return out;
}

}  // namespace tpgn::textrank
