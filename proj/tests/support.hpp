#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tpgn/corpus.hpp"
#include "tpgn/nn.hpp"
#include "tpgn/rng.hpp"

namespace testing {

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t nonzero = 0;  // entries with |analytic| > 1e-6
  std::string worst;
  std::size_t checked = 0;
};

/// Compares Parameter::grad from one backward pass of `loss` with central
/// differences. `loss` must build a fresh graph on every call. `stride` skips
/// entries for large tensors (1 checks all).
inline GradCheck check_gradients(tpgn::nn::ParameterSet& params, const std::function<tpgn::nn::Var(tpgn::nn::Graph&)>& loss,
                                 double eps = 1e-5, std::size_t stride = 1) {
  params.zero_grad();
  {
    tpgn::nn::Graph g;
    g.backward(loss(g));
  }
  auto eval = [&] {
    tpgn::nn::Graph g;
    return loss(g).scalar();
  };
  GradCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& param = params[p];
    for (std::size_t i = 0; i < param.value.size(); i += stride) {
      const double saved = param.value.data[i];
      param.value.data[i] = saved + eps;
      const double up = eval();
      param.value.data[i] = saved - eps;
      const double down = eval();
      param.value.data[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = param.grad.data[i];
      // Both tiny: differences are dominated by rounding.
      const double err = std::abs(numeric - analytic) < 1e-8 ? 0.0 : rel_error(numeric, analytic);
      ++out.checked;
      out.max_abs_error = std::max(out.max_abs_error, std::abs(numeric - analytic));
      out.nonzero += std::abs(analytic) > 1e-6;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = param.name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) + " numeric " +
                    std::to_string(numeric);
      }
    }
  }
  params.zero_grad();
  return out;
}

inline std::vector<double> random_vector(tpgn::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tpgn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Synthetic corpus: article i talks about its own subject words plus shared
/// filler; every comment mentions one subject word, so keyword matching has
/// something to find. Deterministic in (n, seed).
inline std::vector<tpgn::corpus::Article> synthetic_articles(std::size_t n, std::uint64_t seed = 7) {
  static const std::vector<std::string> filler = {"the", "a", "is", "of", "and", "today", "news", "report"};
  static const std::vector<std::string> verbs = {"love", "like", "see", "want", "hate"};
  tpgn::Rng rng(seed);
  std::vector<tpgn::corpus::Article> out;
  for (std::size_t i = 0; i < n; ++i) {
    tpgn::corpus::Article a;
    a.id = "art" + std::to_string(i);
    const std::string s0 = "subj" + std::to_string(i) + "x", s1 = "subj" + std::to_string(i) + "y";
    a.title = {s0, filler[rng.below(filler.size())], s1};
    for (int sent = 0; sent < 2; ++sent) {
      for (int w = 0; w < 5; ++w) {
        a.body.push_back(rng.below(3) == 0 ? filler[rng.below(filler.size())] : (rng.below(2) ? s0 : s1));
      }
      a.body.push_back(".");
    }
    a.comments = {{"i", verbs[i % verbs.size()], s0}, {s1, "is", "good"}};
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace testing
