#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "metric_oracles.hpp"
#include "tpgn/error.hpp"
#include "tpgn/metrics.hpp"

using namespace tpgn;
using namespace tpgn::metrics;
using corpus::tokenize;

TEST_CASE("rouge_l hand values") {
  CHECK(rouge_l(tokenize("a b c"), {tokenize("a b c")}) == 1.0);
  CHECK(rouge_l(tokenize("a b"), {tokenize("c d")}) == 0.0);
  // LCS 3, R = 1, P = 0.75
  const double f = (1 + 1.44) * 1.0 * 0.75 / (1.0 + 1.44 * 0.75);
  CHECK(rouge_l(tokenize("a b c d"), {tokenize("a c d")}) == doctest::Approx(f).epsilon(1e-15));
  // max over references
  CHECK(rouge_l(tokenize("a b c d"), {tokenize("x y"), tokenize("a c d")}) == doctest::Approx(f).epsilon(1e-15));
  CHECK_THROWS_AS(rouge_l({}, {tokenize("a")}), Error);
  CHECK_THROWS_AS(rouge_l(tokenize("a"), {}), Error);
}

TEST_CASE("lcs and rouge_l against exhaustive search") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = testing::random_sentence(rng, 10, 4);
    const auto b = testing::random_sentence(rng, 10, 4);
    CHECK(lcs_length(a, b) == testing::brute_force_lcs(a, b));
    std::vector<Tokens> refs{b, testing::random_sentence(rng, 8, 5)};
    CHECK(std::abs(rouge_l(a, refs) - testing::oracle_rouge_l(a, refs)) <= 1e-12);
  }
}

TEST_CASE("bleu_1 hand values") {
  CHECK(bleu_1(tokenize("a b c"), {tokenize("a b c")}) == 1.0);
  CHECK(bleu_1(tokenize("a b c"), {tokenize("a b d")}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(bleu_1(tokenize("a b"), {tokenize("a b c d")}) == doctest::Approx(std::exp(1.0 - 2.0)).epsilon(1e-15));
  // clipping: "the" appears twice in the reference at most
  CHECK(bleu_1(tokenize("the the the"), {tokenize("the cat the")}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // closest reference length, shorter on ties (2 and 4 around 3)
  CHECK(bleu_1(tokenize("a b c"), {tokenize("a b"), tokenize("a b c d")}) == 1.0);
  CHECK(bleu_1(tokenize("a b"), {tokenize("a b c"), tokenize("a b c d e f")}) ==
        doctest::Approx(std::exp(1.0 - 1.5)).epsilon(1e-15));
}

TEST_CASE("bleu_1 against direct counting") {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = testing::random_sentence(rng, 8, 5);
    std::vector<Tokens> refs;
    for (std::size_t r = 0, n = 1 + rng.below(3); r < n; ++r) refs.push_back(testing::random_sentence(rng, 9, 5));
    CHECK(std::abs(bleu_1(c, refs) - testing::oracle_bleu_1(c, refs)) <= 1e-12);
  }
}

TEST_CASE("corpus bleu sums counts before dividing") {
  const std::vector<Tokens> cands{tokenize("a b c"), tokenize("x")};
  const std::vector<References> refs{{tokenize("a b d")}, {tokenize("x y")}};
  // clipped 2 + 1 over 4 candidate tokens; ref length 3 + 2 = 5 > 4
  CHECK(corpus_bleu_1(cands, refs) == doctest::Approx(0.75 * std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-15));
}

TEST_CASE("cider_d hand values") {
  SUBCASE("identity with unique n-grams") {
    const std::vector<References> refs{{tokenize("a b")}, {tokenize("c d")}};
    CiderD scorer(refs);
    // n = 1, 2 have cosine 1, n = 3, 4 are empty: 10 * 2 / 4
    CHECK(scorer.score(tokenize("a b"), 0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(scorer.score(tokenize("x y"), 0) == 0.0);
  }
  SUBCASE("three-article toy corpus") {
    const std::vector<References> refs{{tokenize("a b c")}, {tokenize("a d")}, {tokenize("e f")}};
    const double l3 = std::log(3.0), l15 = std::log(1.5);
    const double cos1 = std::sqrt(l15 * l15 + l3 * l3) / std::sqrt(l15 * l15 + 2 * l3 * l3);
    const double cos2 = 1.0 / std::sqrt(2.0);
    const double expect = 10.0 * std::exp(-1.0 / 72.0) * (cos1 + cos2) / 4.0;
    CHECK(CiderD(refs).score(tokenize("a b"), 0) == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK_THROWS_AS(CiderD({{tokenize("a")}}), Error);
  try {
    cider_d({tokenize("a")}, {{tokenize("a")}});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CorpusTooSmall);
  }
}

TEST_CASE("cider_d against the straight-line oracle") {
  Rng rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<References> refs;
    const auto articles = 2 + rng.below(4);
    for (std::size_t a = 0; a < articles; ++a) {
      References r;
      for (std::size_t k = 0, n = 1 + rng.below(3); k < n; ++k) r.push_back(testing::random_sentence(rng, 9, 6));
      refs.push_back(r);
    }
    CiderD scorer(refs);
    for (std::size_t a = 0; a < articles; ++a) {
      const auto c = rng.below(3) == 0 ? refs[a][0] : testing::random_sentence(rng, 9, 6);
      CHECK(std::abs(scorer.score(c, a) - testing::oracle_cider_d(c, a, refs)) <= 1e-12);
    }
  }
}

TEST_CASE("metrics are invariant to reference order") {
  Rng rng(34);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = testing::random_sentence(rng, 8, 4);
    References refs{testing::random_sentence(rng, 8, 4), testing::random_sentence(rng, 8, 4),
                    testing::random_sentence(rng, 8, 4)};
    auto rev = refs;
    std::reverse(rev.begin(), rev.end());
    CHECK(rouge_l(c, refs) == rouge_l(c, rev));
    CHECK(bleu_1(c, refs) == bleu_1(c, rev));
    const std::vector<References> corpus{refs, {testing::random_sentence(rng, 5, 4)}};
    const std::vector<References> corpus_rev{rev, corpus[1]};
    CHECK(CiderD(corpus).score(c, 0) == doctest::Approx(CiderD(corpus_rev).score(c, 0)).epsilon(1e-12));
  }
}

TEST_CASE("rouge_l is 1 exactly for identical sequences") {
  Rng rng(35);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testing::random_sentence(rng, 6, 3);
    const auto r = testing::random_sentence(rng, 6, 3);
    CHECK((rouge_l(c, {r}) == 1.0) == (c == r));
    const double b = bleu_1(c, {r});
    CHECK(b <= 1.0);
    CHECK(b >= 0.0);
    if (c == r) CHECK(b == 1.0);
  }
}

TEST_CASE("rouge_l reaches 1 only on an identical reference") {
  // Best precision and best recall from different references must not add up to 1.
  CHECK(rouge_l(tokenize("a b"), {tokenize("a b c"), tokenize("a")}) < 1.0);
  Rng rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = testing::random_sentence(rng, 4, 2);
    References refs;
    for (std::size_t r = 0, n = 1 + rng.below(4); r < n; ++r) refs.push_back(testing::random_sentence(rng, 4, 2));
    const bool identical = std::find(refs.begin(), refs.end(), c) != refs.end();
    CHECK((rouge_l(c, refs) == 1.0) == identical);
  }
}

TEST_CASE("top-N reductions") {
  const std::vector<std::vector<double>> scores{{0.9, 0.1, 0.5}, {0.2, 0.4, 0.3}};
  CHECK(top_n_from_scores(scores, 1) == doctest::Approx((0.9 + 0.4) / 2));
  CHECK(top_n_from_scores(scores, 2) == doctest::Approx(((0.9 + 0.5) / 2 + (0.4 + 0.3) / 2) / 2));
  CHECK(top_n_from_scores(scores, 3) == doctest::Approx(((1.5) / 3 + 0.9 / 3) / 2));
  CHECK(top_n_from_scores(scores, 10) == top_n_from_scores(scores, 3));
  CHECK(top_n_from_scores(scores, 2, TopNMode::NthBest) == doctest::Approx((0.5 + 0.3) / 2));
  CHECK(top_n_from_scores(scores, 2, TopNMode::MaxOfFirst) == doctest::Approx((0.9 + 0.4) / 2));
  CHECK(top_n_from_scores({{0.3}, {0.5}}, 1) == doctest::Approx(0.4));
  CHECK_THROWS_AS(top_n_from_scores(scores, 0), Error);

  Rng rng(36);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> s(3);
    for (auto& a : s) {
      for (std::size_t k = 0, n = 1 + rng.below(6); k < n; ++k) a.push_back(rng.uniform());
    }
    for (std::size_t n = 1; n < 7; ++n) {
      CHECK(top_n_from_scores(s, n + 1) <= top_n_from_scores(s, n) + 1e-15);
      CHECK(top_n_from_scores(s, n + 1, TopNMode::NthBest) <= top_n_from_scores(s, n, TopNMode::NthBest));
    }
  }
}

TEST_CASE("top_n_score wires metrics in") {
  const std::vector<std::vector<Tokens>> cands{{tokenize("a b"), tokenize("x y")}, {tokenize("c d")}};
  const std::vector<References> refs{{tokenize("a b")}, {tokenize("c d")}};
  CHECK(top_n_score(cands, refs, 1, Metric::RougeL) == 1.0);
  CHECK(top_n_score(cands, refs, 2, Metric::RougeL) == doctest::Approx(0.75));
  CHECK(top_n_score(cands, refs, 1, Metric::CiderD) == doctest::Approx(5.0));
}

TEST_CASE("diversity_count") {
  CHECK(diversity_count({{tokenize("a"), tokenize("a")}}) == 1.0);
  CHECK(diversity_count({{tokenize("a"), tokenize("b"), tokenize("c")}}) == 3.0);
  CHECK(diversity_count({{tokenize("a"), tokenize("a"), tokenize("b")}, {tokenize("c")}}) == 1.5);
  CHECK(diversity_count({}) == 0.0);
}

TEST_CASE("score report") {
  const std::vector<std::string> ids{"x", "y"};
  const std::vector<std::vector<Tokens>> cands{{tokenize("a b"), {}}, {tokenize("c d")}};
  const std::vector<References> refs{{tokenize("a b")}, {tokenize("c d")}};
  const auto report = score_report(ids, cands, refs, {1, 3, 5});
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].rouge_l == 100.0);
  CHECK(report.rows[0].bleu_1 == 100.0);
  CHECK(report.rows[0].cider_d.has_value());
  CHECK(report.rows[1].rouge_l == doctest::Approx(75.0));
  CHECK(report.articles[0].rouge_l == std::vector<double>{100.0, 0.0});
  const auto j = nlohmann::json::parse(report_json(report));
  CHECK(j["rows"].size() == 3);
  CHECK(j["rows"][0]["METEOR"].is_null());
  CHECK(j["unavailable"].contains("METEOR"));
  CHECK(j["top_n_mode"] == "mean_of_best_n");

  const auto single = score_report({"x"}, {cands[0]}, {refs[0]}, {1});
  CHECK_FALSE(single.rows[0].cider_d.has_value());
}
