#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qgrl/metrics.hpp"
#include "oracles.hpp"

using namespace qgrl;

namespace {

Tokens toks(std::initializer_list<const char*> ts) {
  Tokens out;
  for (const char* t : ts) out.emplace_back(t);
  return out;
}

// Random token sequences over a small alphabet so overlaps are common.
Tokens random_seq(oracle::TestRng& rng, int min_len, int max_len, int alphabet) {
  int len = min_len + static_cast<int>(rng.next() % static_cast<uint64_t>(
                                           max_len - min_len + 1));
  Tokens out;
  for (int i = 0; i < len; ++i)
    out.push_back(std::string(1, static_cast<char>('a' + rng.next() % alphabet)));
  return out;
}

const Tokens kSentence = toks(
    {"new", "york", "city", "traces", "its", "roots", "to", "its", "1624",
     "founding", "as", "a", "trading", "post", "by", "colonists", "of", "the",
     "dutch", "republic", "and", "was", "named", "new", "amsterdam", "in",
     "1626", "."});

}  // namespace

TEST_CASE("ngram profiles count all windows") {
  Tokens s = toks({"a", "b", "a", "b", "c"});
  NgramProfile p(s, 3);
  CHECK(p.total(1) == 5);
  CHECK(p.total(2) == 4);
  CHECK(p.total(3) == 3);
  CHECK(p.count(1, toks({"a"})) == 2);
  CHECK(p.count(2, toks({"a", "b"})) == 2);
  CHECK(p.count(2, toks({"b", "a"})) == 1);
  CHECK(p.count(3, toks({"a", "b", "c"})) == 1);
  CHECK(p.count(3, toks({"c", "a", "b"})) == 0);
  for (int n = 1; n <= 3; ++n) {
    long sum = 0;
    for (const auto& [gram, c] : p.grams(n)) {
      CHECK(c > 0);
      sum += c;
    }
    CHECK(sum == p.total(n));
  }
  NgramProfile tiny(toks({"a"}), 4);
  CHECK(tiny.total(4) == 0);
  CHECK_THROWS_AS(p.total(4), ArgError);
  CHECK_THROWS_AS(NgramProfile(s, 0), ArgError);
}

TEST_CASE("clipped precision by hand") {
  Tokens id = toks({"a", "b", "c"});
  for (int n = 1; n <= 3; ++n) CHECK(precision_n(id, id, n) == 1.0);
  CHECK(precision_n(toks({"a", "b"}), toks({"c", "d"}), 1) == 0.0);
  CHECK(precision_n(toks({"a", "a", "b"}), toks({"a", "b"}), 1) ==
        doctest::Approx(2.0 / 3.0));
  CHECK(precision_n(toks({"a", "a"}), toks({"a"}), 1) == 0.5);
  CHECK(precision_n(toks({"a"}), toks({"a"}), 2) == 0.0);  // no bigrams
  CHECK_THROWS_AS(precision_n(id, id, 0), ArgError);
}

TEST_CASE("precision never rises as the reference loses n-grams") {
  // Deleting an interior token can create a brand-new n-gram by joining its
  // neighbours, so the monotone property holds for unigrams at any position
  // and for higher orders under truncation from either end.
  oracle::TestRng rng(99);
  for (int c = 0; c < 200; ++c) {
    Tokens cand = random_seq(rng, 1, 8, 3);
    Tokens ref = random_seq(rng, 2, 8, 3);
    double full1 = precision_n(cand, ref, 1);
    for (size_t drop = 0; drop < ref.size(); ++drop) {
      Tokens smaller;
      for (size_t i = 0; i < ref.size(); ++i)
        if (i != drop) smaller.push_back(ref[i]);
      CHECK(precision_n(cand, smaller, 1) <= full1 + 1e-15);
    }
    for (int n = 2; n <= 3; ++n) {
      double full = precision_n(cand, ref, n);
      Tokens no_front(ref.begin() + 1, ref.end());
      Tokens no_back(ref.begin(), ref.end() - 1);
      CHECK(precision_n(cand, no_front, n) <= full + 1e-15);
      CHECK(precision_n(cand, no_back, n) <= full + 1e-15);
    }
  }
}

TEST_CASE("sentence bleu pinned values") {
  Tokens id = toks({"the", "cat", "sat", "down", "."});
  CHECK(bleu(id, {id}, 4) == 1.0);
  CHECK(bleu({}, {id}, 4) == 0.0);
  // token-disjoint pairs score exactly zero (no unigram smoothing)
  CHECK(bleu(toks({"a", "b", "c", "d"}), {toks({"w", "x", "y", "z"})}, 4) == 0.0);
  // one shared token, length 1: higher orders smoothed, brevity penalty e^-2
  double b = bleu(toks({"a"}), {toks({"a", "b", "c"})}, 4);
  CHECK(b == doctest::Approx(std::exp(-2.0)));
  CHECK_THROWS_AS(bleu(id, {}, 4), ArgError);
  CHECK_THROWS_AS(bleu(id, {id}, 0), ArgError);
}

TEST_CASE("sentence bleu brevity penalty picks the closest reference") {
  Tokens cand = toks({"a", "b", "c", "d"});
  // closest length to 4 among {2, 6} is tie; tie goes to the shorter (2) so
  // no penalty applies (c >= r)
  Tokens r2 = toks({"a", "b"});
  Tokens r6 = toks({"a", "b", "c", "d", "e", "f"});
  double with_tie = bleu(cand, {r6, r2}, 2);
  double short_only = bleu(cand, {r2}, 2);
  CHECK(with_tie >= short_only);  // extra reference can only add matches
  // and the 6-token reference alone does penalize
  double long_only = bleu(cand, {r6}, 2);
  double unpenalized = bleu(cand, {cand}, 2);
  CHECK(long_only < unpenalized);
}

TEST_CASE("sentence bleu matches the brute force oracle on random cases") {
  oracle::TestRng rng(2024);
  int nontrivial = 0;
  for (int c = 0; c < 1500; ++c) {
    Tokens cand = random_seq(rng, 0, 12, 4);
    std::vector<Tokens> refs;
    int nrefs = 1 + static_cast<int>(rng.next() % 3);
    for (int r = 0; r < nrefs; ++r) refs.push_back(random_seq(rng, 1, 12, 4));
    int max_n = 1 + static_cast<int>(rng.next() % 4);
    double lib = bleu(cand, refs, max_n);
    double ora = oracle::bleu(cand, refs, max_n);
    CHECK(lib == doctest::Approx(ora).epsilon(1e-12));
    CHECK(lib >= 0.0);
    CHECK(lib <= 1.0);
    if (lib > 0.0 && lib < 1.0) ++nontrivial;
  }
  CHECK(nontrivial > 300);  // the generator actually exercises the middle
}

TEST_CASE("bleu and gleu ignore reference order") {
  Tokens cand = toks({"a", "b", "c", "a"});
  std::vector<Tokens> refs = {toks({"a", "b"}), toks({"c", "a", "b"}),
                              toks({"a", "b", "c", "d", "e"})};
  std::vector<Tokens> flipped = {refs[2], refs[0], refs[1]};
  CHECK(bleu(cand, refs, 3) == bleu(cand, flipped, 3));
  CHECK(gleu(cand, refs, 3) == gleu(cand, flipped, 3));
}

TEST_CASE("gleu pinned values") {
  Tokens id = toks({"x", "y", "z"});
  CHECK(gleu(id, {id}, 4) == 1.0);
  CHECK(gleu(toks({"a", "b"}), {toks({"c", "d"})}, 4) == 0.0);
  CHECK(gleu({}, {id}, 4) == 0.0);
  // "a b c" vs "a b d": matches a,b + "a b" = 3; totals 6 and 6
  CHECK(gleu(toks({"a", "b", "c"}), {toks({"a", "b", "d"})}, 4) == 0.5);
}

TEST_CASE("gleu matches the enumeration oracle on random cases") {
  oracle::TestRng rng(31337);
  for (int c = 0; c < 1200; ++c) {
    Tokens cand = random_seq(rng, 0, 10, 3);
    std::vector<Tokens> refs;
    int nrefs = 1 + static_cast<int>(rng.next() % 2);
    for (int r = 0; r < nrefs; ++r) refs.push_back(random_seq(rng, 1, 10, 3));
    int max_n = 1 + static_cast<int>(rng.next() % 4);
    double lib = gleu(cand, refs, max_n);
    CHECK(lib == doctest::Approx(oracle::gleu(cand, refs, max_n)).epsilon(1e-12));
    CHECK(lib >= 0.0);
    CHECK(lib <= 1.0);
  }
}

TEST_CASE("rouge-l pinned values") {
  Tokens id = toks({"p", "q", "r"});
  CHECK(rouge_l(id, id) == 1.0);
  CHECK(rouge_l(toks({"a"}), toks({"b"})) == 0.0);
  CHECK(rouge_l({}, id) == 0.0);
  CHECK(rouge_l(id, {}) == 0.0);
  // lcs("a b c d", "a c d") = 3; P = 3/4, R = 1
  double p = 0.75, r = 1.0, b2 = 1.44;
  CHECK(rouge_l(toks({"a", "b", "c", "d"}), toks({"a", "c", "d"})) ==
        doctest::Approx((1 + b2) * p * r / (r + b2 * p)));
}

TEST_CASE("rouge-l matches the dp oracle on random cases") {
  oracle::TestRng rng(777);
  for (int c = 0; c < 1500; ++c) {
    Tokens cand = random_seq(rng, 0, 12, 3);
    Tokens ref = random_seq(rng, 0, 12, 3);
    double lib = rouge_l(cand, ref);
    CHECK(lib == doctest::Approx(oracle::rouge_l(cand, ref)).epsilon(1e-12));
    CHECK(lib >= 0.0);
    CHECK(lib <= 1.0);
  }
}

TEST_CASE("qss is one on contiguous subsequences and zero without overlap") {
  for (size_t start = 0; start + 4 <= kSentence.size(); start += 3) {
    Tokens q(kSentence.begin() + static_cast<long>(start),
             kSentence.begin() + static_cast<long>(start) + 4);
    CHECK(qss(q, kSentence, 4) == doctest::Approx(1.0));
  }
  CHECK(qss(toks({"quux", "zork"}), kSentence, 2) == 0.0);
}

TEST_CASE("qss hand-computed value on a real question") {
  Tokens q = toks({"what", "year", "was", "new", "york", "founded", "?"});
  // unigrams: was/new/york match -> 3/7; bigrams: only "new york" -> 1/6;
  // trigrams: none -> zero propagates at order 3 and above
  CHECK(qss(q, kSentence, 2) == doctest::Approx(std::sqrt(3.0 / 42.0)));
  CHECK(qss(q, kSentence, 3) == 0.0);
  CHECK(qss(q, kSentence, 4) == 0.0);
}

TEST_CASE("qss matches the oracle on random cases") {
  oracle::TestRng rng(555);
  for (int c = 0; c < 1000; ++c) {
    Tokens q = random_seq(rng, 0, 10, 3);
    Tokens s = random_seq(rng, 1, 12, 3);
    int max_n = 1 + static_cast<int>(rng.next() % 4);
    double lib = qss(q, s, max_n);
    CHECK(lib == doctest::Approx(oracle::qss(q, s, max_n)).epsilon(1e-12));
    CHECK(lib >= 0.0);
    CHECK(lib <= 1.0);
  }
}

TEST_CASE("anss truncates orders to the shorter answer") {
  CHECK(anss(toks({"five"}), toks({"five"}), 4) == 1.0);
  CHECK(anss(toks({"five", "cities"}), toks({"five"}), 4) == 0.5);
  CHECK(anss(toks({"five"}), toks({"five", "cities"}), 4) == 1.0);
  CHECK(anss(toks({"a", "b"}), toks({"c", "d"}), 4) == 0.0);
  CHECK(anss({}, toks({"five"}), 4) == 0.0);
  CHECK(anss(toks({"five"}), {}, 4) == 0.0);
  Tokens span = toks({"the", "dutch", "republic"});
  CHECK(anss(span, span, 4) == 1.0);
}

TEST_CASE("anss matches the oracle on random cases") {
  oracle::TestRng rng(808);
  for (int c = 0; c < 1000; ++c) {
    Tokens pred = random_seq(rng, 0, 6, 3);
    Tokens piv = random_seq(rng, 0, 6, 3);
    int max_n = 1 + static_cast<int>(rng.next() % 4);
    double lib = anss(pred, piv, max_n);
    CHECK(lib == doctest::Approx(oracle::anss(pred, piv, max_n)).epsilon(1e-12));
    CHECK(lib >= 0.0);
    CHECK(lib <= 1.0);
  }
}

TEST_CASE("corpus bleu aggregates counts before the geometric mean") {
  Tokens c1 = toks({"a", "b", "c", "d"});
  Tokens c2 = toks({"x", "y"});
  std::vector<Tokens> cands = {c1, c2};
  std::vector<std::vector<Tokens>> refs = {{c1}, {toks({"p", "q"})}};
  // order totals: m = 4,3,2,1 matched of t = 6,4,2,1
  double expect = std::pow((4.0 / 6.0) * (3.0 / 4.0), 0.25);
  CHECK(corpus_bleu(cands, refs, 4) == doctest::Approx(expect));
  CHECK(corpus_bleu({c1}, {{c1}}, 4) == 1.0);
  // any order with zero matches zeroes the whole aggregate
  CHECK(corpus_bleu({c2}, {{toks({"p", "q"})}}, 1) == 0.0);
  CHECK_THROWS_AS(corpus_bleu({}, {}, 4), ArgError);
  CHECK_THROWS_AS(corpus_bleu({c1}, {{c1}, {c1}}, 4), ArgError);
}

TEST_CASE("reward spec resolves and validates weights") {
  RewardSpec spec;
  spec.use_qss = true;
  spec.use_anss = true;
  CHECK(spec.component_count() == 3);
  auto w = spec.resolved_weights();
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(1.0 / 3.0));
  spec.weights = {2.0, 1.0, 1.0};
  w = spec.resolved_weights();
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.25));
  spec.weights = {1.0};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.weights = {1.0, -0.5, 0.5};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.weights = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.weights.clear();
  spec.max_n = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("base metric names round trip") {
  for (BaseMetric m : {BaseMetric::BLEU, BaseMetric::GLEU, BaseMetric::ROUGE_L,
                       BaseMetric::DAS})
    CHECK(base_metric_from_name(base_metric_name(m)) == m);
  CHECK_THROWS_AS(base_metric_from_name("meteor"), ConfigError);
}

TEST_CASE("combined reward composes the component scores") {
  Tokens sentence = kSentence;
  Tokens gold = toks({"in", "what", "year", "was", "new", "amsterdam",
                      "named", "?"});
  Tokens question = gold;  // exact hit
  Tokens answer = toks({"1624"});

  RewardSpec spec;  // BLEU only
  CHECK(combined_reward(spec, question, {gold}, sentence, answer, answer) ==
        doctest::Approx(1.0));

  // the best gold wins
  Tokens other_gold = toks({"who", "was", "the", "mayor", "?"});
  CHECK(combined_reward(spec, question, {other_gold, gold}, sentence, answer,
                        answer) == doctest::Approx(1.0));

  // all components = 1 when the question is also a sentence subsequence
  Tokens sub(sentence.begin(), sentence.begin() + 6);
  spec.use_qss = true;
  spec.use_anss = true;
  CHECK(combined_reward(spec, sub, {sub}, sentence, answer, answer) ==
        doctest::Approx(1.0));

  // weighted mean matches composing the component oracles
  spec.base = BaseMetric::ROUGE_L;
  spec.weights = {0.5, 0.3, 0.2};
  Tokens pred_ans = toks({"1624", "founding"});
  double expect = 0.5 * oracle::rouge_l(question, gold) +
                  0.3 * oracle::qss(question, sentence, 4) +
                  0.2 * oracle::anss(pred_ans, answer, 4);
  CHECK(combined_reward(spec, question, {gold}, sentence, pred_ans, answer) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("combined reward requires the das scorer exactly when base is das") {
  RewardSpec spec;
  Tokens q = toks({"a"});
  CHECK_THROWS_AS(
      combined_reward(spec, q, {q}, q, q, q, [](const Tokens&, const Tokens&) {
        return 0.5;
      }),
      ConfigError);
  spec.base = BaseMetric::DAS;
  CHECK_THROWS_AS(combined_reward(spec, q, {q}, q, q, q), ConfigError);
  double got = combined_reward(
      spec, q, {toks({"x"}), toks({"y"})}, q, q, q,
      [](const Tokens&, const Tokens& gold) { return gold[0] == "y" ? 0.8 : 0.3; });
  CHECK(got == doctest::Approx(0.8));  // max over golds
  CHECK_THROWS_AS(combined_reward(spec, q, {}, q, q, q,
                                  [](const Tokens&, const Tokens&) { return 0.5; }),
                  ArgError);
}
