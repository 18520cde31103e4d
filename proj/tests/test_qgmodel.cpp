#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "qgrl/qgmodel.hpp"
#include "qgrl/gradcheck.hpp"
#include "oracles.hpp"

using namespace qgrl;

namespace {

Vocabulary tiny_vocab() {
  return Vocabulary::from_tokens({"<pad>", "<s>", "</s>", "<unk>", "the",
                                  "city", "was", "founded", "in", "what",
                                  "year", "?", "new"});
}

FeatureVocab tiny_fvocab() {
  return FeatureVocab::from_lists({"O", "DT", "NN", "VBD", "IN", "CD"},
                                  {"O", "LOC", "NUM"});
}

ModelDims tiny_dims() {
  ModelDims d;
  d.word_dim = 6;
  d.feat_dim = 3;
  d.enc_hidden = 4;
  d.enc_layers = 2;
  d.dec_hidden = 8;
  d.att_dim = 5;
  d.ptr_hidden = 4;
  d.ptr_att_dim = 4;
  d.max_span = 8;
  return d;
}

Example tiny_example() {
  Example ex;
  ex.id = "t1";
  ex.sentence = {"the", "city", "was", "founded", "in", "1624", "."};
  ex.pos = {"DT", "NN", "VBD", "VBD", "IN", "CD", "O"};
  ex.ner = {"O", "O", "O", "O", "O", "NUM", "O"};
  ex.answer_span = Span{5, 5};
  ex.questions = {{"what", "year", "was", "the", "city", "founded", "?"}};
  return ex;
}

ParamStore gen_store(const ModelDims& d, const Vocabulary& v,
                     const FeatureVocab& f, uint64_t seed) {
  ParamStore s;
  Rng rng(seed);
  init_generator(s, d, v.size(), f, rng);
  return s;
}

ParamStore ptr_store(const ModelDims& d, const Vocabulary& v,
                     const FeatureVocab& f, uint64_t seed) {
  ParamStore s;
  Rng rng(seed);
  init_pointer(s, d, v.size(), f, rng);
  return s;
}

double row_sum(const Mat& m) { return m.sum(); }

}  // namespace

TEST_CASE("extended vocabulary maps source words and oovs") {
  Vocabulary v = tiny_vocab();
  Example ex = tiny_example();
  ExtendedVocab ext = build_extended(ex.sentence, v);
  CHECK(ext.base_size == 13);
  REQUIRE(ext.oov_words.size() == 2);
  CHECK(ext.oov_words[0] == "1624");
  CHECK(ext.oov_words[1] == ".");
  CHECK(ext.extended_size() == 15);
  std::vector<int> want = {4, 5, 6, 7, 8, 13, 14};
  CHECK(ext.source_slots == want);
  CHECK(ext.target_id("what", v) == 9);
  CHECK(ext.target_id("1624", v) == 13);
  CHECK(ext.target_id(".", v) == 14);
  CHECK(ext.target_id("zzz", v) == Vocabulary::kUnk);
  CHECK(ext.slot_token(13, v) == "1624");
  CHECK(ext.slot_token(4, v) == "the");
  CHECK_THROWS_AS(ext.slot_token(15, v), ArgError);
  CHECK_THROWS_AS(ext.slot_token(-1, v), ArgError);

  ExtendedVocab rep = build_extended({"new", "new"}, v);
  CHECK(rep.oov_words.empty());
  std::vector<int> rw = {12, 12};
  CHECK(rep.source_slots == rw);

  ExtendedVocab oo = build_extended({"qq", "zz", "qq"}, v);
  std::vector<int> ow = {13, 14, 13};
  CHECK(oo.source_slots == ow);
  REQUIRE(oo.oov_words.size() == 2);
  CHECK(oo.oov_words[0] == "qq");
}

TEST_CASE("encode yields one hidden row per source position") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 11);
  Example ex = tiny_example();
  Graph g(store);
  EncoderOutput enc = encode(g, ex, v, f, d);
  CHECK(enc.h.rows() == 7);
  CHECK(enc.h.cols() == d.enc_out_dim());
  CHECK(enc.s0.rows() == 1);
  CHECK(enc.s0.cols() == d.enc_out_dim());

  Example two;
  two.sentence = {"what", "?"};
  two.pos = {"O", "O"};
  two.ner = {"O", "O"};
  Graph g2(store);
  EncoderOutput e2 = encode(g2, two, v, f, d);
  CHECK(e2.h.rows() == 2);

  Example bad;
  bad.sentence = {};
  bad.pos = {};
  bad.ner = {};
  Graph g3(store);
  CHECK_THROWS_AS(encode(g3, bad, v, f, d), ArgError);
}

TEST_CASE("all-zero parameters give all-zero encoder states") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 5);
  for (const std::string& name : store.names())
    store.value(name).mat().setZero();
  Graph g(store);
  EncoderOutput enc = encode(g, tiny_example(), v, f, d);
  CHECK(enc.h.value().cwiseAbs().maxCoeff() == 0.0);
  CHECK(enc.s0.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reversing the input and swapping directions mirrors the encoder") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  d.enc_layers = 1;
  ParamStore a = gen_store(d, v, f, 21);
  ParamStore b = a;
  for (const char* part : {".wx", ".wh", ".b"})
    std::swap(b.value(std::string("gen.enc.l0.fw") + part).mat(),
              b.value(std::string("gen.enc.l0.bw") + part).mat());

  Example ex = tiny_example();
  Example rex = ex;
  std::reverse(rex.sentence.begin(), rex.sentence.end());
  std::reverse(rex.pos.begin(), rex.pos.end());
  std::reverse(rex.ner.begin(), rex.ner.end());
  const int T = static_cast<int>(ex.sentence.size());
  rex.answer_span = Span{T - 1 - ex.answer_span->end,
                         T - 1 - ex.answer_span->start};

  Graph ga(a);
  EncoderOutput ea = encode(ga, ex, v, f, d);
  Graph gb(b);
  EncoderOutput eb = encode(gb, rex, v, f, d);
  const Mat& ha = ea.h.value();
  const Mat& hb = eb.h.value();
  const int H = d.enc_hidden;
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < H; ++j) {
      CHECK(hb(t, j) == ha(T - 1 - t, H + j));
      CHECK(hb(t, H + j) == ha(T - 1 - t, j));
    }
  const Mat& sa = ea.s0.value();
  const Mat& sb = eb.s0.value();
  for (int j = 0; j < H; ++j) {
    CHECK(sb(0, j) == sa(0, H + j));
    CHECK(sb(0, H + j) == sa(0, j));
  }
}

TEST_CASE("attention over a single source token is a unit weight") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 3);
  Example ex;
  ex.sentence = {"the"};
  ex.pos = {"DT"};
  ex.ner = {"O"};
  Graph g(store);
  EncoderOutput enc = encode(g, ex, v, f, d);
  DecoderState st = decoder_init(g, enc, d);
  auto att = attend(g, enc, st, d);
  CHECK(att.first.value()(0, 0) == 1.0);
  for (Eigen::Index j = 0; j < att.second.cols(); ++j)
    CHECK(att.second.value()(0, j) == enc.h.value()(0, j));
}

TEST_CASE("zero coverage weights reduce to the coverage-free path") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 17);
  store.value("gen.att.w_cov").mat().setZero();
  Rng rng(99);
  Mat hm(5, d.enc_out_dim());
  for (Eigen::Index i = 0; i < hm.size(); ++i)
    hm.data()[i] = rng.uniform(-1.0, 1.0);
  Mat sm(1, d.dec_hidden);
  for (Eigen::Index i = 0; i < sm.size(); ++i)
    sm.data()[i] = rng.uniform(-1.0, 1.0);
  Mat wm(1, 5);
  for (Eigen::Index i = 0; i < wm.size(); ++i)
    wm.data()[i] = rng.uniform(0.0, 3.0);

  Graph g(store);
  EncoderOutput enc{g.input(hm), g.input(hm.row(0))};
  DecoderState st;
  st.s = g.input(sm);
  st.c = g.input(sm);
  st.wcv = g.input(wm);
  auto with_cov = attend(g, enc, st, d, true);
  auto without = attend(g, enc, st, d, false);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK(with_cov.first.value()(0, i) == without.first.value()(0, i));
  for (Eigen::Index j = 0; j < d.enc_out_dim(); ++j)
    CHECK(with_cov.second.value()(0, j) == without.second.value()(0, j));
}

TEST_CASE("attention matches a scalar-loop evaluation") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  const int T = 5, E = d.enc_out_dim(), D = d.dec_hidden, A = d.att_dim;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    ParamStore store = gen_store(d, v, f, seed);
    Rng rng(seed * 31 + 7);
    Mat hm(T, E), sm(1, D), wm(1, T);
    for (Eigen::Index i = 0; i < hm.size(); ++i)
      hm.data()[i] = rng.uniform(-1.5, 1.5);
    for (Eigen::Index i = 0; i < sm.size(); ++i)
      sm.data()[i] = rng.uniform(-1.5, 1.5);
    for (Eigen::Index i = 0; i < wm.size(); ++i)
      wm.data()[i] = rng.uniform(0.0, 2.0);

    Graph g(store);
    EncoderOutput enc{g.input(hm), g.input(hm.row(0))};
    DecoderState st;
    st.s = g.input(sm);
    st.c = g.input(sm);
    st.wcv = g.input(wm);
    auto att = attend(g, enc, st, d, true);

    const Mat& we = store.value("gen.att.w_enc").mat();
    const Mat& wd = store.value("gen.att.w_dec").mat();
    const Mat& wc = store.value("gen.att.w_cov").mat();
    const Mat& bb = store.value("gen.att.b").mat();
    const Mat& vv = store.value("gen.att.v").mat();
    std::vector<double> e(T);
    for (int i = 0; i < T; ++i) {
      double ei = 0.0;
      for (int k = 0; k < A; ++k) {
        double pre = bb(0, k) + wm(0, i) * wc(0, k);
        for (int j = 0; j < E; ++j) pre += hm(i, j) * we(j, k);
        for (int j = 0; j < D; ++j) pre += sm(0, j) * wd(j, k);
        ei += std::tanh(pre) * vv(k, 0);
      }
      e[i] = ei;
    }
    double mx = e[0];
    for (double x : e) mx = std::max(mx, x);
    double z = 0.0;
    for (double x : e) z += std::exp(x - mx);
    for (int i = 0; i < T; ++i) {
      double ai = std::exp(e[i] - mx) / z;
      CHECK(std::abs(att.first.value()(0, i) - ai) <= 1e-12);
    }
    for (int j = 0; j < E; ++j) {
      double cj = 0.0;
      for (int i = 0; i < T; ++i)
        cj += (std::exp(e[i] - mx) / z) * hm(i, j);
      CHECK(std::abs(att.second.value()(0, j) - cj) <= 1e-12);
    }
  }
}

TEST_CASE("decode-step distributions normalize and coverage accumulates exactly") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  const std::vector<std::string> pool = {"the",  "city", "was", "founded",
                                         "in",   "what", "year", "?",
                                         "new",  "1624", "zzz"};
  oracle::TestRng trng(404);
  auto pick_int = [&](int n) { return static_cast<int>(trng.next() % n); };
  for (int rep = 0; rep < 20; ++rep) {
    ParamStore store = gen_store(d, v, f, 1000 + rep);
    Example ex;
    int T = 2 + pick_int(5);
    for (int t = 0; t < T; ++t) {
      ex.sentence.push_back(pool[(size_t)pick_int((int)pool.size())]);
      ex.pos.push_back("O");
      ex.ner.push_back("O");
    }
    if (pick_int(2) == 0) {
      int s = pick_int(T);
      ex.answer_span = Span{s, s};
    }
    ExtendedVocab ext = build_extended(ex.sentence, v);
    Graph g(store);
    EncoderOutput enc = encode(g, ex, v, f, d);
    DecoderState st = decoder_init(g, enc, d);
    Mat wsum = Mat::Zero(1, T);
    int prev = Vocabulary::kStart;
    for (int t = 0; t < 5; ++t) {
      auto stepped = decode_step(g, enc, st, prev, ext, d);
      const StepDistribution& sd = stepped.first;
      const DecoderState& ns = stepped.second;
      CHECK(std::abs(row_sum(sd.attention.value()) - 1.0) <= 1e-9);
      CHECK(std::abs(row_sum(sd.p.value()) - 1.0) <= 1e-9);
      CHECK(std::abs(row_sum(sd.p_star.value()) - 1.0) <= 1e-9);
      CHECK(sd.attention.value().minCoeff() >= 0.0);
      CHECK(sd.p.value().minCoeff() >= 0.0);
      CHECK(sd.p_star.value().minCoeff() >= 0.0);
      double gate = sd.p_cg.scalar();
      CHECK(gate >= 0.0);
      CHECK(gate <= 1.0);
      double pen = sd.penalty.scalar();
      CHECK(pen >= 0.0);
      CHECK(pen <= 1.0 + 1e-12);
      // Coverage before the step is exactly the sum of earlier attentions.
      for (int i = 0; i < T; ++i) CHECK(st.wcv.value()(0, i) == wsum(0, i));
      wsum += sd.attention.value();
      for (int i = 0; i < T; ++i) {
        CHECK(ns.wcv.value()(0, i) == wsum(0, i));
        CHECK(ns.wcv.value()(0, i) >= st.wcv.value()(0, i));
      }
      st = ns;
      prev = pick_int(ext.extended_size());
    }
  }
}

TEST_CASE("a closed copy gate yields the vocabulary distribution") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 8);
  store.value("gen.cg.b").mat()(0, 0) = -1000.0;
  Example ex = tiny_example();
  ExtendedVocab ext = build_extended(ex.sentence, v);
  Graph g(store);
  EncoderOutput enc = encode(g, ex, v, f, d);
  DecoderState st = decoder_init(g, enc, d);
  auto stepped = decode_step(g, enc, st, Vocabulary::kStart, ext, d);
  const StepDistribution& sd = stepped.first;
  CHECK(sd.p_cg.scalar() == 0.0);
  for (int i = 0; i < ext.base_size; ++i)
    CHECK(sd.p_star.value()(0, i) == sd.p.value()(0, i));
  for (int i = ext.base_size; i < ext.extended_size(); ++i)
    CHECK(sd.p_star.value()(0, i) == 0.0);
}

TEST_CASE("an open copy gate copies exactly the attention mass") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 8);
  store.value("gen.cg.b").mat()(0, 0) = 1000.0;
  Example ex = tiny_example();
  ExtendedVocab ext = build_extended(ex.sentence, v);
  Graph g(store);
  EncoderOutput enc = encode(g, ex, v, f, d);
  DecoderState st = decoder_init(g, enc, d);
  auto stepped = decode_step(g, enc, st, Vocabulary::kStart, ext, d);
  const StepDistribution& sd = stepped.first;
  CHECK(sd.p_cg.scalar() == 1.0);
  std::map<int, double> mass;
  for (size_t i = 0; i < ext.source_slots.size(); ++i)
    mass[ext.source_slots[i]] += sd.attention.value()(0, (Eigen::Index)i);
  for (int e = 0; e < ext.extended_size(); ++e) {
    double want = mass.count(e) ? mass[e] : 0.0;
    CHECK(std::abs(sd.p_star.value()(0, e) - want) <= 1e-15);
  }
}

TEST_CASE("repeated source words pool their attention mass") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 29);
  Example ex;
  ex.sentence = {"new", "new", "city"};
  ex.pos = {"O", "O", "NN"};
  ex.ner = {"O", "O", "O"};
  ExtendedVocab ext = build_extended(ex.sentence, v);
  Graph g(store);
  EncoderOutput enc = encode(g, ex, v, f, d);
  DecoderState st = decoder_init(g, enc, d);
  auto stepped = decode_step(g, enc, st, Vocabulary::kStart, ext, d);
  const StepDistribution& sd = stepped.first;
  double gate = sd.p_cg.scalar();
  const Mat& a = sd.attention.value();
  double want_new = gate * (a(0, 0) + a(0, 1)) + (1 - gate) * sd.p.value()(0, 12);
  double want_city = gate * a(0, 2) + (1 - gate) * sd.p.value()(0, 5);
  CHECK(std::abs(sd.p_star.value()(0, 12) - want_new) <= 1e-12);
  CHECK(std::abs(sd.p_star.value()(0, 5) - want_city) <= 1e-12);
}

TEST_CASE("teacher-forced decode gradients match finite differences") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d;
  d.word_dim = 4;
  d.feat_dim = 2;
  d.enc_hidden = 3;
  d.enc_layers = 2;
  d.dec_hidden = 6;
  d.att_dim = 4;
  ParamStore store = gen_store(d, v, f, 77);
  Example ex;
  ex.sentence = {"the", "city", "qq"};
  ex.pos = {"DT", "NN", "O"};
  ex.ner = {"O", "O", "O"};
  ex.answer_span = Span{1, 1};
  ExtendedVocab ext = build_extended(ex.sentence, v);
  std::vector<int> targets = {9, ext.target_id("qq", v), Vocabulary::kEnd};
  REQUIRE(targets[1] == 13);

  auto loss_fn = [&](ParamStore& st) -> double {
    st.zero_grads();
    Graph g(st);
    ForcedDecode fd = force_decode(g, ex, v, f, ext, d, targets);
    Var nll = fd.logps[0];
    Var pen = fd.steps[0].penalty;
    for (size_t t = 1; t < fd.logps.size(); ++t) {
      nll = add(nll, fd.logps[t]);
      pen = add(pen, fd.steps[t].penalty);
    }
    double n = static_cast<double>(fd.logps.size());
    Var loss = add(cmul(nll, -1.0 / n), cmul(pen, 1.0 / n));
    g.backward(loss);
    return loss.scalar();
  };
  FdReport rep = finite_diff_check(loss_fn, store, 1e-5, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("greedy decoding is deterministic and bounded") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 31);
  Example ex = tiny_example();
  GreedyTrace tr1, tr2;
  std::vector<std::string> a = greedy_decode(ex, v, f, store, d, 12, &tr1);
  std::vector<std::string> b = greedy_decode(ex, v, f, store, d, 12, &tr2);
  CHECK(a == b);
  CHECK(tr1.gate == tr2.gate);
  CHECK(tr1.top_attention == tr2.top_attention);
  CHECK(a.size() <= 12);
  CHECK(a.size() == tr1.gate.size());
  std::vector<std::string> c = greedy_decode(ex, v, f, store, d, 4);
  CHECK(c.size() <= 4);
  for (double gv : tr1.gate) {
    CHECK(gv >= 0.0);
    CHECK(gv <= 1.0);
  }
  CHECK_THROWS_AS(greedy_decode(ex, v, f, store, d, 0), ArgError);
}

TEST_CASE("unknown-token outputs take the most-attended source word") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 13);
  // Force the vocabulary argmax onto the unknown token and close the gate so
  // the mixture argmax is the unknown token at every step.
  store.value("gen.out.b").mat()(0, Vocabulary::kUnk) = 50.0;
  store.value("gen.cg.b").mat()(0, 0) = -1000.0;
  Example ex = tiny_example();
  GreedyTrace tr;
  std::vector<std::string> out = greedy_decode(ex, v, f, store, d, 3, &tr);
  REQUIRE(out.size() == 3);
  for (size_t t = 0; t < out.size(); ++t) {
    CHECK(out[t] == ex.sentence[(size_t)tr.top_attention[t]]);
  }
}

TEST_CASE("sampling is reproducible and its log-probs replay exactly") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 19);
  Example ex = tiny_example();
  Rng r1(7), r2(7);
  Graph g1(store), g2(store);
  SampleResult s1 = sample_decode(g1, ex, v, f, d, r1, 8);
  SampleResult s2 = sample_decode(g2, ex, v, f, d, r2, 8);
  CHECK(s1.ids == s2.ids);
  CHECK(s1.tokens == s2.tokens);
  REQUIRE(s1.ids.size() == s1.logps.size());
  CHECK(s1.tokens.size() <= 8);

  // Teacher-forcing the sampled ids reproduces the same stepwise
  // probabilities, so the returned log-probs are exactly the log of the
  // product of the chosen step probabilities.
  ExtendedVocab ext = build_extended(ex.sentence, v);
  Graph g3(store);
  ForcedDecode fd = force_decode(g3, ex, v, f, ext, d, s1.ids);
  REQUIRE(fd.logps.size() == s1.logps.size());
  double total_sample = 0.0, total_forced = 0.0;
  for (size_t t = 0; t < fd.logps.size(); ++t) {
    CHECK(std::abs(s1.logps[t].scalar() - fd.logps[t].scalar()) <= 1e-12);
    total_sample += s1.logps[t].scalar();
    total_forced += fd.logps[t].scalar();
    CHECK(s1.logps[t].scalar() <= 1e-12);
  }
  CHECK(std::abs(total_sample - total_forced) <= 1e-9);
}

TEST_CASE("first-token sampling frequency matches the step distribution") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 23);
  Example ex;
  ex.sentence = {"the", "city", "qq"};
  ex.pos = {"DT", "NN", "O"};
  ex.ner = {"O", "O", "O"};
  ExtendedVocab ext = build_extended(ex.sentence, v);

  Graph g(store);
  EncoderOutput enc = encode(g, ex, v, f, d);
  DecoderState st = decoder_init(g, enc, d);
  auto stepped = decode_step(g, enc, st, Vocabulary::kStart, ext, d);
  Mat p = stepped.first.p_star.value();

  const int N = 10000;
  std::vector<int> counts(ext.extended_size(), 0);
  Rng rng(101);
  for (int i = 0; i < N; ++i) {
    Graph gs(store);
    SampleResult s = sample_decode(gs, ex, v, f, d, rng, 1);
    REQUIRE(s.ids.size() == 1);
    counts[(size_t)s.ids[0]] += 1;
  }
  double rare_p = 0.0;
  long rare_n = 0;
  for (int e = 0; e < ext.extended_size(); ++e) {
    double pe = p(0, e);
    double fe = counts[(size_t)e] / static_cast<double>(N);
    if (pe >= 0.005) {
      double sigma = std::sqrt(pe * (1.0 - pe) / N);
      CHECK(std::abs(fe - pe) <= 3.0 * sigma + 1e-9);
    } else {
      rare_p += pe;
      rare_n += counts[(size_t)e];
    }
  }
  double rare_f = rare_n / static_cast<double>(N);
  double rare_sigma = std::sqrt(std::max(rare_p * (1.0 - rare_p), 1e-12) / N);
  CHECK(std::abs(rare_f - rare_p) <= 3.0 * rare_sigma + 1e-9);
}

TEST_CASE("span selection respects validity and breaks ties low") {
  Mat u(1, 3);
  u << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  AnswerSpan sp = best_span(u, u, 3);
  CHECK(sp.start == 0);
  CHECK(sp.end == 0);
  CHECK(sp.log_prob == doctest::Approx(std::log(1.0 / 9)).epsilon(1e-12));

  Mat ps(1, 3), pe(1, 3);
  ps << 0.1, 0.8, 0.1;
  pe << 0.6, 0.2, 0.2;
  sp = best_span(ps, pe, 3);
  CHECK(sp.start == 1);
  CHECK(sp.end == 1);

  ps << 0.8, 0.1, 0.1;
  pe << 0.1, 0.15, 0.75;
  sp = best_span(ps, pe, 3);
  CHECK(sp.start == 0);
  CHECK(sp.end == 2);
  sp = best_span(ps, pe, 2);
  CHECK(sp.start == 0);
  CHECK(sp.end == 1);

  Mat one(1, 1);
  one << 1.0;
  sp = best_span(one, one, 8);
  CHECK(sp.start == 0);
  CHECK(sp.end == 0);
  CHECK(sp.log_prob == 0.0);

  CHECK_THROWS_AS(best_span(ps, pe, 0), ArgError);
  Mat shorter(1, 2);
  shorter << 0.5, 0.5;
  CHECK_THROWS_AS(best_span(ps, shorter, 3), ArgError);
}

TEST_CASE("pointer outputs are distributions and spans are valid") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = ptr_store(d, v, f, 41);
  Example ex = tiny_example();
  Graph g(store);
  PointerOutput po = pointer_forward(g, ex, v, f, d);
  CHECK(po.p_start.rows() == 1);
  CHECK(po.p_start.cols() == 7);
  CHECK(std::abs(row_sum(po.p_start.value()) - 1.0) <= 1e-9);
  CHECK(std::abs(row_sum(po.p_end.value()) - 1.0) <= 1e-9);
  CHECK(po.p_start.value().minCoeff() >= 0.0);

  AnswerSpan sp = point_answer(ex, v, f, store, d);
  CHECK(sp.start >= 0);
  CHECK(sp.start <= sp.end);
  CHECK(sp.end < 7);
  CHECK(sp.end - sp.start < d.max_span);

  Example one;
  one.sentence = {"the"};
  one.pos = {"DT"};
  one.ner = {"O"};
  AnswerSpan s1 = point_answer(one, v, f, store, d);
  CHECK(s1.start == 0);
  CHECK(s1.end == 0);
  CHECK(s1.log_prob == 0.0);
}

TEST_CASE("pointer loss gradients match finite differences") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  d.ptr_hidden = 3;
  d.ptr_att_dim = 3;
  d.word_dim = 4;
  d.feat_dim = 2;
  ParamStore store = ptr_store(d, v, f, 53);
  Example ex;
  ex.sentence = {"the", "city", "was", "founded"};
  ex.pos = {"DT", "NN", "VBD", "VBD"};
  ex.ner = {"O", "O", "O", "O"};
  Span gold{1, 2};
  auto loss_fn = [&](ParamStore& st) -> double {
    st.zero_grads();
    Graph g(st);
    PointerOutput po = pointer_forward(g, ex, v, f, d);
    Var loss = pointer_loss(g, po, gold);
    g.backward(loss);
    return loss.scalar();
  };
  FdReport rep = finite_diff_check(loss_fn, store, 1e-5, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-4);

  Graph g(store);
  PointerOutput po = pointer_forward(g, ex, v, f, d);
  CHECK_THROWS_AS(pointer_loss(g, po, Span{2, 5}), ArgError);
}

TEST_CASE("parameter initialization is seed-deterministic") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore a = gen_store(d, v, f, 9);
  ParamStore b = gen_store(d, v, f, 9);
  CHECK(bitwise_equal(a, b));
  ParamStore c = gen_store(d, v, f, 10);
  CHECK(!bitwise_equal(a, c));

  ParamStore pa = ptr_store(d, v, f, 9);
  ParamStore pb = ptr_store(d, v, f, 9);
  CHECK(bitwise_equal(pa, pb));
}

TEST_CASE("decode step rejects out-of-range previous tokens") {
  Vocabulary v = tiny_vocab();
  FeatureVocab f = tiny_fvocab();
  ModelDims d = tiny_dims();
  ParamStore store = gen_store(d, v, f, 2);
  Example ex = tiny_example();
  ExtendedVocab ext = build_extended(ex.sentence, v);
  Graph g(store);
  EncoderOutput enc = encode(g, ex, v, f, d);
  DecoderState st = decoder_init(g, enc, d);
  CHECK_THROWS_AS(decode_step(g, enc, st, ext.extended_size(), ext, d),
                  ArgError);
  CHECK_THROWS_AS(decode_step(g, enc, st, -1, ext, d), ArgError);
}
