#include "qgrl/qgmodel.hpp"

#include <cmath>
#include <limits>

namespace qgrl {

namespace {

constexpr double kLogFloor = 1e-12;

void check_sentence(const Example& ex, const std::string& where) {
  if (ex.sentence.empty()) throw ArgError(where + ": empty sentence");
  if (ex.pos.size() != ex.sentence.size() ||
      ex.ner.size() != ex.sentence.size())
    throw ArgError(where + ": tag rows do not match sentence length");
}

// One encoder input row: word + POS + NER + case + answer-position embeddings.
Var gen_input_row(Graph& g, const Example& ex, const Vocabulary& vocab,
                  const FeatureVocab& fvocab, const Tokens& ans_tags,
                  size_t t) {
  int wid = vocab.encode(ex.sentence[t]);
  int pid = fvocab.pos_id(ex.pos[t]);
  int nid = fvocab.ner_id(ex.ner[t]);
  int cid = fvocab.case_id(case_tag_of(ex.sentence[t]));
  int aid = fvocab.answer_id(ans_tags[t]);
  return concat_cols({row(g.param("gen.emb.word"), wid),
                      row(g.param("gen.emb.pos"), pid),
                      row(g.param("gen.emb.ner"), nid),
                      row(g.param("gen.emb.case"), cid),
                      row(g.param("gen.emb.ans"), aid)});
}

Var ptr_input_row(Graph& g, const Example& ex, const Vocabulary& vocab,
                  const FeatureVocab& fvocab, size_t t) {
  int wid = vocab.encode(ex.sentence[t]);
  int pid = fvocab.pos_id(ex.pos[t]);
  int nid = fvocab.ner_id(ex.ner[t]);
  int cid = fvocab.case_id(case_tag_of(ex.sentence[t]));
  return concat_cols({row(g.param("ptr.emb.word"), wid),
                      row(g.param("ptr.emb.pos"), pid),
                      row(g.param("ptr.emb.ner"), nid),
                      row(g.param("ptr.emb.case"), cid)});
}

// One bidirectional layer over per-position inputs. Returns the combined
// [forward; backward] row per position plus the final state of each pass.
struct BiLayer {
  std::vector<Var> h;  // per position, (1, 2H)
  Var fw_final;        // (1, H)
  Var bw_final;        // (1, H)
};

BiLayer bi_lstm_layer(Graph& g, const std::vector<Var>& inputs,
                      Eigen::Index hidden, const std::string& prefix) {
  const size_t T = inputs.size();
  std::vector<Var> hf(T), hb(T);
  LstmState st{g.zeros(1, hidden), g.zeros(1, hidden)};
  for (size_t t = 0; t < T; ++t) {
    st = lstm_step(g, inputs[t], st, prefix + ".fw");
    hf[t] = st.h;
  }
  Var fw_final = st.h;
  st = {g.zeros(1, hidden), g.zeros(1, hidden)};
  for (size_t t = T; t-- > 0;) {
    st = lstm_step(g, inputs[t], st, prefix + ".bw");
    hb[t] = st.h;
  }
  Var bw_final = st.h;
  BiLayer out;
  out.h.resize(T);
  for (size_t t = 0; t < T; ++t) out.h[t] = concat_cols({hf[t], hb[t]});
  out.fw_final = fw_final;
  out.bw_final = bw_final;
  return out;
}

// Attention-style scoring head over encoder rows; returns a (1, T)
// distribution.
Var pointer_head(Graph& g, Var h, const std::string& prefix) {
  Var pre = add(matmul(h, g.param(prefix + ".w")), g.param(prefix + ".b"));
  Var e = matmul(vtanh(pre), g.param(prefix + ".v"));
  return softmax_rows(transpose(e));
}

int feed_id(int token, int base_size) {
  if (token < 0) throw ArgError("decode: negative token id");
  return token < base_size ? token : Vocabulary::kUnk;
}

int argmax_row(const Mat& m) {
  int best = 0;
  double bv = m(0, 0);
  for (Eigen::Index i = 1; i < m.cols(); ++i)
    if (m(0, i) > bv) {
      bv = m(0, i);
      best = static_cast<int>(i);
    }
  return best;
}

std::string surface_token(int chosen, const StepDistribution& sd,
                          const Example& ex, const ExtendedVocab& ext,
                          const Vocabulary& vocab) {
  if (chosen == Vocabulary::kUnk) {
    int pos = argmax_row(sd.attention.value());
    return ex.sentence[static_cast<size_t>(pos)];
  }
  return ext.slot_token(chosen, vocab);
}

void create_lstm(ParamStore& store, const std::string& prefix,
                 Eigen::Index in_dim, Eigen::Index hidden, Rng& rng) {
  store.create(prefix + ".wx", {in_dim, 4 * hidden}, Init::Uniform, &rng);
  store.create(prefix + ".wh", {hidden, 4 * hidden}, Init::Uniform, &rng);
  store.create(prefix + ".b", {Eigen::Index(1), 4 * hidden}, Init::Zero);
}

}  // namespace

std::string ExtendedVocab::slot_token(int slot, const Vocabulary& vocab) const {
  if (slot < 0 || slot >= extended_size())
    throw ArgError("slot_token: id " + std::to_string(slot) +
                   " outside extended vocabulary of size " +
                   std::to_string(extended_size()));
  if (slot < base_size) return vocab.decode(slot);
  return oov_words[static_cast<size_t>(slot - base_size)];
}

int ExtendedVocab::target_id(const std::string& token,
                             const Vocabulary& vocab) const {
  if (vocab.contains(token)) return vocab.encode(token);
  for (size_t i = 0; i < oov_words.size(); ++i)
    if (oov_words[i] == token) return base_size + static_cast<int>(i);
  return Vocabulary::kUnk;
}

ExtendedVocab build_extended(const Tokens& sentence, const Vocabulary& vocab) {
  ExtendedVocab ext;
  ext.base_size = vocab.size();
  ext.source_slots.reserve(sentence.size());
  for (const std::string& tok : sentence) {
    if (vocab.contains(tok)) {
      ext.source_slots.push_back(vocab.encode(tok));
      continue;
    }
    int slot = -1;
    for (size_t i = 0; i < ext.oov_words.size(); ++i)
      if (ext.oov_words[i] == tok) {
        slot = ext.base_size + static_cast<int>(i);
        break;
      }
    if (slot < 0) {
      slot = ext.extended_size();
      ext.oov_words.push_back(tok);
    }
    ext.source_slots.push_back(slot);
  }
  return ext;
}

void init_generator(ParamStore& store, const ModelDims& dims, int vocab_size,
                    const FeatureVocab& fvocab, Rng& rng) {
  const Eigen::Index W = dims.word_dim, F = dims.feat_dim;
  const Eigen::Index H = dims.enc_hidden, D = dims.dec_hidden;
  const Eigen::Index A = dims.att_dim, E = dims.enc_out_dim();
  store.create("gen.emb.word", {Eigen::Index(vocab_size), W}, Init::Uniform,
               &rng);
  store.create("gen.emb.pos", {Eigen::Index(fvocab.pos_tags().size()), F},
               Init::Uniform, &rng);
  store.create("gen.emb.ner", {Eigen::Index(fvocab.ner_tags().size()), F},
               Init::Uniform, &rng);
  store.create("gen.emb.case", {Eigen::Index(fvocab.case_tags().size()), F},
               Init::Uniform, &rng);
  store.create("gen.emb.ans", {Eigen::Index(fvocab.answer_tags().size()), F},
               Init::Uniform, &rng);
  Eigen::Index in_dim = dims.enc_input_dim();
  for (int l = 0; l < dims.enc_layers; ++l) {
    std::string pre = "gen.enc.l" + std::to_string(l);
    create_lstm(store, pre + ".fw", in_dim, H, rng);
    create_lstm(store, pre + ".bw", in_dim, H, rng);
    in_dim = E;
  }
  store.create("gen.dec.init.h.w", {E, D}, Init::Uniform, &rng);
  store.create("gen.dec.init.h.b", {Eigen::Index(1), D}, Init::Zero);
  store.create("gen.dec.init.c.w", {E, D}, Init::Uniform, &rng);
  store.create("gen.dec.init.c.b", {Eigen::Index(1), D}, Init::Zero);
  create_lstm(store, "gen.dec", W, D, rng);
  store.create("gen.att.w_enc", {E, A}, Init::Uniform, &rng);
  store.create("gen.att.w_dec", {D, A}, Init::Uniform, &rng);
  store.create("gen.att.w_cov", {Eigen::Index(1), A}, Init::Uniform, &rng);
  store.create("gen.att.b", {Eigen::Index(1), A}, Init::Zero);
  store.create("gen.att.v", {A, Eigen::Index(1)}, Init::Uniform, &rng);
  store.create("gen.cg.w_ctx", {E, Eigen::Index(1)}, Init::Uniform, &rng);
  store.create("gen.cg.w_s", {D, Eigen::Index(1)}, Init::Uniform, &rng);
  store.create("gen.cg.w_x", {W, Eigen::Index(1)}, Init::Uniform, &rng);
  store.create("gen.cg.b", {Eigen::Index(1), Eigen::Index(1)}, Init::Zero);
  store.create("gen.out.w", {D + E, Eigen::Index(vocab_size)}, Init::Uniform,
               &rng);
  store.create("gen.out.b", {Eigen::Index(1), Eigen::Index(vocab_size)},
               Init::Zero);
}

void init_pointer(ParamStore& store, const ModelDims& dims, int vocab_size,
                  const FeatureVocab& fvocab, Rng& rng) {
  const Eigen::Index W = dims.word_dim, F = dims.feat_dim;
  const Eigen::Index H = dims.ptr_hidden, A = dims.ptr_att_dim;
  const Eigen::Index E = dims.ptr_out_dim();
  store.create("ptr.emb.word", {Eigen::Index(vocab_size), W}, Init::Uniform,
               &rng);
  store.create("ptr.emb.pos", {Eigen::Index(fvocab.pos_tags().size()), F},
               Init::Uniform, &rng);
  store.create("ptr.emb.ner", {Eigen::Index(fvocab.ner_tags().size()), F},
               Init::Uniform, &rng);
  store.create("ptr.emb.case", {Eigen::Index(fvocab.case_tags().size()), F},
               Init::Uniform, &rng);
  create_lstm(store, "ptr.enc.fw", dims.ptr_input_dim(), H, rng);
  create_lstm(store, "ptr.enc.bw", dims.ptr_input_dim(), H, rng);
  for (const char* head : {"ptr.start", "ptr.end"}) {
    store.create(std::string(head) + ".w", {E, A}, Init::Uniform, &rng);
    store.create(std::string(head) + ".b", {Eigen::Index(1), A}, Init::Zero);
    store.create(std::string(head) + ".v", {A, Eigen::Index(1)}, Init::Uniform,
                 &rng);
  }
}

EncoderOutput encode(Graph& g, const Example& ex, const Vocabulary& vocab,
                     const FeatureVocab& fvocab, const ModelDims& dims) {
  check_sentence(ex, "encode");
  const size_t T = ex.sentence.size();
  Tokens ans_tags = answer_position_tags(static_cast<int>(T), ex.answer_span);
  std::vector<Var> layer_in(T);
  for (size_t t = 0; t < T; ++t)
    layer_in[t] = gen_input_row(g, ex, vocab, fvocab, ans_tags, t);
  Var s0;
  for (int l = 0; l < dims.enc_layers; ++l) {
    BiLayer bl = bi_lstm_layer(g, layer_in, dims.enc_hidden,
                               "gen.enc.l" + std::to_string(l));
    layer_in = bl.h;
    if (l == dims.enc_layers - 1)
      s0 = concat_cols({bl.fw_final, bl.bw_final});
  }
  return {stack_rows(layer_in), s0};
}

DecoderState decoder_init(Graph& g, const EncoderOutput& enc,
                          const ModelDims& dims) {
  (void)dims;
  DecoderState st;
  st.s = vtanh(affine(g, enc.s0, "gen.dec.init.h.w", "gen.dec.init.h.b"));
  st.c = vtanh(affine(g, enc.s0, "gen.dec.init.c.w", "gen.dec.init.c.b"));
  st.wcv = g.zeros(1, enc.h.rows());
  return st;
}

std::pair<Var, Var> attend(Graph& g, const EncoderOutput& enc,
                           const DecoderState& state, const ModelDims& dims,
                           bool use_coverage) {
  (void)dims;
  Var pre = add(matmul(enc.h, g.param("gen.att.w_enc")),
                matmul(state.s, g.param("gen.att.w_dec")));
  if (use_coverage)
    pre = add(pre, matmul(transpose(state.wcv), g.param("gen.att.w_cov")));
  pre = add(pre, g.param("gen.att.b"));
  Var e = matmul(vtanh(pre), g.param("gen.att.v"));
  Var a = softmax_rows(transpose(e));
  return {a, matmul(a, enc.h)};
}

std::pair<StepDistribution, DecoderState> decode_step(
    Graph& g, const EncoderOutput& enc, const DecoderState& state,
    int prev_token, const ExtendedVocab& ext, const ModelDims& dims) {
  if (prev_token >= ext.extended_size())
    throw ArgError("decode_step: token id " + std::to_string(prev_token) +
                   " outside extended vocabulary of size " +
                   std::to_string(ext.extended_size()));
  Var x = row(g.param("gen.emb.word"), feed_id(prev_token, ext.base_size));
  LstmState ls = lstm_step(g, x, {state.s, state.c}, "gen.dec");
  DecoderState mid{ls.h, ls.c, state.wcv, state.emitted};
  auto [a, ctx] = attend(g, enc, mid, dims, true);
  Var pv = softmax_rows(
      affine(g, concat_cols({ls.h, ctx}), "gen.out.w", "gen.out.b"));
  Var z = add(add(matmul(ctx, g.param("gen.cg.w_ctx")),
                  matmul(ls.h, g.param("gen.cg.w_s"))),
              add(matmul(x, g.param("gen.cg.w_x")), g.param("gen.cg.b")));
  Var gate = sigmoid(z);
  Var pstar = copy_mixture(pv, a, gate, ext.source_slots, ext.extended_size());
  StepDistribution sd{a, gate, pv, pstar, ctx, sum(emin(a, state.wcv))};
  DecoderState next{ls.h, ls.c, add(state.wcv, a), state.emitted};
  return {sd, next};
}

ForcedDecode force_decode(Graph& g, const Example& ex, const Vocabulary& vocab,
                          const FeatureVocab& fvocab, const ExtendedVocab& ext,
                          const ModelDims& dims,
                          const std::vector<int>& target_ids) {
  if (target_ids.empty()) throw ArgError("force_decode: empty target");
  EncoderOutput enc = encode(g, ex, vocab, fvocab, dims);
  DecoderState st = decoder_init(g, enc, dims);
  ForcedDecode out;
  int prev = Vocabulary::kStart;
  for (int target : target_ids) {
    if (target < 0 || target >= ext.extended_size())
      throw ArgError("force_decode: target id " + std::to_string(target) +
                     " outside extended vocabulary of size " +
                     std::to_string(ext.extended_size()));
    auto [sd, ns] = decode_step(g, enc, st, prev, ext, dims);
    out.logps.push_back(log_floor(pick(sd.p_star, target), kLogFloor));
    out.steps.push_back(sd);
    st = ns;
    st.emitted.push_back(target);
    prev = target;
  }
  return out;
}

std::vector<std::string> greedy_decode(const Example& ex,
                                       const Vocabulary& vocab,
                                       const FeatureVocab& fvocab,
                                       const ParamStore& store,
                                       const ModelDims& dims, int max_len,
                                       GreedyTrace* trace) {
  if (max_len < 1) throw ArgError("greedy_decode: max_len must be >= 1");
  // Forward-only graph: no backward pass, so the store is never mutated.
  Graph g(const_cast<ParamStore&>(store));
  ExtendedVocab ext = build_extended(ex.sentence, vocab);
  EncoderOutput enc = encode(g, ex, vocab, fvocab, dims);
  DecoderState st = decoder_init(g, enc, dims);
  std::vector<std::string> tokens;
  int prev = Vocabulary::kStart;
  for (int t = 0; t < max_len; ++t) {
    auto [sd, ns] = decode_step(g, enc, st, prev, ext, dims);
    int chosen = argmax_row(sd.p_star.value());
    if (chosen == Vocabulary::kEnd) break;
    if (trace) {
      trace->gate.push_back(sd.p_cg.scalar());
      trace->top_attention.push_back(argmax_row(sd.attention.value()));
    }
    tokens.push_back(surface_token(chosen, sd, ex, ext, vocab));
    st = ns;
    st.emitted.push_back(chosen);
    prev = chosen;
  }
  return tokens;
}

SampleResult sample_decode(Graph& g, const Example& ex,
                           const Vocabulary& vocab,
                           const FeatureVocab& fvocab, const ModelDims& dims,
                           Rng& rng, int max_len) {
  if (max_len < 1) throw ArgError("sample_decode: max_len must be >= 1");
  ExtendedVocab ext = build_extended(ex.sentence, vocab);
  EncoderOutput enc = encode(g, ex, vocab, fvocab, dims);
  DecoderState st = decoder_init(g, enc, dims);
  SampleResult out;
  int prev = Vocabulary::kStart;
  for (int t = 0; t < max_len; ++t) {
    auto [sd, ns] = decode_step(g, enc, st, prev, ext, dims);
    const Mat& ps = sd.p_star.value();
    double u = rng.next_double();
    int chosen = -1;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ps.cols(); ++i) {
      acc += ps(0, i);
      if (u < acc) {
        chosen = static_cast<int>(i);
        break;
      }
    }
    if (chosen < 0) {
      // Rounding left the cumulative sum a hair below u: take the last
      // positive-probability entry.
      for (Eigen::Index i = ps.cols(); i-- > 0;)
        if (ps(0, i) > 0.0) {
          chosen = static_cast<int>(i);
          break;
        }
      if (chosen < 0) chosen = static_cast<int>(ps.cols()) - 1;
    }
    out.ids.push_back(chosen);
    out.logps.push_back(log_floor(pick(sd.p_star, chosen), kLogFloor));
    if (chosen == Vocabulary::kEnd) break;
    out.tokens.push_back(surface_token(chosen, sd, ex, ext, vocab));
    st = ns;
    st.emitted.push_back(chosen);
    prev = chosen;
  }
  return out;
}

PointerOutput pointer_forward(Graph& g, const Example& ex,
                              const Vocabulary& vocab,
                              const FeatureVocab& fvocab,
                              const ModelDims& dims) {
  check_sentence(ex, "pointer_forward");
  const size_t T = ex.sentence.size();
  std::vector<Var> inputs(T);
  for (size_t t = 0; t < T; ++t)
    inputs[t] = ptr_input_row(g, ex, vocab, fvocab, t);
  BiLayer bl = bi_lstm_layer(g, inputs, dims.ptr_hidden, "ptr.enc");
  Var h = stack_rows(bl.h);
  return {pointer_head(g, h, "ptr.start"), pointer_head(g, h, "ptr.end")};
}

AnswerSpan best_span(const Mat& p_start, const Mat& p_end, int max_span) {
  if (max_span < 1) throw ArgError("best_span: max_span must be >= 1");
  if (p_start.rows() != 1 || p_end.rows() != 1 ||
      p_start.cols() != p_end.cols() || p_start.cols() < 1)
    throw ArgError("best_span: start/end rows must be equal-length");
  const Eigen::Index T = p_start.cols();
  AnswerSpan best{0, 0, -std::numeric_limits<double>::infinity()};
  for (Eigen::Index s = 0; s < T; ++s) {
    Eigen::Index hi = std::min(T - 1, s + max_span - 1);
    for (Eigen::Index e = s; e <= hi; ++e) {
      double lp = std::log(p_start(0, s)) + std::log(p_end(0, e));
      if (lp > best.log_prob) {
        best.start = static_cast<int>(s);
        best.end = static_cast<int>(e);
        best.log_prob = lp;
      }
    }
  }
  return best;
}

AnswerSpan point_answer(const Example& ex, const Vocabulary& vocab,
                        const FeatureVocab& fvocab, const ParamStore& store,
                        const ModelDims& dims) {
  Graph g(const_cast<ParamStore&>(store));
  PointerOutput po = pointer_forward(g, ex, vocab, fvocab, dims);
  return best_span(po.p_start.value(), po.p_end.value(), dims.max_span);
}

Var pointer_loss(Graph& g, const PointerOutput& po, const Span& gold) {
  if (gold.start < 0 || gold.end < gold.start ||
      gold.end >= po.p_start.cols())
    throw ArgError("pointer_loss: span [" + std::to_string(gold.start) + "," +
                   std::to_string(gold.end) + "] outside sentence of length " +
                   std::to_string(po.p_start.cols()));
  Var lp = add(log_floor(pick(po.p_start, gold.start), kLogFloor),
               log_floor(pick(po.p_end, gold.end), kLogFloor));
  return cmul(lp, -1.0);
}

}  // namespace qgrl
