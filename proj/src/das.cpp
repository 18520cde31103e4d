#include "qgrl/das.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qgrl/rng.hpp"

namespace qgrl {

DasModel DasModel::init(int vocab_size, const DasDims& dims, uint64_t seed) {
  if (vocab_size < 1) throw ArgError("das vocabulary must be nonempty");
  if (dims.dim < 1 || dims.hidden < 1 || dims.compare < 1)
    throw ArgError("das dimensions must be positive");
  DasModel m;
  m.dims = dims;
  m.vocab_size = vocab_size;
  Rng rng(seed);
  auto& s = m.store;
  s.create("das.emb", {vocab_size, dims.dim}, Init::Uniform, &rng);
  for (const char* net : {"das.n1", "das.n2"}) {
    std::string p(net);
    s.create(p + ".w1", {2 * dims.dim, dims.hidden}, Init::Uniform, &rng);
    s.create(p + ".b1", {1, dims.hidden}, Init::Zero, &rng);
    s.create(p + ".w2", {dims.hidden, dims.compare}, Init::Uniform, &rng);
    s.create(p + ".b2", {1, dims.compare}, Init::Zero, &rng);
  }
  s.create("das.out.w", {2 * dims.compare, 1}, Init::Uniform, &rng);
  s.create("das.out.b", {1, 1}, Init::Zero, &rng);
  return m;
}

Var das_embed(Graph& g, const std::vector<int>& ids) {
  if (ids.empty()) throw ArgError("empty token sequence");
  Var table = g.param("das.emb");
  std::vector<Var> rows;
  rows.reserve(ids.size());
  for (int id : ids) rows.push_back(row(table, id));
  return stack_rows(rows);
}

CrossAttention cross_attend(Graph& g, Var e_gen, Var e_gold) {
  if (e_gen.rows() < 1 || e_gold.rows() < 1)
    throw ArgError("empty question in cross attention");
  (void)g;
  Var scores = matmul(e_gen, transpose(e_gold));  // |gen| x |gold|
  CrossAttention out;
  out.gen_attn = softmax_rows(scores);
  out.gold_attn = softmax_rows(transpose(scores));
  out.gen_ctx = matmul(out.gen_attn, e_gold);
  out.gold_ctx = matmul(out.gold_attn, e_gen);
  return out;
}

namespace {

// Token-plus-context comparison net, then sum over positions -> 1 x compare.
Var compare_side(Graph& g, Var emb, Var ctx, const std::string& prefix) {
  Var h = vtanh(affine(g, concat_cols({emb, ctx}), prefix + ".w1", prefix + ".b1"));
  Var v = affine(g, h, prefix + ".w2", prefix + ".b2");
  return colwise_sum(v);
}

}  // namespace

Var das_logit(const DasModel& model, Graph& g, const std::vector<int>& gen_ids,
              const std::vector<int>& gold_ids) {
  for (int id : gen_ids)
    if (id < 0 || id >= model.vocab_size)
      throw ArgError("token id out of das vocabulary: " + std::to_string(id));
  for (int id : gold_ids)
    if (id < 0 || id >= model.vocab_size)
      throw ArgError("token id out of das vocabulary: " + std::to_string(id));
  Var e_gen = das_embed(g, gen_ids);
  Var e_gold = das_embed(g, gold_ids);
  CrossAttention att = cross_attend(g, e_gen, e_gold);
  Var u1 = compare_side(g, e_gen, att.gen_ctx, "das.n1");
  Var u2 = compare_side(g, e_gold, att.gold_ctx, "das.n2");
  return affine(g, concat_cols({u1, u2}), "das.out.w", "das.out.b");
}

double das_score(const DasModel& model, const std::vector<int>& gen_ids,
                 const std::vector<int>& gold_ids) {
  // const_cast is sound: a forward-only graph never writes the store.
  Graph g(const_cast<ParamStore&>(model.store));
  return sigmoid(das_logit(model, g, gen_ids, gold_ids)).scalar();
}

Var das_bce_loss(const DasModel& model, Graph& g,
                 const std::vector<DasPair>& batch) {
  if (batch.empty()) throw ArgError("empty das batch");
  Var total = g.scalar(0.0);
  for (const DasPair& p : batch) {
    if (p.label != 0 && p.label != 1)
      throw ArgError("das pair label must be 0 or 1");
    Var z = das_logit(model, g, p.a, p.b);
    // softplus(z) - y*z = -log sigmoid(z) for y=1, -log(1-sigmoid(z)) for y=0
    Var loss = p.label == 1 ? sub(softplus(z), z) : softplus(z);
    total = add(total, loss);
  }
  return cmul(total, 1.0 / static_cast<double>(batch.size()));
}

DasReport train_das(DasModel& model, const std::vector<DasPair>& pairs,
                    const DasTrainConfig& cfg) {
  if (pairs.empty()) throw ConfigError("no das training pairs");
  bool has_pos = false, has_neg = false;
  for (const DasPair& p : pairs) (p.label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw ConfigError("das training needs both positive and negative pairs");
  if (cfg.heldout_fraction < 0.0 || cfg.heldout_fraction >= 1.0)
    throw ConfigError("heldout fraction must be in [0, 1)");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");

  std::vector<DasPair> train, heldout;
  long stride = cfg.heldout_fraction > 0.0
                    ? std::max(2L, std::lround(1.0 / cfg.heldout_fraction))
                    : 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (stride > 0 && static_cast<long>(i) % stride == stride - 1)
      heldout.push_back(pairs[i]);
    else
      train.push_back(pairs[i]);
  }
  if (train.empty()) throw ConfigError("holdout left no das training pairs");

  Rng rng(cfg.seed);
  DasReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(train.begin(), train.end());
    double sum_loss = 0.0;
    for (const DasPair& p : train) {
      Graph g(model.store);
      Var loss = das_bce_loss(model, g, {p});
      sum_loss += loss.scalar();
      g.backward(loss);
      adam_step(model.store, cfg.lr);
    }
    report.epoch_loss.push_back(sum_loss / static_cast<double>(train.size()));
  }

  {
    Graph g(model.store);
    report.final_loss = das_bce_loss(model, g, train).scalar();
  }
  const std::vector<DasPair>& eval = heldout.empty() ? train : heldout;
  long correct = 0;
  for (const DasPair& p : eval) {
    double s = das_score(model, p.a, p.b);
    correct += ((s > 0.5) == (p.label == 1)) ? 1 : 0;
  }
  report.heldout_accuracy =
      static_cast<double>(correct) / static_cast<double>(eval.size());
  return report;
}

namespace {

// Rotate the question body (question mark pinned at the end when present):
// "in what year was X founded ?" -> "was X founded in what year ?"
Tokens rotate_question(const Tokens& q, long k) {
  Tokens body(q);
  bool qmark = !body.empty() && body.back() == "?";
  if (qmark) body.pop_back();
  if (body.size() >= 2) {
    k = 1 + k % static_cast<long>(body.size() - 1);
    std::rotate(body.begin(), body.begin() + k, body.end());
  }
  if (qmark) body.push_back("?");
  return body;
}

}  // namespace

std::vector<DasPair> make_pair_dataset(const std::vector<Example>& corpus,
                                       const Vocabulary& vocab, uint64_t seed) {
  std::vector<const Tokens*> all_questions;
  std::vector<size_t> question_owner;
  std::vector<std::set<std::string>> question_keys(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i)
    for (const Tokens& q : corpus[i].questions) {
      all_questions.push_back(&q);
      question_owner.push_back(i);
      question_keys[i].insert(join(q));
    }
  if (all_questions.empty()) throw ArgError("corpus has no questions");
  // Examples that share a gold question verbatim are paraphrase twins
  // (templated corpora produce them); pairing them as negatives would
  // contradict the positive pairs drawn inside each of them.
  auto twins = [&question_keys](size_t a, size_t b) {
    for (const std::string& k : question_keys[a])
      if (question_keys[b].count(k)) return true;
    return false;
  };

  Rng rng(seed);
  std::vector<DasPair> out;
  auto enc = [&vocab](const Tokens& t) { return encode_tokens(vocab, t); };

  for (const Example& ex : corpus) {
    if (ex.questions.size() >= 2)
      out.push_back({enc(ex.questions[0]), enc(ex.questions[1]), 1});
    const Tokens& q = ex.questions[static_cast<size_t>(
        rng.next_int(static_cast<long>(ex.questions.size())))];
    if (q.size() >= 3)
      out.push_back({enc(q), enc(rotate_question(q, rng.next_int(64))), 1});
  }
  if (out.empty()) throw ArgError("corpus yields no positive pairs");

  size_t positives = out.size();
  size_t guard = 0;
  while (out.size() < 2 * positives && guard < 100 * positives) {
    ++guard;
    size_t a = static_cast<size_t>(
        rng.next_int(static_cast<long>(all_questions.size())));
    size_t b = static_cast<size_t>(
        rng.next_int(static_cast<long>(all_questions.size())));
    if (question_owner[a] == question_owner[b]) continue;
    if (twins(question_owner[a], question_owner[b])) continue;
    out.push_back({enc(*all_questions[a]), enc(*all_questions[b]), 0});
  }
  if (out.size() == positives)
    throw ArgError("corpus yields no negative pairs");
  return out;
}

}  // namespace qgrl
