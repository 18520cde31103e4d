#include "qgrl/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <utility>

#include <json.hpp>

#include "qgrl/corpus.hpp"
#include "qgrl/param_store.hpp"

namespace qgrl {

namespace {

using nlohmann::json;

// Forward-only evaluation builds graphs over a frozen store; nothing calls
// backward, so the store is never written through this reference.
ParamStore& thaw(const ParamStore& store) {
  return const_cast<ParamStore&>(store);
}

}  // namespace

std::string reward_mode_name(RewardMode m) {
  return m == RewardMode::Terminal ? "terminal" : "incremental";
}

RewardMode reward_mode_from_name(const std::string& name) {
  if (name == "terminal") return RewardMode::Terminal;
  if (name == "incremental") return RewardMode::Incremental;
  throw ConfigError("unknown reward mode '" + name +
                    "'; expected terminal or incremental");
}

std::string baseline_mode_name(BaselineMode m) {
  return m == BaselineMode::GreedySelfCritical ? "greedy_self_critical"
                                               : "none";
}

BaselineMode baseline_mode_from_name(const std::string& name) {
  if (name == "greedy_self_critical") return BaselineMode::GreedySelfCritical;
  if (name == "none") return BaselineMode::None;
  throw ConfigError("unknown baseline mode '" + name +
                    "'; expected greedy_self_critical or none");
}

void TrainConfig::validate() const {
  auto positive = [](double x, const char* field) {
    if (!(x > 0.0)) throw ConfigError(std::string(field) + " must be > 0");
  };
  auto nonneg = [](double x, const char* field) {
    if (!(x >= 0.0)) throw ConfigError(std::string(field) + " must be >= 0");
  };
  auto dim_pos = [](int x, const char* field) {
    if (x < 1) throw ConfigError(std::string(field) + " must be >= 1");
  };
  nonneg(lambda_c, "lambda_c");
  nonneg(alpha, "alpha");
  nonneg(beta, "beta");
  if (alpha + beta <= 0.0)
    throw ConfigError("alpha + beta must be > 0");
  positive(lr, "lr");
  positive(rl_lr, "rl_lr");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (pointer_epochs < 0) throw ConfigError("pointer_epochs must be >= 0");
  if (samples_per_step < 1)
    throw ConfigError("samples_per_step must be >= 1");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0))
    throw ConfigError("heldout_fraction must be in [0, 1)");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (vocab_cap < 4) throw ConfigError("vocab_cap must be >= 4");
  dim_pos(dims.word_dim, "word_dim");
  dim_pos(dims.feat_dim, "feat_dim");
  dim_pos(dims.enc_hidden, "enc_hidden");
  dim_pos(dims.enc_layers, "enc_layers");
  dim_pos(dims.dec_hidden, "dec_hidden");
  dim_pos(dims.att_dim, "att_dim");
  dim_pos(dims.ptr_hidden, "ptr_hidden");
  dim_pos(dims.ptr_att_dim, "ptr_att_dim");
  dim_pos(dims.max_span, "max_span");
  reward.validate();
}

std::string TrainConfig::to_json() const {
  json d;
  d["word_dim"] = dims.word_dim;
  d["feat_dim"] = dims.feat_dim;
  d["enc_hidden"] = dims.enc_hidden;
  d["enc_layers"] = dims.enc_layers;
  d["dec_hidden"] = dims.dec_hidden;
  d["att_dim"] = dims.att_dim;
  d["ptr_hidden"] = dims.ptr_hidden;
  d["ptr_att_dim"] = dims.ptr_att_dim;
  d["max_span"] = dims.max_span;
  json r;
  r["base"] = base_metric_name(reward.base);
  r["qss"] = reward.use_qss;
  r["anss"] = reward.use_anss;
  r["weights"] = reward.weights;
  r["max_n"] = reward.max_n;
  json j;
  j["dims"] = d;
  j["reward"] = r;
  j["lambda_c"] = lambda_c;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["lr"] = lr;
  j["rl_lr"] = rl_lr;
  j["epochs"] = epochs;
  j["pointer_epochs"] = pointer_epochs;
  j["seed"] = seed;
  j["reward_mode"] = reward_mode_name(reward_mode);
  j["baseline"] = baseline_mode_name(baseline);
  j["samples_per_step"] = samples_per_step;
  j["heldout_fraction"] = heldout_fraction;
  j["max_len"] = max_len;
  j["vocab_cap"] = vocab_cap;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig cfg;  // defaults fill any absent key
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ParseError("train config must be a JSON object");
    if (j.contains("dims")) {
      const json& d = j.at("dims");
      cfg.dims.word_dim = d.value("word_dim", cfg.dims.word_dim);
      cfg.dims.feat_dim = d.value("feat_dim", cfg.dims.feat_dim);
      cfg.dims.enc_hidden = d.value("enc_hidden", cfg.dims.enc_hidden);
      cfg.dims.enc_layers = d.value("enc_layers", cfg.dims.enc_layers);
      cfg.dims.dec_hidden = d.value("dec_hidden", cfg.dims.dec_hidden);
      cfg.dims.att_dim = d.value("att_dim", cfg.dims.att_dim);
      cfg.dims.ptr_hidden = d.value("ptr_hidden", cfg.dims.ptr_hidden);
      cfg.dims.ptr_att_dim = d.value("ptr_att_dim", cfg.dims.ptr_att_dim);
      cfg.dims.max_span = d.value("max_span", cfg.dims.max_span);
    }
    if (j.contains("reward")) {
      const json& r = j.at("reward");
      if (r.contains("base"))
        cfg.reward.base = base_metric_from_name(r.at("base").get<std::string>());
      cfg.reward.use_qss = r.value("qss", cfg.reward.use_qss);
      cfg.reward.use_anss = r.value("anss", cfg.reward.use_anss);
      if (r.contains("weights"))
        cfg.reward.weights = r.at("weights").get<std::vector<double>>();
      cfg.reward.max_n = r.value("max_n", cfg.reward.max_n);
    }
    cfg.lambda_c = j.value("lambda_c", cfg.lambda_c);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.rl_lr = j.value("rl_lr", cfg.rl_lr);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.pointer_epochs = j.value("pointer_epochs", cfg.pointer_epochs);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("reward_mode"))
      cfg.reward_mode =
          reward_mode_from_name(j.at("reward_mode").get<std::string>());
    if (j.contains("baseline"))
      cfg.baseline =
          baseline_mode_from_name(j.at("baseline").get<std::string>());
    cfg.samples_per_step = j.value("samples_per_step", cfg.samples_per_step);
    cfg.heldout_fraction = j.value("heldout_fraction", cfg.heldout_fraction);
    cfg.max_len = j.value("max_len", cfg.max_len);
    cfg.vocab_cap = j.value("vocab_cap", cfg.vocab_cap);
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  return cfg;
}

void split_heldout(size_t n, double fraction, std::vector<size_t>& train,
                   std::vector<size_t>& heldout) {
  train.clear();
  heldout.clear();
  if (fraction <= 0.0) {
    for (size_t i = 0; i < n; ++i) train.push_back(i);
    return;
  }
  size_t stride = static_cast<size_t>(
      std::max<long>(2, std::lround(1.0 / fraction)));
  for (size_t i = 0; i < n; ++i) {
    if (i % stride == 0)
      heldout.push_back(i);
    else
      train.push_back(i);
  }
}

Var xent_loss(Graph& g, const Example& ex, const Tokens& gold,
              const Vocabulary& vocab, const FeatureVocab& fvocab,
              const TrainConfig& cfg) {
  if (gold.empty()) throw ArgError("xent_loss: empty gold question");
  ExtendedVocab ext = build_extended(ex.sentence, vocab);
  std::vector<int> targets;
  targets.reserve(gold.size() + 1);
  for (const std::string& tok : gold) targets.push_back(ext.target_id(tok, vocab));
  targets.push_back(Vocabulary::kEnd);

  ForcedDecode fd = force_decode(g, ex, vocab, fvocab, ext, cfg.dims, targets);
  const double n = static_cast<double>(targets.size());
  Var nll_sum = fd.logps[0];
  for (size_t t = 1; t < fd.logps.size(); ++t) nll_sum = add(nll_sum, fd.logps[t]);
  Var loss = cmul(nll_sum, -1.0 / n);
  if (cfg.lambda_c != 0.0) {
    Var pen_sum = fd.steps[0].penalty;
    for (size_t t = 1; t < fd.steps.size(); ++t)
      pen_sum = add(pen_sum, fd.steps[t].penalty);
    loss = add(loss, cmul(pen_sum, cfg.lambda_c / n));
  }
  return loss;
}

double example_reward(const RewardSpec& spec, const Tokens& question,
                      const Example& ex, const DasScorer& das,
                      AnswerPredictor* predictor, long* predictor_failures) {
  if (ex.questions.empty())
    throw ArgError("example_reward: example '" + ex.id +
                   "' has no gold questions");
  Tokens pivotal =
      ex.answer_span ? span_tokens(ex.sentence, *ex.answer_span) : Tokens{};

  RewardSpec eff = spec;
  Tokens predicted;
  if (spec.use_anss) {
    bool usable = false;
    if (predictor != nullptr && !pivotal.empty() && !question.empty()) {
      try {
        predicted = predictor->predict(ex.sentence, question);
        usable = !predicted.empty();
      } catch (const PredictorError&) {
        if (predictor_failures) ++*predictor_failures;
        predicted.clear();
      }
    }
    if (!usable) {
      // Drop the answer-similarity component; remaining weights renormalize.
      eff.use_anss = false;
      if (!eff.weights.empty()) eff.weights.pop_back();
      predicted.clear();
    }
  }
  DasScorer scorer = (eff.base == BaseMetric::DAS) ? das : DasScorer(nullptr);
  return combined_reward(eff, question, ex.questions, ex.sentence, predicted,
                         pivotal, scorer);
}

RlResult rl_loss(Graph& g, const Example& ex, const Vocabulary& vocab,
                 const FeatureVocab& fvocab, const TrainConfig& cfg, Rng& rng,
                 const DasScorer& das, AnswerPredictor* predictor) {
  if (cfg.samples_per_step < 1)
    throw ConfigError("samples_per_step must be >= 1");

  RlResult out;
  double baseline = 0.0;
  if (cfg.reward_mode == RewardMode::Terminal &&
      cfg.baseline == BaselineMode::GreedySelfCritical) {
    std::vector<std::string> greedy = greedy_decode(
        ex, vocab, fvocab, g.store(), cfg.dims, cfg.max_len);
    baseline = example_reward(cfg.reward, greedy, ex, das, predictor,
                              &out.predictor_failures);
    if (!std::isfinite(baseline))
      throw NumericError("rl_loss: non-finite baseline reward");
  }

  Var total;
  double reward_sum = 0.0;
  for (int k = 0; k < cfg.samples_per_step; ++k) {
    SampleResult s =
        sample_decode(g, ex, vocab, fvocab, cfg.dims, rng, cfg.max_len);
    if (k == 0) out.sampled = s.tokens;

    Var sample_loss;
    if (cfg.reward_mode == RewardMode::Terminal) {
      double r = example_reward(cfg.reward, s.tokens, ex, das, predictor,
                                &out.predictor_failures);
      if (!std::isfinite(r))
        throw NumericError("rl_loss: non-finite sample reward");
      Var logp_sum = s.logps[0];
      for (size_t t = 1; t < s.logps.size(); ++t)
        logp_sum = add(logp_sum, s.logps[t]);
      sample_loss = cmul(logp_sum, -(r - baseline));
      reward_sum += r;
    } else {
      // Stepwise credit: each emitted token earns the change in reward its
      // prefix produced, starting from a zero-reward empty prefix, so the
      // per-step rewards sum to the full-sequence reward.
      double prev = 0.0;
      for (size_t t = 0; t < s.logps.size(); ++t) {
        size_t ntok = std::min(t + 1, s.tokens.size());
        Tokens prefix(s.tokens.begin(),
                      s.tokens.begin() + static_cast<std::ptrdiff_t>(ntok));
        double cur = prefix.empty()
                         ? 0.0
                         : example_reward(cfg.reward, prefix, ex, das,
                                          predictor, &out.predictor_failures);
        if (!std::isfinite(cur))
          throw NumericError("rl_loss: non-finite prefix reward");
        Var term = cmul(s.logps[t], -(cur - prev));
        sample_loss = sample_loss.valid() ? add(sample_loss, term) : term;
        prev = cur;
      }
      reward_sum += prev;
    }
    total = total.valid() ? add(total, sample_loss) : sample_loss;
  }

  out.loss = cmul(total, 1.0 / static_cast<double>(cfg.samples_per_step));
  out.reward = reward_sum / static_cast<double>(cfg.samples_per_step);
  out.baseline = baseline;
  return out;
}

double xent_update(ParamStore& store, const Example& ex, const Tokens& gold,
                   const Vocabulary& vocab, const FeatureVocab& fvocab,
                   const TrainConfig& cfg, double lr, long* clamped) {
  store.zero_grads();
  Graph g(store);
  Var loss = xent_loss(g, ex, gold, vocab, fvocab, cfg);
  g.backward(loss);
  adam_step(store, lr);
  if (clamped) *clamped += g.clamped_log_events;
  return loss.scalar();
}

RlUpdate rl_update(ParamStore& store, const Example& ex,
                   const Vocabulary& vocab, const FeatureVocab& fvocab,
                   const TrainConfig& cfg, Rng& rng, const DasScorer& das,
                   AnswerPredictor* predictor, double lr) {
  store.zero_grads();
  Graph g(store);
  RlResult r = rl_loss(g, ex, vocab, fvocab, cfg, rng, das, predictor);
  g.backward(r.loss);
  adam_step(store, lr);
  RlUpdate out;
  out.loss = r.loss.scalar();
  out.reward = r.reward;
  out.baseline = r.baseline;
  out.sampled = std::move(r.sampled);
  out.predictor_failures = r.predictor_failures;
  return out;
}

CombinedUpdate combined_step(ParamStore& store, const Example& ex,
                             const Tokens& gold, const Vocabulary& vocab,
                             const FeatureVocab& fvocab,
                             const TrainConfig& cfg, Rng& rng,
                             const DasScorer& das,
                             AnswerPredictor* predictor) {
  store.zero_grads();
  Graph g(store);
  // The teacher-forced branch is built first so the sampling branch sees the
  // same generator state either way; both always run, which keeps this step
  // equal to the single-objective steps when one coefficient is zero.
  Var xl = xent_loss(g, ex, gold, vocab, fvocab, cfg);
  RlResult rl = rl_loss(g, ex, vocab, fvocab, cfg, rng, das, predictor);
  Var loss = add(cmul(xl, cfg.alpha), cmul(rl.loss, cfg.beta));
  g.backward(loss);
  adam_step(store, cfg.rl_lr);

  CombinedUpdate out;
  out.xent = xl.scalar();
  out.rl = rl.loss.scalar();
  out.reward = rl.reward;
  out.baseline = rl.baseline;
  out.clamped = g.clamped_log_events;
  out.predictor_failures = rl.predictor_failures;
  return out;
}

double heldout_xent(const ParamStore& store, const std::vector<Example>& exs,
                    const Vocabulary& vocab, const FeatureVocab& fvocab,
                    const TrainConfig& cfg) {
  // Pure per-token cross-entropy: the coverage term is a training device and
  // would mask likelihood movement here.
  TrainConfig plain = cfg;
  plain.lambda_c = 0.0;
  double sum = 0.0;
  long pairs = 0;
  for (const Example& ex : exs) {
    for (const Tokens& q : ex.questions) {
      Graph g(thaw(store));
      sum += xent_loss(g, ex, q, vocab, fvocab, plain).scalar();
      ++pairs;
    }
  }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

double heldout_reward(const ParamStore& store, const std::vector<Example>& exs,
                      const Vocabulary& vocab, const FeatureVocab& fvocab,
                      const TrainConfig& cfg, const DasScorer& das,
                      AnswerPredictor* predictor, long* predictor_failures) {
  double sum = 0.0;
  long n = 0;
  for (const Example& ex : exs) {
    if (ex.questions.empty()) continue;
    std::vector<std::string> q =
        greedy_decode(ex, vocab, fvocab, store, cfg.dims, cfg.max_len);
    sum += example_reward(cfg.reward, q, ex, das, predictor,
                          predictor_failures);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double pointer_accuracy(const ParamStore& store,
                        const std::vector<Example>& exs,
                        const Vocabulary& vocab, const FeatureVocab& fvocab,
                        const ModelDims& dims) {
  long hits = 0;
  long n = 0;
  for (const Example& ex : exs) {
    if (!ex.answer_span) continue;
    AnswerSpan got = point_answer(ex, vocab, fvocab, store, dims);
    if (got.start == ex.answer_span->start && got.end == ex.answer_span->end)
      ++hits;
    ++n;
  }
  return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

double exact_match_rate(const ParamStore& store,
                        const std::vector<Example>& exs,
                        const Vocabulary& vocab, const FeatureVocab& fvocab,
                        const TrainConfig& cfg) {
  long hits = 0;
  long n = 0;
  for (const Example& ex : exs) {
    if (ex.questions.empty()) continue;
    std::vector<std::string> q =
        greedy_decode(ex, vocab, fvocab, store, cfg.dims, cfg.max_len);
    for (const Tokens& gold : ex.questions) {
      if (q == gold) {
        ++hits;
        break;
      }
    }
    ++n;
  }
  return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

std::string EpochMetrics::to_json() const {
  json j;
  j["phase"] = phase;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["mean_reward"] = mean_reward;
  j["baseline_reward"] = baseline_reward;
  j["heldout_xent"] = heldout_xent;
  j["heldout_reward"] = heldout_reward;
  j["pointer_accuracy"] = pointer_accuracy;
  j["exact_match"] = exact_match;
  j["clamped_logs"] = clamped_logs;
  j["predictor_failures"] = predictor_failures;
  return j.dump();
}

namespace {

std::vector<Example> gather(const std::vector<Example>& corpus,
                            const std::vector<size_t>& idx) {
  std::vector<Example> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(corpus[i]);
  return out;
}

}  // namespace

std::vector<EpochMetrics> pretrain(ParamStore& store,
                                   const std::vector<Example>& corpus,
                                   const Vocabulary& vocab,
                                   const FeatureVocab& fvocab,
                                   const TrainConfig& cfg,
                                   const EpochHook& hook) {
  cfg.validate();
  if (corpus.empty()) throw ArgError("pretrain: empty corpus");

  {
    Rng init_rng(cfg.seed);
    if (!store.has("gen.emb.word"))
      init_generator(store, cfg.dims, vocab.size(), fvocab, init_rng);
    if (!store.has("ptr.emb.word"))
      init_pointer(store, cfg.dims, vocab.size(), fvocab, init_rng);
  }

  std::vector<size_t> train_idx, held_idx;
  split_heldout(corpus.size(), cfg.heldout_fraction, train_idx, held_idx);
  std::vector<Example> eval_set =
      gather(corpus, held_idx.empty() ? train_idx : held_idx);

  Rng rng(cfg.seed + 1);
  std::vector<EpochMetrics> out;

  // Phase 1: answer-span pointer on examples that carry a gold span.
  std::vector<size_t> ptr_idx;
  for (size_t i : train_idx)
    if (corpus[i].answer_span) ptr_idx.push_back(i);
  for (int e = 0; e < cfg.pointer_epochs && !ptr_idx.empty(); ++e) {
    rng.shuffle(ptr_idx.begin(), ptr_idx.end());
    double loss_sum = 0.0;
    long clamped = 0;
    for (size_t i : ptr_idx) {
      const Example& ex = corpus[i];
      store.zero_grads();
      Graph g(store);
      PointerOutput po = pointer_forward(g, ex, vocab, fvocab, cfg.dims);
      Var loss = pointer_loss(g, po, *ex.answer_span);
      g.backward(loss);
      adam_step(store, cfg.lr);
      loss_sum += loss.scalar();
      clamped += g.clamped_log_events;
    }
    EpochMetrics m;
    m.phase = "pointer";
    m.epoch = e;
    m.train_loss = loss_sum / static_cast<double>(ptr_idx.size());
    m.pointer_accuracy =
        pointer_accuracy(store, eval_set, vocab, fvocab, cfg.dims);
    m.clamped_logs = clamped;
    if (hook) hook(m);
    out.push_back(std::move(m));
  }

  // Phase 2: teacher-forced generator on every (example, question) pair.
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i : train_idx)
    for (size_t qi = 0; qi < corpus[i].questions.size(); ++qi)
      pairs.emplace_back(i, qi);
  if (pairs.empty()) throw ArgError("pretrain: no training questions");

  const bool reward_feasible = cfg.reward.base != BaseMetric::DAS;
  for (int e = 0; e < cfg.epochs; ++e) {
    rng.shuffle(pairs.begin(), pairs.end());
    double loss_sum = 0.0;
    long clamped = 0;
    for (const auto& [i, qi] : pairs) {
      loss_sum += xent_update(store, corpus[i], corpus[i].questions[qi], vocab,
                              fvocab, cfg, cfg.lr, &clamped);
    }
    EpochMetrics m;
    m.phase = "xent";
    m.epoch = e;
    m.train_loss = loss_sum / static_cast<double>(pairs.size());
    m.heldout_xent = heldout_xent(store, eval_set, vocab, fvocab, cfg);
    if (reward_feasible)
      m.heldout_reward =
          heldout_reward(store, eval_set, vocab, fvocab, cfg, nullptr, nullptr,
                         &m.predictor_failures);
    m.exact_match = exact_match_rate(store, eval_set, vocab, fvocab, cfg);
    m.clamped_logs = clamped;
    if (hook) hook(m);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EpochMetrics> finetune(ParamStore& store,
                                   const std::vector<Example>& corpus,
                                   const Vocabulary& vocab,
                                   const FeatureVocab& fvocab,
                                   const TrainConfig& cfg,
                                   const DasScorer& das,
                                   AnswerPredictor* predictor,
                                   const EpochHook& hook) {
  cfg.validate();
  if (corpus.empty()) throw ArgError("finetune: empty corpus");
  if (!store.has("gen.emb.word"))
    throw ConfigError(
        "finetune requires a pretrained generator; the store has no gen.* "
        "parameters");
  if (cfg.reward.base == BaseMetric::DAS && !das)
    throw ConfigError("finetune: reward base is das but no scorer was given");
  if (cfg.reward.use_anss && predictor == nullptr)
    std::cerr << "warning: anss is enabled but no answer predictor is "
                 "configured; its weight is redistributed\n";

  std::vector<size_t> train_idx, held_idx;
  split_heldout(corpus.size(), cfg.heldout_fraction, train_idx, held_idx);
  std::vector<Example> eval_set =
      gather(corpus, held_idx.empty() ? train_idx : held_idx);

  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i : train_idx)
    for (size_t qi = 0; qi < corpus[i].questions.size(); ++qi)
      pairs.emplace_back(i, qi);
  if (pairs.empty()) throw ArgError("finetune: no training questions");

  Rng rng(cfg.seed + 2);
  std::vector<EpochMetrics> out;
  for (int e = 0; e < cfg.epochs; ++e) {
    rng.shuffle(pairs.begin(), pairs.end());
    double loss_sum = 0.0, reward_sum = 0.0, baseline_sum = 0.0;
    long clamped = 0, failures = 0;
    for (const auto& [i, qi] : pairs) {
      CombinedUpdate u =
          combined_step(store, corpus[i], corpus[i].questions[qi], vocab,
                        fvocab, cfg, rng, das, predictor);
      loss_sum += cfg.alpha * u.xent + cfg.beta * u.rl;
      reward_sum += u.reward;
      baseline_sum += u.baseline;
      clamped += u.clamped;
      failures += u.predictor_failures;
    }
    const double n = static_cast<double>(pairs.size());
    EpochMetrics m;
    m.phase = "rl";
    m.epoch = e;
    m.train_loss = loss_sum / n;
    m.mean_reward = reward_sum / n;
    m.baseline_reward = baseline_sum / n;
    m.heldout_xent = heldout_xent(store, eval_set, vocab, fvocab, cfg);
    m.heldout_reward = heldout_reward(store, eval_set, vocab, fvocab, cfg, das,
                                      predictor, &failures);
    m.exact_match = exact_match_rate(store, eval_set, vocab, fvocab, cfg);
    m.clamped_logs = clamped;
    m.predictor_failures = failures;
    if (hook) hook(m);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace qgrl
