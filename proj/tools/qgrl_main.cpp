#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qgrl/answer_predictor.hpp"
#include "qgrl/checkpoint.hpp"
#include "qgrl/das.hpp"
#include "qgrl/gradcheck.hpp"
#include "qgrl/metrics.hpp"
#include "qgrl/qgmodel.hpp"
#include "qgrl/runconfig.hpp"
#include "qgrl/synth.hpp"
#include "qgrl/train.hpp"

namespace fs = std::filesystem;
using namespace qgrl;
using nlohmann::json;

namespace {

RunConfig load_run_config(const std::string& config_path,
                          std::optional<uint64_t> seed_override,
                          const std::string& out_override) {
  RunConfig rc;
  if (!config_path.empty()) rc = RunConfig::from_file(config_path);
  if (seed_override) rc.train.seed = *seed_override;
  if (!out_override.empty()) rc.out = out_override;
  return rc;
}

void require_key(const std::string& value, const char* key) {
  if (value.empty())
    throw ConfigError(std::string("config key '") + key +
                      "' is required for this command");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw IoError("cannot write '" + path + "'");
  return out;
}

void log_config(const RunConfig& rc) {
  std::cerr << "config: " << rc.resolved_json() << "\n";
}

// Rebuilds a scoring closure from a trained DAS checkpoint; the model and its
// vocabulary live inside the closure.
DasScorer make_das_scorer(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  ParamStore das_store = extract_prefix(ck.store, "das.");
  if (das_store.size() == 0)
    throw ConfigError("checkpoint '" + path + "' contains no das parameters");
  auto model = std::make_shared<DasModel>();
  model->dims.dim = static_cast<int>(das_store.value("das.emb").mat().cols());
  model->dims.hidden =
      static_cast<int>(das_store.value("das.n1.w1").mat().cols());
  model->dims.compare =
      static_cast<int>(das_store.value("das.n1.w2").mat().cols());
  model->vocab_size =
      static_cast<int>(das_store.value("das.emb").mat().rows());
  model->store = std::move(das_store);
  auto vocab = std::make_shared<Vocabulary>(std::move(ck.vocab));
  return [model, vocab](const Tokens& question, const Tokens& gold) {
    return das_score(*model, encode_tokens(*vocab, question),
                     encode_tokens(*vocab, gold));
  };
}

int run_synth(const RunConfig& rc, int n) {
  require_key(rc.out, "out");
  std::vector<Example> corpus = synth_corpus(n, rc.train.seed);
  save_corpus(rc.out, corpus);
  std::cerr << "wrote " << corpus.size() << " examples to " << rc.out << "\n";
  return 0;
}

int run_build_vocab(const RunConfig& rc) {
  require_key(rc.corpus, "corpus");
  require_key(rc.out, "out");
  std::vector<Example> corpus = load_corpus(rc.corpus);
  Vocabulary vocab =
      Vocabulary::build(corpus, static_cast<size_t>(rc.train.vocab_cap));
  FeatureVocab fvocab = FeatureVocab::build(corpus);
  json j;
  j["tokens"] = vocab.tokens();
  j["pos"] = fvocab.pos_tags();
  j["ner"] = fvocab.ner_tags();
  j["case"] = fvocab.case_tags();
  j["answer"] = fvocab.answer_tags();
  std::ofstream out = open_out(rc.out);
  out << j.dump() << "\n";
  std::cerr << "vocabulary: " << vocab.size() << " tokens -> " << rc.out
            << "\n";
  return 0;
}

int run_pretrain(RunConfig rc) {
  require_key(rc.corpus, "corpus");
  require_key(rc.out, "out");
  log_config(rc);
  std::vector<Example> corpus = load_corpus(rc.corpus);
  Vocabulary vocab =
      Vocabulary::build(corpus, static_cast<size_t>(rc.train.vocab_cap));
  FeatureVocab fvocab = FeatureVocab::build(corpus);
  fs::create_directories(rc.out);
  const std::string ckpt_path = rc.out + "/pretrained.qgrl";
  std::ofstream metrics = open_out(rc.out + "/pretrain.metrics.jsonl");

  ParamStore store;
  auto hook = [&](const EpochMetrics& m) {
    metrics << m.to_json() << "\n";
    metrics.flush();
    save_checkpoint(ckpt_path, store, vocab, fvocab, rc.train.to_json());
  };
  pretrain(store, corpus, vocab, fvocab, rc.train, hook);
  save_checkpoint(ckpt_path, store, vocab, fvocab, rc.train.to_json());
  std::cerr << "pretrained checkpoint: " << ckpt_path << "\n";
  return 0;
}

int run_finetune(RunConfig rc) {
  require_key(rc.corpus, "corpus");
  require_key(rc.checkpoint, "checkpoint");
  require_key(rc.out, "out");
  if (!fs::exists(rc.checkpoint))
    throw ConfigError("pretrained checkpoint '" + rc.checkpoint +
                      "' does not exist; run pretrain first");
  Checkpoint ck = load_checkpoint(rc.checkpoint);
  // Model geometry always comes from the checkpoint the arrays were built to.
  rc.train.dims = TrainConfig::from_json(ck.config_json).dims;
  log_config(rc);

  DasScorer scorer = nullptr;
  if (rc.train.reward.base == BaseMetric::DAS) {
    require_key(rc.das_checkpoint, "das_checkpoint");
    scorer = make_das_scorer(rc.das_checkpoint);
  }
  std::unique_ptr<AnswerPredictor> predictor;
  if (rc.train.reward.use_anss) {
    predictor = make_predictor(rc.answer_cmd);
    std::cerr << "answer predictor: " << predictor->name() << "\n";
  }

  std::vector<Example> corpus = load_corpus(rc.corpus);
  fs::create_directories(rc.out);
  const std::string ckpt_path = rc.out + "/finetuned.qgrl";
  std::ofstream metrics = open_out(rc.out + "/finetune.metrics.jsonl");
  auto hook = [&](const EpochMetrics& m) {
    metrics << m.to_json() << "\n";
    metrics.flush();
    save_checkpoint(ckpt_path, ck.store, ck.vocab, ck.fvocab,
                    rc.train.to_json());
  };
  finetune(ck.store, corpus, ck.vocab, ck.fvocab, rc.train, scorer,
           predictor.get(), hook);
  save_checkpoint(ckpt_path, ck.store, ck.vocab, ck.fvocab, rc.train.to_json());
  std::cerr << "finetuned checkpoint: " << ckpt_path << "\n";
  return 0;
}

int run_train_das(RunConfig rc) {
  require_key(rc.corpus, "corpus");
  require_key(rc.out, "out");
  log_config(rc);
  std::vector<Example> corpus = load_corpus(rc.corpus);
  Vocabulary vocab =
      Vocabulary::build(corpus, static_cast<size_t>(rc.train.vocab_cap));
  FeatureVocab fvocab = FeatureVocab::build(corpus);
  std::vector<DasPair> pairs =
      make_pair_dataset(corpus, vocab, rc.das_train.seed);
  DasModel model = DasModel::init(vocab.size(), DasDims{}, rc.das_train.seed);
  DasReport report = train_das(model, pairs, rc.das_train);

  fs::create_directories(rc.out);
  std::ofstream metrics = open_out(rc.out + "/das.metrics.jsonl");
  for (size_t e = 0; e < report.epoch_loss.size(); ++e) {
    json j;
    j["epoch"] = e;
    j["loss"] = report.epoch_loss[e];
    metrics << j.dump() << "\n";
  }
  json fin;
  fin["final_loss"] = report.final_loss;
  fin["heldout_accuracy"] = report.heldout_accuracy;
  metrics << fin.dump() << "\n";

  json cfg;
  cfg["das_dim"] = model.dims.dim;
  cfg["das_hidden"] = model.dims.hidden;
  cfg["das_compare"] = model.dims.compare;
  save_checkpoint(rc.out + "/das.qgrl", model.store, vocab, fvocab,
                  cfg.dump());
  std::cerr << "das held-out accuracy: " << report.heldout_accuracy << " -> "
            << rc.out << "/das.qgrl\n";
  return 0;
}

int run_generate(RunConfig rc, bool step_log_flag) {
  require_key(rc.checkpoint, "checkpoint");
  require_key(rc.corpus, "corpus");
  require_key(rc.out, "out");
  if (!fs::exists(rc.checkpoint))
    throw ConfigError("checkpoint '" + rc.checkpoint + "' does not exist");
  Checkpoint ck = load_checkpoint(rc.checkpoint);
  if (!ck.store.has("gen.emb.word"))
    throw ConfigError("checkpoint '" + rc.checkpoint +
                      "' has no generator parameters");
  TrainConfig stored = TrainConfig::from_json(ck.config_json);
  rc.train.dims = stored.dims;
  const bool want_log = step_log_flag || rc.step_log == "true";
  log_config(rc);

  std::vector<Example> corpus = load_corpus(rc.corpus);
  std::ofstream out = open_out(rc.out);
  for (const Example& ex : corpus) {
    AnswerSpan sp =
        point_answer(ex, ck.vocab, ck.fvocab, ck.store, rc.train.dims);
    Example gex = ex;
    gex.answer_span = Span{sp.start, sp.end};
    GreedyTrace trace;
    std::vector<std::string> q =
        greedy_decode(gex, ck.vocab, ck.fvocab, ck.store, rc.train.dims,
                      rc.train.max_len, want_log ? &trace : nullptr);
    json j;
    j["id"] = ex.id;
    j["question"] = q;
    j["predicted_span"] = {sp.start, sp.end};
    if (want_log)
      j["step_log"] = {{"p_cg", trace.gate},
                       {"top_attention", trace.top_attention}};
    out << j.dump() << "\n";
  }
  std::cerr << "generated " << corpus.size() << " questions -> " << rc.out
            << "\n";
  return 0;
}

int run_evaluate(const std::string& candidates_path,
                 const std::string& references_path, const RunConfig& rc) {
  require_key(rc.out, "out");
  std::vector<Example> refs = load_corpus(references_path);
  std::map<std::string, const Example*> ref_by_id;
  for (const Example& ex : refs) {
    if (!ref_by_id.emplace(ex.id, &ex).second)
      throw ConfigError("duplicate reference id '" + ex.id + "'");
  }

  std::map<std::string, Tokens> cand_by_id;
  {
    std::ifstream in(candidates_path, std::ios::binary);
    if (!in.good())
      throw IoError("cannot open candidates '" + candidates_path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::string id;
      Tokens question;
      try {
        json j = json::parse(line);
        if (j.contains("question")) {
          id = j.at("id").get<std::string>();
          question = j.at("question").get<Tokens>();
        } else {
          Example ex = example_from_json(line, candidates_path);
          id = ex.id;
          question = ex.questions.at(0);
        }
      } catch (const json::exception& e) {
        throw ParseError(candidates_path + ":" + std::to_string(lineno) +
                         ": " + e.what());
      }
      if (!cand_by_id.emplace(id, std::move(question)).second)
        throw ConfigError("duplicate candidate id '" + id + "'");
    }
  }

  std::vector<std::string> orphan_cands, orphan_refs;
  for (const auto& [id, q] : cand_by_id)
    if (!ref_by_id.count(id)) orphan_cands.push_back(id);
  for (const auto& [id, ex] : ref_by_id)
    if (!cand_by_id.count(id)) orphan_refs.push_back(id);
  if (!orphan_cands.empty() || !orphan_refs.empty()) {
    std::string msg = "candidate/reference id pairing failed;";
    if (!orphan_cands.empty()) {
      msg += " candidates without references:";
      for (const std::string& id : orphan_cands) msg += " " + id;
      msg += ";";
    }
    if (!orphan_refs.empty()) {
      msg += " references without candidates:";
      for (const std::string& id : orphan_refs) msg += " " + id;
    }
    throw ConfigError(msg);
  }

  std::ofstream out = open_out(rc.out);
  std::vector<Tokens> cands_ordered;
  std::vector<std::vector<Tokens>> golds_ordered;
  double gleu_sum = 0.0, rouge_sum = 0.0;
  for (const Example& ex : refs) {
    const Tokens& cand = cand_by_id.at(ex.id);
    double best_rouge = 0.0;
    for (const Tokens& gold : ex.questions)
      best_rouge = std::max(best_rouge, rouge_l(cand, gold));
    double g = gleu(cand, ex.questions, 4);
    double b = bleu(cand, ex.questions, 4);
    json j;
    j["id"] = ex.id;
    j["bleu4"] = b;
    j["gleu"] = g;
    j["rouge_l"] = best_rouge;
    out << j.dump() << "\n";
    cands_ordered.push_back(cand);
    golds_ordered.push_back(ex.questions);
    gleu_sum += g;
    rouge_sum += best_rouge;
  }
  const double n = static_cast<double>(refs.size());
  json agg;
  agg["examples"] = refs.size();
  agg["corpus_bleu4"] = corpus_bleu(cands_ordered, golds_ordered, 4);
  agg["mean_gleu"] = n ? gleu_sum / n : 0.0;
  agg["mean_rouge_l"] = n ? rouge_sum / n : 0.0;
  out << agg.dump() << "\n";
  std::cerr << "aggregate: " << agg.dump() << "\n";
  return 0;
}

int run_gradcheck(const std::string& scope, uint64_t seed) {
  std::vector<std::string> scopes;
  if (scope == "all")
    scopes = {"encoder", "decoder", "pointer", "das", "rl"};
  else
    scopes = {scope};

  std::vector<Example> corpus = synth_corpus(3, seed);
  Vocabulary vocab = Vocabulary::build(corpus, 200);
  FeatureVocab fvocab = FeatureVocab::build(corpus);
  ModelDims dims;
  dims.word_dim = 4;
  dims.feat_dim = 2;
  dims.enc_hidden = 3;
  dims.enc_layers = 2;
  dims.dec_hidden = 6;
  dims.att_dim = 4;
  dims.ptr_hidden = 3;
  dims.ptr_att_dim = 3;
  dims.max_span = 4;
  const Example& ex = corpus[0];

  TrainConfig cfg;
  cfg.dims = dims;
  cfg.max_len = 4;
  cfg.baseline = BaselineMode::None;

  bool all_pass = true;
  for (const std::string& sc : scopes) {
    FdReport rep;
    if (sc == "das") {
      DasDims dd;
      dd.dim = 3;
      dd.hidden = 4;
      dd.compare = 3;
      DasModel model = DasModel::init(12, dd, seed);
      std::vector<DasPair> batch = {{{1, 2}, {2, 3}, 1}, {{4}, {5, 6}, 0}};
      auto loss_fn = [&](ParamStore& s) {
        s.zero_grads();
        Graph g(s);
        Var loss = das_bce_loss(model, g, batch);
        g.backward(loss);
        return loss.scalar();
      };
      rep = finite_diff_check(loss_fn, model.store, 1e-5, 1e-4);
    } else {
      ParamStore store;
      Rng rng(seed);
      init_generator(store, dims, vocab.size(), fvocab, rng);
      init_pointer(store, dims, vocab.size(), fvocab, rng);
      std::function<double(ParamStore&)> loss_fn;
      if (sc == "encoder") {
        loss_fn = [&](ParamStore& s) {
          s.zero_grads();
          Graph g(s);
          EncoderOutput enc = encode(g, ex, vocab, fvocab, dims);
          Var loss = add(sum(enc.h), sum(enc.s0));
          g.backward(loss);
          return loss.scalar();
        };
      } else if (sc == "decoder") {
        loss_fn = [&](ParamStore& s) {
          s.zero_grads();
          Graph g(s);
          Var loss = xent_loss(g, ex, ex.questions[0], vocab, fvocab, cfg);
          g.backward(loss);
          return loss.scalar();
        };
      } else if (sc == "pointer") {
        loss_fn = [&](ParamStore& s) {
          s.zero_grads();
          Graph g(s);
          PointerOutput po = pointer_forward(g, ex, vocab, fvocab, dims);
          Var loss = pointer_loss(g, po, *ex.answer_span);
          g.backward(loss);
          return loss.scalar();
        };
      } else if (sc == "rl") {
        // A token-level constant scorer keeps the sampled sequence's reward
        // fixed under parameter perturbation; the sequence itself is pinned
        // by the frozen sampling stream.
        TrainConfig rl_cfg = cfg;
        rl_cfg.reward.base = BaseMetric::DAS;
        DasScorer constant = [](const Tokens&, const Tokens&) { return 0.75; };
        loss_fn = [&, constant](ParamStore& s) {
          s.zero_grads();
          Graph g(s);
          Rng sample_rng(1234);
          RlResult rl =
              rl_loss(g, ex, vocab, fvocab, rl_cfg, sample_rng, constant);
          g.backward(rl.loss);
          return rl.loss.scalar();
        };
      } else {
        throw ConfigError("unknown gradcheck scope '" + sc + "'");
      }
      rep = finite_diff_check(loss_fn, store, 1e-5, 1e-4);
    }
    std::cerr << "gradcheck " << sc << ": max rel err " << rep.max_rel_err
              << (rep.pass ? " pass" : " FAIL") << " (worst " << rep.worst_param
              << "[" << rep.worst_index << "])\n";
    all_pass = all_pass && rep.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generator-evaluator question generation workbench"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "seed override");
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--out", out_override, "output path override");

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->fallthrough();
  int synth_n = 0;
  synth->add_option("--n", synth_n, "number of examples")
      ->required()
      ->check(CLI::PositiveNumber);

  auto* build_vocab =
      app.add_subcommand("build-vocab", "write vocabulary files for a corpus");
  build_vocab->fallthrough();
  std::string bv_corpus;
  int bv_cap = 0;
  build_vocab->add_option("--corpus", bv_corpus, "corpus path");
  build_vocab->add_option("--cap", bv_cap, "vocabulary size cap");

  auto* pretrain_cmd =
      app.add_subcommand("pretrain", "supervised pointer + generator training");
  pretrain_cmd->fallthrough();

  auto* finetune_cmd =
      app.add_subcommand("finetune", "policy-gradient fine-tuning");
  finetune_cmd->fallthrough();

  auto* train_das_cmd =
      app.add_subcommand("train-das", "train the similarity scorer");
  train_das_cmd->fallthrough();

  auto* generate_cmd =
      app.add_subcommand("generate", "greedy questions for a corpus");
  generate_cmd->fallthrough();
  std::string gen_checkpoint, gen_corpus;
  bool gen_step_log = false;
  generate_cmd->add_option("--checkpoint", gen_checkpoint, "model checkpoint");
  generate_cmd->add_option("--corpus", gen_corpus, "input corpus");
  generate_cmd->add_flag("--step-log", gen_step_log,
                         "include per-step gate and attention logs");

  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "score candidates against references");
  evaluate_cmd->fallthrough();
  std::string ev_candidates, ev_references;
  evaluate_cmd->add_option("--candidates", ev_candidates, "candidate file")
      ->required();
  evaluate_cmd->add_option("--references", ev_references, "reference corpus")
      ->required();

  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck_cmd->fallthrough();
  std::string gc_scope = "all";
  gradcheck_cmd->add_option("--scope", gc_scope, "which parameters to check")
      ->check(CLI::IsMember(
          {"encoder", "decoder", "pointer", "das", "rl", "all"}));

  CLI11_PARSE(app, argc, argv);

  std::optional<uint64_t> seed_override;
  if (seed_opt->count() > 0) seed_override = seed_val;

  try {
    RunConfig rc = load_run_config(config_path, seed_override, out_override);
    if (synth->parsed()) return run_synth(rc, synth_n);
    if (build_vocab->parsed()) {
      if (!bv_corpus.empty()) rc.corpus = bv_corpus;
      if (bv_cap > 0) rc.train.vocab_cap = bv_cap;
      return run_build_vocab(rc);
    }
    if (pretrain_cmd->parsed()) return run_pretrain(std::move(rc));
    if (finetune_cmd->parsed()) return run_finetune(std::move(rc));
    if (train_das_cmd->parsed()) return run_train_das(std::move(rc));
    if (generate_cmd->parsed()) {
      if (!gen_checkpoint.empty()) rc.checkpoint = gen_checkpoint;
      if (!gen_corpus.empty()) rc.corpus = gen_corpus;
      return run_generate(std::move(rc), gen_step_log);
    }
    if (evaluate_cmd->parsed())
      return run_evaluate(ev_candidates, ev_references, rc);
    if (gradcheck_cmd->parsed())
      return run_gradcheck(gc_scope, seed_override.value_or(1));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
