#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qgrl/answer_predictor.hpp"
#include "qgrl/metrics.hpp"
#include "qgrl/qgmodel.hpp"

namespace qgrl {

// Whether the policy-gradient return is assigned once at sequence end or
// stepwise as the running reward difference of growing prefixes.
enum class RewardMode { Terminal, Incremental };
// Variance reduction for the terminal estimator. The greedy self-critical
// baseline subtracts the reward of the greedy decode; None is the bare
// estimator.
enum class BaselineMode { GreedySelfCritical, None };

std::string reward_mode_name(RewardMode m);
RewardMode reward_mode_from_name(const std::string& name);
std::string baseline_mode_name(BaselineMode m);
BaselineMode baseline_mode_from_name(const std::string& name);

struct TrainConfig {
  ModelDims dims;
  RewardSpec reward;
  double lambda_c = 1.0;  // coverage penalty weight in the teacher-forced loss
  double alpha = 0.1;     // teacher-forced share of the combined objective
  double beta = 0.9;      // policy-gradient share of the combined objective
  double lr = 1e-3;       // pretraining (pointer + generator) learning rate
  double rl_lr = 1e-5;    // fine-tuning learning rate
  int epochs = 5;
  int pointer_epochs = 5;
  uint64_t seed = 1;
  RewardMode reward_mode = RewardMode::Terminal;
  BaselineMode baseline = BaselineMode::GreedySelfCritical;
  int samples_per_step = 1;
  double heldout_fraction = 0.2;
  int max_len = 20;
  int vocab_cap = 20000;

  void validate() const;  // ConfigError naming the offending field
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Deterministic held-out split: with fraction > 0, every k-th index
// (k = max(2, round(1/fraction))) is held out; otherwise everything trains.
void split_heldout(size_t n, double fraction, std::vector<size_t>& train,
                   std::vector<size_t>& heldout);

// Teacher-forced loss for one (example, gold question) pair: the mean
// negative log mixture probability of the gold tokens (terminator included),
// plus lambda_c times the mean per-step coverage penalty. Gold probabilities
// are floored at 1e-12; floor hits are counted on the graph.
Var xent_loss(Graph& g, const Example& ex, const Tokens& gold,
              const Vocabulary& vocab, const FeatureVocab& fvocab,
              const TrainConfig& cfg);

// Combined reward of one generated question against an example's gold
// questions, source sentence and pivotal answer. When ANSS is enabled but no
// usable prediction exists (no predictor, no pivotal span, a dead or failing
// backend, or an empty prediction), the ANSS weight is dropped and the
// remaining components are renormalized; predictor failures are counted.
double example_reward(const RewardSpec& spec, const Tokens& question,
                      const Example& ex, const DasScorer& das,
                      AnswerPredictor* predictor,
                      long* predictor_failures = nullptr);

// One policy-gradient loss term. Terminal mode samples whole sequences and
// weights their total log-probability by (reward - baseline); incremental
// mode weights each step's log-probability by the reward difference its
// token produced (no baseline). Multiple samples are averaged. A non-finite
// reward raises NumericError.
struct RlResult {
  Var loss;
  std::vector<std::string> sampled;  // first sample's surface tokens
  double reward = 0.0;               // mean sampled reward
  double baseline = 0.0;
  long predictor_failures = 0;
};
RlResult rl_loss(Graph& g, const Example& ex, const Vocabulary& vocab,
                 const FeatureVocab& fvocab, const TrainConfig& cfg, Rng& rng,
                 const DasScorer& das = nullptr,
                 AnswerPredictor* predictor = nullptr);

// Single-example optimizer steps. These are deliberately separate code paths
// so the combined objective's reduction identities can be asserted against
// them update-for-update.
double xent_update(ParamStore& store, const Example& ex, const Tokens& gold,
                   const Vocabulary& vocab, const FeatureVocab& fvocab,
                   const TrainConfig& cfg, double lr,
                   long* clamped = nullptr);

struct RlUpdate {
  double loss = 0.0;
  double reward = 0.0;
  double baseline = 0.0;
  std::vector<std::string> sampled;
  long predictor_failures = 0;
};
RlUpdate rl_update(ParamStore& store, const Example& ex,
                   const Vocabulary& vocab, const FeatureVocab& fvocab,
                   const TrainConfig& cfg, Rng& rng, const DasScorer& das,
                   AnswerPredictor* predictor, double lr);

// One step on alpha * xent + beta * rl followed by an Adam update at rl_lr.
struct CombinedUpdate {
  double xent = 0.0;
  double rl = 0.0;
  double reward = 0.0;
  double baseline = 0.0;
  long clamped = 0;
  long predictor_failures = 0;
};
CombinedUpdate combined_step(ParamStore& store, const Example& ex,
                             const Tokens& gold, const Vocabulary& vocab,
                             const FeatureVocab& fvocab,
                             const TrainConfig& cfg, Rng& rng,
                             const DasScorer& das = nullptr,
                             AnswerPredictor* predictor = nullptr);

// Frozen-store evaluation passes over an example subset.
double heldout_xent(const ParamStore& store, const std::vector<Example>& exs,
                    const Vocabulary& vocab, const FeatureVocab& fvocab,
                    const TrainConfig& cfg);
double heldout_reward(const ParamStore& store, const std::vector<Example>& exs,
                      const Vocabulary& vocab, const FeatureVocab& fvocab,
                      const TrainConfig& cfg, const DasScorer& das = nullptr,
                      AnswerPredictor* predictor = nullptr,
                      long* predictor_failures = nullptr);
double pointer_accuracy(const ParamStore& store,
                        const std::vector<Example>& exs,
                        const Vocabulary& vocab, const FeatureVocab& fvocab,
                        const ModelDims& dims);
double exact_match_rate(const ParamStore& store,
                        const std::vector<Example>& exs,
                        const Vocabulary& vocab, const FeatureVocab& fvocab,
                        const TrainConfig& cfg);

// One JSON-serializable metrics record per epoch; fields not meaningful for
// a phase stay at their zero values. Deliberately carries no timing data so
// identical runs emit identical lines.
struct EpochMetrics {
  std::string phase;  // "pointer" | "xent" | "rl"
  int epoch = 0;      // zero-based within the phase
  double train_loss = 0.0;
  double mean_reward = 0.0;
  double baseline_reward = 0.0;
  double heldout_xent = 0.0;
  double heldout_reward = 0.0;
  double pointer_accuracy = 0.0;
  double exact_match = 0.0;
  long clamped_logs = 0;
  long predictor_failures = 0;
  std::string to_json() const;
};

using EpochHook = std::function<void(const EpochMetrics&)>;

// Supervised pretraining: a pointer phase (boundary prediction on gold
// spans) followed by a teacher-forced generator phase. Creates generator and
// pointer parameters when the store lacks them. Held-out metrics use the
// deterministic split; when the split is empty the training set stands in.
std::vector<EpochMetrics> pretrain(ParamStore& store,
                                   const std::vector<Example>& corpus,
                                   const Vocabulary& vocab,
                                   const FeatureVocab& fvocab,
                                   const TrainConfig& cfg,
                                   const EpochHook& hook = {});

// Policy-gradient fine-tuning of a pretrained store with the combined
// objective. Requires generator parameters; a DAS base reward requires a
// scorer. With ANSS enabled and no predictor, a one-line warning goes to the
// error stream and the ANSS weight is redistributed.
std::vector<EpochMetrics> finetune(ParamStore& store,
                                   const std::vector<Example>& corpus,
                                   const Vocabulary& vocab,
                                   const FeatureVocab& fvocab,
                                   const TrainConfig& cfg,
                                   const DasScorer& das = nullptr,
                                   AnswerPredictor* predictor = nullptr,
                                   const EpochHook& hook = {});

}  // namespace qgrl
