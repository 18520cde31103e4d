#pragma once

#include <cstdint>

#include "qgrl/graph.hpp"
#include "qgrl/vocab.hpp"

namespace qgrl {

// Decomposable-attention similarity scorer. Embeds both questions with its
// own table (never shared with the generator), inter-attends them by
// embedding dot products, compares each token with its cross-context through
// a small feed-forward net per side, sum-aggregates, and squashes a final
// linear map to (0,1).
struct DasDims {
  int dim = 32;      // embedding size
  int hidden = 64;   // comparison-net hidden layer
  int compare = 32;  // comparison-net output
};

struct DasModel {
  DasDims dims;
  int vocab_size = 0;
  ParamStore store;

  static DasModel init(int vocab_size, const DasDims& dims, uint64_t seed);
};

// Rows = embeddings of the given token ids from the model table "das.emb".
Var das_embed(Graph& g, const std::vector<int>& ids);

struct CrossAttention {
  Var gen_attn;   // |gen| x |gold|, rows sum to 1
  Var gold_attn;  // |gold| x |gen|, rows sum to 1
  Var gen_ctx;    // |gen| x d, per generated token: attended gold mix
  Var gold_ctx;   // |gold| x d
};

CrossAttention cross_attend(Graph& g, Var e_gen, Var e_gold);

// Pre-squash matching score (1x1). The graph must be bound to the model's
// own store.
Var das_logit(const DasModel& model, Graph& g, const std::vector<int>& gen_ids,
              const std::vector<int>& gold_ids);

// Forward-only score in (0,1); safe on a frozen model.
double das_score(const DasModel& model, const std::vector<int>& gen_ids,
                 const std::vector<int>& gold_ids);

struct DasPair {
  std::vector<int> a, b;
  int label = 0;  // 1 = same meaning
};

// Mean binary cross-entropy of the batch, built on g for backprop.
Var das_bce_loss(const DasModel& model, Graph& g,
                 const std::vector<DasPair>& batch);

struct DasTrainConfig {
  int epochs = 20;
  double lr = 3e-3;
  double heldout_fraction = 0.2;  // every k-th pair held out, k = 1/fraction
  uint64_t seed = 1;
};

struct DasReport {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  double final_loss = 0.0;         // mean training loss after the last epoch
  double heldout_accuracy = 0.0;   // threshold 0.5; training pairs if no holdout
};

// Adam over per-pair cross-entropy. Both labels must be present in pairs.
// Zero epochs leaves the model untouched and just evaluates.
DasReport train_das(DasModel& model, const std::vector<DasPair>& pairs,
                    const DasTrainConfig& cfg);

// Labeled pairs from a corpus: positives are two gold questions of the same
// example plus word-rotation paraphrases of single questions (same bag of
// words, different order); negatives pair questions from different examples,
// balanced one per positive.
std::vector<DasPair> make_pair_dataset(const std::vector<Example>& corpus,
                                       const Vocabulary& vocab, uint64_t seed);

}  // namespace qgrl
