#pragma once

#include <functional>
#include <map>

#include "qgrl/common.hpp"

namespace qgrl {

// Per-order n-gram counts of one token sequence, orders 1..max_n.
class NgramProfile {
 public:
  NgramProfile(const Tokens& toks, int max_n);

  int max_n() const { return max_n_; }
  long total(int n) const;                       // number of n-grams
  int count(int n, const Tokens& gram) const;    // occurrences of one gram
  const std::map<Tokens, int>& grams(int n) const;

 private:
  int max_n_;
  long length_;
  std::vector<std::map<Tokens, int>> orders_;
};

// Clipped n-gram precision of candidate against reference; 0 when the
// candidate has no n-grams.
double precision_n(const Tokens& candidate, const Tokens& reference, int n);

// Sentence-level BLEU used as a reward. Unigram precision is unsmoothed (no
// unigram overlap scores 0); higher orders with zero matches take the
// (m+1)/(t+1) smoothed value so short sequences keep a gradient signal.
// Brevity penalty uses the closest reference length, ties to the shorter.
double bleu(const Tokens& candidate, const std::vector<Tokens>& references,
            int max_n);

// Standard unsmoothed corpus BLEU for evaluation reports.
double corpus_bleu(const std::vector<Tokens>& candidates,
                   const std::vector<std::vector<Tokens>>& references,
                   int max_n);

// Sentence GLEU: min(precision, recall) of all n-gram matches up to max_n,
// best reference wins.
double gleu(const Tokens& candidate, const std::vector<Tokens>& references,
            int max_n);

// ROUGE-L F-measure from the longest common subsequence, beta = 1.2.
double rouge_l(const Tokens& candidate, const Tokens& reference);

// Question-sentence similarity: geometric mean of clipped precisions of the
// question against the sentence for orders 1..max_n; zero propagates.
double qss(const Tokens& question, const Tokens& sentence, int max_n);

// Answer similarity: like qss but over answers, with orders truncated to the
// shorter answer so one-word answers are not forced to zero.
double anss(const Tokens& predicted_answer, const Tokens& pivotal_answer,
            int max_n);

enum class BaseMetric { BLEU, GLEU, ROUGE_L, DAS };

std::string base_metric_name(BaseMetric m);
BaseMetric base_metric_from_name(const std::string& name);

// Which reward components are enabled and how they are mixed. The base metric
// is always on; qss and anss are optional add-ons. Weights, when given, are
// one per enabled component in order [base, qss, anss] and are normalized.
struct RewardSpec {
  BaseMetric base = BaseMetric::BLEU;
  bool use_qss = false;
  bool use_anss = false;
  std::vector<double> weights;  // empty = equal
  int max_n = 4;

  int component_count() const { return 1 + (use_qss ? 1 : 0) + (use_anss ? 1 : 0); }
  void validate() const;
  std::vector<double> resolved_weights() const;
};

using DasScorer = std::function<double(const Tokens& question, const Tokens& gold)>;

// Weighted mix of the enabled components. The base metric is scored against
// each gold question separately and the best gold wins; QSS compares the
// question to the source sentence; ANSS compares the two answers. A DAS
// scorer must be supplied exactly when base = DAS.
double combined_reward(const RewardSpec& spec, const Tokens& question,
                       const std::vector<Tokens>& golds, const Tokens& sentence,
                       const Tokens& predicted_answer,
                       const Tokens& pivotal_answer,
                       const DasScorer& das_scorer = nullptr);

}  // namespace qgrl
