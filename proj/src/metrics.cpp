#include "qgrl/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace qgrl {

NgramProfile::NgramProfile(const Tokens& toks, int max_n)
    : max_n_(max_n), length_(static_cast<long>(toks.size())) {
  if (max_n < 1) throw ArgError("n-gram order must be at least 1");
  orders_.resize(static_cast<size_t>(max_n));
  for (int n = 1; n <= max_n; ++n) {
    auto& bucket = orders_[static_cast<size_t>(n - 1)];
    for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i)
      bucket[Tokens(toks.begin() + static_cast<long>(i),
                    toks.begin() + static_cast<long>(i) + n)] += 1;
  }
}

long NgramProfile::total(int n) const {
  if (n < 1 || n > max_n_) throw ArgError("n-gram order out of range");
  return std::max(0L, length_ - n + 1);
}

int NgramProfile::count(int n, const Tokens& gram) const {
  const auto& bucket = grams(n);
  auto it = bucket.find(gram);
  return it == bucket.end() ? 0 : it->second;
}

const std::map<Tokens, int>& NgramProfile::grams(int n) const {
  if (n < 1 || n > max_n_) throw ArgError("n-gram order out of range");
  return orders_[static_cast<size_t>(n - 1)];
}

namespace {

// Clipped matches of candidate n-grams for one order, against the max count
// over the references.
long clipped(const NgramProfile& cand, const std::vector<NgramProfile>& refs,
             int n) {
  long m = 0;
  for (const auto& [gram, c] : cand.grams(n)) {
    int best = 0;
    for (const NgramProfile& r : refs) best = std::max(best, r.count(n, gram));
    m += std::min(c, best);
  }
  return m;
}

size_t closest_ref_length(size_t c, const std::vector<Tokens>& refs) {
  size_t r = refs[0].size();
  for (const Tokens& ref : refs) {
    size_t d_new = ref.size() > c ? ref.size() - c : c - ref.size();
    size_t d_old = r > c ? r - c : c - r;
    if (d_new < d_old || (d_new == d_old && ref.size() < r)) r = ref.size();
  }
  return r;
}

void check_refs(const std::vector<Tokens>& refs, int max_n) {
  if (max_n < 1) throw ArgError("n-gram order must be at least 1");
  if (refs.empty()) throw ArgError("empty reference list");
}

}  // namespace

double precision_n(const Tokens& candidate, const Tokens& reference, int n) {
  if (n < 1) throw ArgError("n-gram order must be at least 1");
  long total = static_cast<long>(candidate.size()) - n + 1;
  if (total <= 0) return 0.0;
  NgramProfile cp(candidate, n), rp(reference, n);
  long m = 0;
  for (const auto& [gram, c] : cp.grams(n))
    m += std::min(c, rp.count(n, gram));
  return static_cast<double>(m) / static_cast<double>(total);
}

double bleu(const Tokens& candidate, const std::vector<Tokens>& references,
            int max_n) {
  check_refs(references, max_n);
  if (candidate.empty()) return 0.0;
  NgramProfile cp(candidate, max_n);
  std::vector<NgramProfile> rps;
  rps.reserve(references.size());
  for (const Tokens& r : references) rps.emplace_back(r, max_n);

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    long t = cp.total(n);
    long m = clipped(cp, rps, n);
    double p;
    if (m > 0) {
      p = static_cast<double>(m) / static_cast<double>(t);
    } else if (n == 1) {
      return 0.0;
    } else {
      p = 1.0 / static_cast<double>(t + 1);
    }
    log_sum += std::log(p);
  }
  size_t c = candidate.size();
  size_t r = closest_ref_length(c, references);
  double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c))
                    : 1.0;
  return bp * std::exp(log_sum / max_n);
}

double corpus_bleu(const std::vector<Tokens>& candidates,
                   const std::vector<std::vector<Tokens>>& references,
                   int max_n) {
  if (max_n < 1) throw ArgError("n-gram order must be at least 1");
  if (candidates.empty() || candidates.size() != references.size())
    throw ArgError("corpus bleu needs equal nonempty candidate/reference lists");
  std::vector<long> match(static_cast<size_t>(max_n), 0);
  std::vector<long> total(static_cast<size_t>(max_n), 0);
  long c_len = 0, r_len = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    check_refs(references[i], max_n);
    NgramProfile cp(candidates[i], max_n);
    std::vector<NgramProfile> rps;
    for (const Tokens& r : references[i]) rps.emplace_back(r, max_n);
    for (int n = 1; n <= max_n; ++n) {
      match[static_cast<size_t>(n - 1)] += clipped(cp, rps, n);
      total[static_cast<size_t>(n - 1)] += cp.total(n);
    }
    c_len += static_cast<long>(candidates[i].size());
    r_len += static_cast<long>(closest_ref_length(candidates[i].size(), references[i]));
  }
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    long m = match[static_cast<size_t>(n - 1)];
    long t = total[static_cast<size_t>(n - 1)];
    if (m == 0 || t == 0) return 0.0;
    log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  double bp = (c_len < r_len && c_len > 0)
                  ? std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len))
                  : 1.0;
  return bp * std::exp(log_sum / max_n);
}

double gleu(const Tokens& candidate, const std::vector<Tokens>& references,
            int max_n) {
  check_refs(references, max_n);
  NgramProfile cp(candidate, max_n);
  double best = 0.0;
  for (const Tokens& ref : references) {
    NgramProfile rp(ref, max_n);
    long m = 0, ctot = 0, rtot = 0;
    for (int n = 1; n <= max_n; ++n) {
      m += clipped(cp, {rp}, n);
      ctot += cp.total(n);
      rtot += rp.total(n);
    }
    double score = 0.0;
    if (ctot > 0 && rtot > 0)
      score = std::min(static_cast<double>(m) / static_cast<double>(ctot),
                       static_cast<double>(m) / static_cast<double>(rtot));
    best = std::max(best, score);
  }
  return best;
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  size_t n = candidate.size(), m = reference.size();
  // Two-row LCS table.
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j)
      cur[j] = candidate[i - 1] == reference[j - 1]
                   ? prev[j - 1] + 1
                   : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  int lcs = prev[m];
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / static_cast<double>(n);
  double r = static_cast<double>(lcs) / static_cast<double>(m);
  const double beta2 = 1.2 * 1.2;
  return (1.0 + beta2) * p * r / (r + beta2 * p);
}

double qss(const Tokens& question, const Tokens& sentence, int max_n) {
  if (max_n < 1) throw ArgError("n-gram order must be at least 1");
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    double p = precision_n(question, sentence, n);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return std::exp(log_sum / max_n);
}

double anss(const Tokens& predicted_answer, const Tokens& pivotal_answer,
            int max_n) {
  if (max_n < 1) throw ArgError("n-gram order must be at least 1");
  int k = std::min({max_n, static_cast<int>(predicted_answer.size()),
                    static_cast<int>(pivotal_answer.size())});
  if (k <= 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= k; ++n) {
    double p = precision_n(predicted_answer, pivotal_answer, n);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return std::exp(log_sum / k);
}

std::string base_metric_name(BaseMetric m) {
  switch (m) {
    case BaseMetric::BLEU: return "bleu";
    case BaseMetric::GLEU: return "gleu";
    case BaseMetric::ROUGE_L: return "rouge_l";
    case BaseMetric::DAS: return "das";
  }
  throw ArgError("unknown base metric");
}

BaseMetric base_metric_from_name(const std::string& name) {
  if (name == "bleu") return BaseMetric::BLEU;
  if (name == "gleu") return BaseMetric::GLEU;
  if (name == "rouge_l") return BaseMetric::ROUGE_L;
  if (name == "das") return BaseMetric::DAS;
  throw ConfigError("unknown base metric: " + name +
                    " (expected bleu, gleu, rouge_l, or das)");
}

void RewardSpec::validate() const {
  if (max_n < 1) throw ConfigError("reward max_n must be at least 1");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != component_count())
      throw ConfigError("reward needs " + std::to_string(component_count()) +
                        " weights, got " + std::to_string(weights.size()));
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("reward weights must be non-negative");
      sum += w;
    }
    if (sum <= 0.0) throw ConfigError("reward weights must not all be zero");
  }
}

std::vector<double> RewardSpec::resolved_weights() const {
  validate();
  int k = component_count();
  if (weights.empty())
    return std::vector<double>(static_cast<size_t>(k), 1.0 / k);
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<double> out(weights);
  for (double& w : out) w /= sum;
  return out;
}

double combined_reward(const RewardSpec& spec, const Tokens& question,
                       const std::vector<Tokens>& golds, const Tokens& sentence,
                       const Tokens& predicted_answer,
                       const Tokens& pivotal_answer,
                       const DasScorer& das_scorer) {
  spec.validate();
  if (golds.empty()) throw ArgError("empty gold question list");
  if (spec.base == BaseMetric::DAS && !das_scorer)
    throw ConfigError("base metric das requires a das scorer");
  if (spec.base != BaseMetric::DAS && das_scorer)
    throw ConfigError("das scorer supplied but base metric is " +
                      base_metric_name(spec.base));

  double base = 0.0;
  // An empty candidate scores zero on every base metric; the word-overlap
  // metrics do this naturally, and the learned scorer cannot embed an empty
  // sequence, so the rule is applied uniformly here.
  for (const Tokens& gold : golds) {
    if (question.empty()) break;
    double s = 0.0;
    switch (spec.base) {
      case BaseMetric::BLEU: s = bleu(question, {gold}, spec.max_n); break;
      case BaseMetric::GLEU: s = gleu(question, {gold}, spec.max_n); break;
      case BaseMetric::ROUGE_L: s = rouge_l(question, gold); break;
      case BaseMetric::DAS: s = das_scorer(question, gold); break;
    }
    if (!std::isfinite(s))
      throw NumericError("non-finite base metric score");
    base = std::max(base, s);
  }

  std::vector<double> parts = {base};
  if (spec.use_qss) parts.push_back(qss(question, sentence, spec.max_n));
  if (spec.use_anss)
    parts.push_back(anss(predicted_answer, pivotal_answer, spec.max_n));

  std::vector<double> w = spec.resolved_weights();
  double out = 0.0;
  for (size_t i = 0; i < parts.size(); ++i) out += w[i] * parts[i];
  return out;
}

}  // namespace qgrl
