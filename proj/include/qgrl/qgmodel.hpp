#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qgrl/corpus.hpp"
#include "qgrl/graph.hpp"
#include "qgrl/rng.hpp"
#include "qgrl/vocab.hpp"

namespace qgrl {

// Layer sizes for the generator and the answer pointer. Every parameter
// created by init_generator / init_pointer derives its shape from these.
struct ModelDims {
  int word_dim = 64;    // word embedding width
  int feat_dim = 8;     // each categorical feature embedding width
  int enc_hidden = 64;  // encoder hidden size per direction, per layer
  int enc_layers = 2;   // stacked bidirectional encoder layers
  int dec_hidden = 128; // decoder hidden size
  int att_dim = 64;     // attention bottleneck
  int ptr_hidden = 64;  // pointer encoder hidden size per direction (1 layer)
  int ptr_att_dim = 64; // pointer scoring bottleneck
  int max_span = 8;     // widest answer span the pointer may select

  int enc_input_dim() const { return word_dim + 4 * feat_dim; }
  int enc_out_dim() const { return 2 * enc_hidden; }
  int ptr_input_dim() const { return word_dim + 3 * feat_dim; }
  int ptr_out_dim() const { return 2 * ptr_hidden; }
};

// Per-example extension of the generation vocabulary with the sentence's
// out-of-vocabulary words, so the copy mechanism can emit them. Slots < base
// vocabulary size are ordinary token ids; slot base+i is oov_words[i].
struct ExtendedVocab {
  int base_size = 0;
  std::vector<std::string> oov_words;  // first-occurrence order
  std::vector<int> source_slots;       // extended id of each source position

  int extended_size() const {
    return base_size + static_cast<int>(oov_words.size());
  }
  // Surface form of an extended id.
  std::string slot_token(int slot, const Vocabulary& vocab) const;
  // Extended id a question token should be scored against: the vocabulary id
  // when in vocabulary, else the source OOV slot, else the unknown id.
  int target_id(const std::string& token, const Vocabulary& vocab) const;
};

ExtendedVocab build_extended(const Tokens& sentence, const Vocabulary& vocab);

// Encoder result: per-position concatenated [forward; backward] states of the
// top layer, plus the final state pair used to initialize the decoder.
struct EncoderOutput {
  Var h;   // (T, 2*enc_hidden)
  Var s0;  // (1, 2*enc_hidden) = [last forward state, last backward state]
};

// Decoder recurrent state plus the running coverage vector. wcv is all zeros
// before the first step and accumulates each step's attention afterwards, so
// it is elementwise nondecreasing over a decode.
struct DecoderState {
  Var s;                      // (1, dec_hidden)
  Var c;                      // (1, dec_hidden)
  Var wcv;                    // (1, T)
  std::vector<int> emitted;   // extended ids produced so far
};

// One decode step's distributions. attention, p and p_star are single-row
// distributions (each sums to 1); p_cg is the scalar copy gate in [0, 1];
// penalty = sum_i min(attention_i, wcv_i before the step), a scalar in [0, 1].
struct StepDistribution {
  Var attention;  // (1, T)
  Var p_cg;       // (1, 1)
  Var p;          // (1, V)
  Var p_star;     // (1, extended_size)
  Var context;    // (1, 2*enc_hidden)
  Var penalty;    // (1, 1)
};

struct AnswerSpan {
  int start = 0;
  int end = 0;  // inclusive
  double log_prob = 0.0;
};

// Creates all generator parameters (prefix "gen.") in the store. Embedding
// tables are sized from the vocabularies; everything else from dims.
void init_generator(ParamStore& store, const ModelDims& dims, int vocab_size,
                    const FeatureVocab& fvocab, Rng& rng);
// Creates all pointer parameters (prefix "ptr."). The pointer has its own
// embeddings and a single-layer bidirectional encoder over word, POS, NER and
// case features (no answer-position feature: spans are what it predicts).
void init_pointer(ParamStore& store, const ModelDims& dims, int vocab_size,
                  const FeatureVocab& fvocab, Rng& rng);

// Runs the feature-augmented stacked bidirectional encoder over the example's
// sentence. Input per position is the concatenation of word, POS, NER, case
// and answer-position embeddings; a missing answer span yields all-O position
// tags. Unknown words use the unknown embedding.
EncoderOutput encode(Graph& g, const Example& ex, const Vocabulary& vocab,
                     const FeatureVocab& fvocab, const ModelDims& dims);

// tanh-affine maps from the encoder's final state to the decoder's initial
// hidden and cell state; coverage starts at zero.
DecoderState decoder_init(Graph& g, const EncoderOutput& enc,
                          const ModelDims& dims);

// Coverage-aware attention over the encoder states:
//   e_i = v . tanh(h_i W_enc + s W_dec + wcv_i W_cov + b)
// softmax-normalized, with context = sum_i a_i h_i. With use_coverage false
// the wcv term is omitted entirely; a zero W_cov makes the two paths agree
// exactly on the same inputs.
std::pair<Var, Var> attend(Graph& g, const EncoderOutput& enc,
                           const DecoderState& state, const ModelDims& dims,
                           bool use_coverage = true);

// Advances the decoder by one step: consumes the previous token (extended ids
// outside the base vocabulary feed the unknown embedding), recomputes
// attention, the copy gate, the vocabulary distribution and the copy/generate
// mixture over the extended vocabulary, and returns the new state with
// wcv += attention. The returned penalty uses the coverage vector from before
// the update.
std::pair<StepDistribution, DecoderState> decode_step(
    Graph& g, const EncoderOutput& enc, const DecoderState& state,
    int prev_token, const ExtendedVocab& ext, const ModelDims& dims);

// Teacher-forced decode of a fixed target sequence of extended ids (the
// trailing end token included). logps[t] = log of the mixture probability of
// target_ids[t], floored at 1e-12.
struct ForcedDecode {
  std::vector<StepDistribution> steps;
  std::vector<Var> logps;
};
ForcedDecode force_decode(Graph& g, const Example& ex, const Vocabulary& vocab,
                          const FeatureVocab& fvocab, const ExtendedVocab& ext,
                          const ModelDims& dims,
                          const std::vector<int>& target_ids);

// Greedy argmax decoding with a frozen store (never mutates parameters).
// Ties pick the lowest extended id; decoding stops at the end token or after
// max_len steps. When the argmax is the unknown token the emitted surface
// token is the source word with the highest attention (earliest position on
// ties); the fed-back id stays the unknown id.
struct GreedyTrace {
  std::vector<double> gate;        // p_cg per emitted step
  std::vector<int> top_attention;  // argmax source position per emitted step
};
std::vector<std::string> greedy_decode(const Example& ex,
                                       const Vocabulary& vocab,
                                       const FeatureVocab& fvocab,
                                       const ParamStore& store,
                                       const ModelDims& dims, int max_len,
                                       GreedyTrace* trace = nullptr);

// Ancestral sampling from the stepwise mixture. ids holds every sampled
// extended id (the end token included when sampled); tokens holds the surface
// forms of the non-terminal ids with the unknown-substitution rule applied;
// logps[t] is the graph-backed log probability of ids[t] (floored at 1e-12),
// so policy-gradient losses can backpropagate through it.
struct SampleResult {
  std::vector<std::string> tokens;
  std::vector<int> ids;
  std::vector<Var> logps;
};
SampleResult sample_decode(Graph& g, const Example& ex,
                           const Vocabulary& vocab,
                           const FeatureVocab& fvocab, const ModelDims& dims,
                           Rng& rng, int max_len);

// Start/end pointer distributions over source positions.
struct PointerOutput {
  Var p_start;  // (1, T)
  Var p_end;    // (1, T)
};
PointerOutput pointer_forward(Graph& g, const Example& ex,
                              const Vocabulary& vocab,
                              const FeatureVocab& fvocab,
                              const ModelDims& dims);

// Highest joint-probability valid span: start <= end and
// end - start < max_span, ties broken by smallest start then smallest end.
AnswerSpan best_span(const Mat& p_start, const Mat& p_end, int max_span);

// Frozen-store prediction: pointer_forward + best_span.
AnswerSpan point_answer(const Example& ex, const Vocabulary& vocab,
                        const FeatureVocab& fvocab, const ParamStore& store,
                        const ModelDims& dims);

// -log p_start[gold.start] - log p_end[gold.end], floored at 1e-12.
Var pointer_loss(Graph& g, const PointerOutput& po, const Span& gold);

}  // namespace qgrl
