#pragma once

#include <functional>

#include "qgrl/param_store.hpp"

namespace qgrl {

class Graph;

// Handle to a node in a Graph. Cheap to copy, valid for the graph's lifetime.
class Var {
 public:
  Var() = default;
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;  // value of a 1x1 node
  int id() const { return id_; }
  Graph* graph() const { return g_; }
  bool valid() const { return g_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : g_(g), id_(id) {}
  Graph* g_ = nullptr;
  int id_ = -1;
};

// Per-step computation record for reverse-mode gradients. Forward values are
// computed eagerly by the free functions below; backward() replays the record
// in reverse and accumulates parameter gradients into the store. A Graph is
// built, differentiated at most once, and discarded.
//
// Forward-only use (decoding with a frozen store) never mutates the store, so
// concurrent graphs over the same frozen store are safe.
class Graph {
 public:
  explicit Graph(ParamStore& store) : store_(&store) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Mat value);
  Var input_row(const std::vector<double>& xs);
  Var zeros(Eigen::Index rows, Eigen::Index cols);
  Var scalar(double x);
  // Store-backed leaf; repeated lookups share one node so gradients pool.
  Var param(const std::string& name);

  // loss must be 1x1 and finite; may be called once per graph.
  void backward(const Var& loss);

  ParamStore& store() { return *store_; }
  long clamped_log_events = 0;  // bumped by log_floor when the floor engages

  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Graph&, int)> back;
    std::string param;  // nonempty for parameter leaves
  };
  Var make(Mat value, std::function<void(Graph&, int)> back,
           std::string param = {});
  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }

 private:
  ParamStore* store_;
  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
  bool backward_done_ = false;
};

// Expression-building free functions. All of them validate operand shapes and
// raise DimError naming the offending shapes.
Var add(Var a, Var b);  // equal shapes, or b a single row broadcast over a
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var cmul(Var a, double c);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& xs);
Var stack_rows(const std::vector<Var>& xs);  // vertical concatenation
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index len);
Var row(Var m, Eigen::Index i);
Var sum(Var a);          // 1x1
Var colwise_sum(Var a);  // 1 x cols
Var vtanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var softmax_rows(Var a);
Var emin(Var a, Var b);  // elementwise min; ties credit the left operand
Var pick(Var v, Eigen::Index i);  // entry i of a single-row vector, 1x1
// Elementwise log(max(x, floor)); clamped entries get zero gradient and are
// counted on the graph for diagnostics.
Var log_floor(Var a, double floor);

// Copy/generate mixture over the extended vocabulary:
//   out[e] = gate * sum_{i: slots[i]==e} attn[i] + (1-gate) * vocab[e]
// where vocab probabilities cover ids < V and source-only ids get no
// generation mass. source_slots maps each source position to its extended id.
Var copy_mixture(Var vocab_probs, Var attention, Var gate,
                 const std::vector<int>& source_slots, int extended_size);

// x*W + b with b broadcast over rows. Parameter names are reported in
// dimension errors.
Var affine(Graph& g, Var x, const std::string& w_name,
           const std::string& b_name);

struct LstmState {
  Var h, c;
};

// Single LSTM cell step. Gate layout in the fused weights is [i f g o], each
// hidden-size wide: wx is (in x 4H), wh is (H x 4H), b is 4H.
LstmState lstm_step(Graph& g, Var x, const LstmState& prev,
                    const std::string& prefix);

}  // namespace qgrl
