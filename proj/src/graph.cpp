#include "qgrl/graph.hpp"

#include <cmath>

namespace qgrl {

namespace {

std::string dims(const Mat& m) {
  return "[" + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "]";
}

Graph& same_graph(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw ArgError("uninitialized Var");
  if (a.graph() != b.graph()) throw ArgError("vars belong to different graphs");
  return *a.graph();
}

Graph& graph_of(const Var& a) {
  if (!a.valid()) throw ArgError("uninitialized Var");
  return *a.graph();
}

}  // namespace

const Mat& Var::value() const {
  if (!valid()) throw ArgError("uninitialized Var");
  return g_->node(id_).value;
}

double Var::scalar() const {
  const Mat& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw DimError("scalar() on non-scalar node " + dims(v));
  return v(0, 0);
}

Var Graph::make(Mat value, std::function<void(Graph&, int)> back,
                std::string param) {
  if (backward_done_)
    throw ArgError("graph already differentiated; build a new one");
  Node n;
  n.grad = Mat::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.back = std::move(back);
  n.param = std::move(param);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::input(Mat value) { return make(std::move(value), nullptr); }

Var Graph::input_row(const std::vector<double>& xs) {
  Mat m(1, static_cast<Eigen::Index>(xs.size()));
  for (size_t i = 0; i < xs.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = xs[i];
  return input(std::move(m));
}

Var Graph::zeros(Eigen::Index rows, Eigen::Index cols) {
  return input(Mat::Zero(rows, cols));
}

Var Graph::scalar(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return input(std::move(m));
}

Var Graph::param(const std::string& name) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Var(this, it->second);
  const DenseArray& v = store_->value(name);  // ConfigError when missing
  Var out = make(v.mat(), nullptr, name);
  param_ids_.emplace(name, out.id());
  return out;
}

void Graph::backward(const Var& loss) {
  if (backward_done_) throw ArgError("backward already ran on this graph");
  if (loss.graph() != this) throw ArgError("loss from a different graph");
  const Mat& v = loss.value();
  if (v.rows() != 1 || v.cols() != 1)
    throw DimError("backward needs a scalar loss, got " + dims(v));
  if (!std::isfinite(v(0, 0))) throw NumericError("non-finite loss");
  backward_done_ = true;
  nodes_[loss.id()].grad(0, 0) = 1.0;
  for (int i = loss.id(); i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this, i);
  for (auto& [name, id] : param_ids_)
    store_->grad(name).mat() += nodes_[id].grad;
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Mat& ma = a.value();
  const Mat& mb = b.value();
  int ia = a.id(), ib = b.id();
  if (ma.rows() == mb.rows() && ma.cols() == mb.cols()) {
    return g.make(ma + mb, [ia, ib](Graph& g, int self) {
      g.node(ia).grad += g.node(self).grad;
      g.node(ib).grad += g.node(self).grad;
    });
  }
  if (mb.rows() == 1 && ma.cols() == mb.cols()) {
    Mat out = ma;
    out.rowwise() += mb.row(0);
    return g.make(std::move(out), [ia, ib](Graph& g, int self) {
      g.node(ia).grad += g.node(self).grad;
      g.node(ib).grad += g.node(self).grad.colwise().sum();
    });
  }
  throw DimError("add shapes " + dims(ma) + " vs " + dims(mb));
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Mat& ma = a.value();
  const Mat& mb = b.value();
  if (ma.rows() != mb.rows() || ma.cols() != mb.cols())
    throw DimError("sub shapes " + dims(ma) + " vs " + dims(mb));
  int ia = a.id(), ib = b.id();
  return g.make(ma - mb, [ia, ib](Graph& g, int self) {
    g.node(ia).grad += g.node(self).grad;
    g.node(ib).grad -= g.node(self).grad;
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Mat& ma = a.value();
  const Mat& mb = b.value();
  if (ma.rows() != mb.rows() || ma.cols() != mb.cols())
    throw DimError("mul shapes " + dims(ma) + " vs " + dims(mb));
  int ia = a.id(), ib = b.id();
  return g.make(ma.cwiseProduct(mb), [ia, ib](Graph& g, int self) {
    g.node(ia).grad += g.node(self).grad.cwiseProduct(g.node(ib).value);
    g.node(ib).grad += g.node(self).grad.cwiseProduct(g.node(ia).value);
  });
}

Var cmul(Var a, double c) {
  Graph& g = graph_of(a);
  int ia = a.id();
  return g.make(a.value() * c, [ia, c](Graph& g, int self) {
    g.node(ia).grad += c * g.node(self).grad;
  });
}

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Mat& ma = a.value();
  const Mat& mb = b.value();
  if (ma.cols() != mb.rows())
    throw DimError("matmul shapes " + dims(ma) + " vs " + dims(mb));
  int ia = a.id(), ib = b.id();
  return g.make(ma * mb, [ia, ib](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    g.node(ia).grad.noalias() += d * g.node(ib).value.transpose();
    g.node(ib).grad.noalias() += g.node(ia).value.transpose() * d;
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  int ia = a.id();
  return g.make(a.value().transpose(), [ia](Graph& g, int self) {
    g.node(ia).grad += g.node(self).grad.transpose();
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw ArgError("concat_cols of nothing");
  Graph& g = graph_of(xs[0]);
  Eigen::Index rows = xs[0].rows(), cols = 0;
  for (const Var& x : xs) {
    same_graph(xs[0], x);
    if (x.rows() != rows)
      throw DimError("concat_cols row mismatch " + dims(xs[0].value()) +
                     " vs " + dims(x.value()));
    cols += x.cols();
  }
  Mat out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const Var& x : xs) {
    out.middleCols(at, x.cols()) = x.value();
    ids.push_back(x.id());
    widths.push_back(x.cols());
    at += x.cols();
  }
  return g.make(std::move(out), [ids, widths](Graph& g, int self) {
    Eigen::Index at = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      g.node(ids[k]).grad += g.node(self).grad.middleCols(at, widths[k]);
      at += widths[k];
    }
  });
}

Var stack_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw ArgError("stack_rows of nothing");
  Graph& g = graph_of(xs[0]);
  Eigen::Index cols = xs[0].cols(), rows = 0;
  for (const Var& x : xs) {
    same_graph(xs[0], x);
    if (x.cols() != cols)
      throw DimError("stack_rows column mismatch " + dims(xs[0].value()) +
                     " vs " + dims(x.value()));
    rows += x.rows();
  }
  Mat out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  Eigen::Index at = 0;
  for (const Var& x : xs) {
    out.middleRows(at, x.rows()) = x.value();
    ids.push_back(x.id());
    heights.push_back(x.rows());
    at += x.rows();
  }
  return g.make(std::move(out), [ids, heights](Graph& g, int self) {
    Eigen::Index at = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      g.node(ids[k]).grad += g.node(self).grad.middleRows(at, heights[k]);
      at += heights[k];
    }
  });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index len) {
  Graph& g = graph_of(a);
  const Mat& m = a.value();
  if (begin < 0 || len < 0 || begin + len > m.cols())
    throw DimError("slice_cols [" + std::to_string(begin) + ", +" +
                   std::to_string(len) + ") of " + dims(m));
  int ia = a.id();
  return g.make(m.middleCols(begin, len), [ia, begin, len](Graph& g, int self) {
    g.node(ia).grad.middleCols(begin, len) += g.node(self).grad;
  });
}

Var row(Var m, Eigen::Index i) {
  Graph& g = graph_of(m);
  const Mat& v = m.value();
  if (i < 0 || i >= v.rows())
    throw DimError("row " + std::to_string(i) + " of " + dims(v));
  int im = m.id();
  return g.make(v.row(i), [im, i](Graph& g, int self) {
    g.node(im).grad.row(i) += g.node(self).grad;
  });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  int ia = a.id();
  return g.make(std::move(out), [ia](Graph& g, int self) {
    g.node(ia).grad.array() += g.node(self).grad(0, 0);
  });
}

Var colwise_sum(Var a) {
  Graph& g = graph_of(a);
  int ia = a.id();
  return g.make(a.value().colwise().sum(), [ia](Graph& g, int self) {
    g.node(ia).grad.rowwise() += g.node(self).grad.row(0);
  });
}

Var vtanh(Var a) {
  Graph& g = graph_of(a);
  int ia = a.id();
  return g.make(a.value().array().tanh().matrix(), [ia](Graph& g, int self) {
    const Mat& y = g.node(self).value;
    g.node(ia).grad.array() +=
        g.node(self).grad.array() * (1.0 - y.array().square());
  });
}

Var sigmoid(Var a) {
  Graph& g = graph_of(a);
  const Mat& m = a.value();
  Mat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double x = m.data()[i];
    out.data()[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                           : std::exp(x) / (1.0 + std::exp(x));
  }
  int ia = a.id();
  return g.make(std::move(out), [ia](Graph& g, int self) {
    const Mat& y = g.node(self).value;
    g.node(ia).grad.array() +=
        g.node(self).grad.array() * y.array() * (1.0 - y.array());
  });
}

Var softplus(Var a) {
  Graph& g = graph_of(a);
  const Mat& m = a.value();
  Mat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double x = m.data()[i];
    out.data()[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  int ia = a.id();
  return g.make(std::move(out), [ia](Graph& g, int self) {
    const Mat& x = g.node(ia).value;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double xi = x.data()[i];
      double s = xi >= 0 ? 1.0 / (1.0 + std::exp(-xi))
                         : std::exp(xi) / (1.0 + std::exp(xi));
      g.node(ia).grad.data()[i] += g.node(self).grad.data()[i] * s;
    }
  });
}

Var softmax_rows(Var a) {
  Graph& g = graph_of(a);
  int ia = a.id();
  return g.make(softmax_rows_mat(a.value()), [ia](Graph& g, int self) {
    const Mat& y = g.node(self).value;
    const Mat& dy = g.node(self).grad;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = dy.row(r).dot(y.row(r));
      g.node(ia).grad.row(r).array() +=
          y.row(r).array() * (dy.row(r).array() - dot);
    }
  });
}

Var emin(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Mat& ma = a.value();
  const Mat& mb = b.value();
  if (ma.rows() != mb.rows() || ma.cols() != mb.cols())
    throw DimError("emin shapes " + dims(ma) + " vs " + dims(mb));
  int ia = a.id(), ib = b.id();
  return g.make(ma.cwiseMin(mb), [ia, ib](Graph& g, int self) {
    const Mat& x = g.node(ia).value;
    const Mat& y = g.node(ib).value;
    const Mat& d = g.node(self).grad;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x.data()[i] <= y.data()[i])
        g.node(ia).grad.data()[i] += d.data()[i];
      else
        g.node(ib).grad.data()[i] += d.data()[i];
    }
  });
}

Var pick(Var v, Eigen::Index i) {
  Graph& g = graph_of(v);
  const Mat& m = v.value();
  if (m.rows() != 1) throw DimError("pick expects a single row, got " + dims(m));
  if (i < 0 || i >= m.cols())
    throw DimError("pick index " + std::to_string(i) + " of " + dims(m));
  Mat out(1, 1);
  out(0, 0) = m(0, i);
  int iv = v.id();
  return g.make(std::move(out), [iv, i](Graph& g, int self) {
    g.node(iv).grad(0, i) += g.node(self).grad(0, 0);
  });
}

Var log_floor(Var a, double floor) {
  Graph& g = graph_of(a);
  if (floor <= 0) throw ArgError("log_floor needs a positive floor");
  const Mat& m = a.value();
  Mat out(m.rows(), m.cols());
  long clamped = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double x = m.data()[i];
    if (x < floor) {
      ++clamped;
      out.data()[i] = std::log(floor);
    } else {
      out.data()[i] = std::log(x);
    }
  }
  g.clamped_log_events += clamped;
  int ia = a.id();
  return g.make(std::move(out), [ia, floor](Graph& g, int self) {
    const Mat& x = g.node(ia).value;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x.data()[i] >= floor)
        g.node(ia).grad.data()[i] +=
            g.node(self).grad.data()[i] / x.data()[i];
  });
}

Var copy_mixture(Var vocab_probs, Var attention, Var gate,
                 const std::vector<int>& source_slots, int extended_size) {
  Graph& g = same_graph(vocab_probs, attention);
  same_graph(vocab_probs, gate);
  const Mat& p = vocab_probs.value();
  const Mat& a = attention.value();
  if (p.rows() != 1 || a.rows() != 1)
    throw DimError("copy_mixture expects row vectors, got " + dims(p) +
                   " and " + dims(a));
  if (gate.rows() != 1 || gate.cols() != 1)
    throw DimError("copy_mixture gate must be 1x1");
  if (static_cast<Eigen::Index>(source_slots.size()) != a.cols())
    throw DimError("copy_mixture slots size " +
                   std::to_string(source_slots.size()) + " vs attention " +
                   dims(a));
  if (extended_size < p.cols())
    throw DimError("extended size " + std::to_string(extended_size) +
                   " smaller than vocabulary " + std::to_string(p.cols()));
  for (int s : source_slots)
    if (s < 0 || s >= extended_size)
      throw DimError("source slot " + std::to_string(s) +
                     " outside extended vocabulary");
  double gv = gate.value()(0, 0);
  Mat out = Mat::Zero(1, extended_size);
  out.leftCols(p.cols()) = (1.0 - gv) * p;
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    out(0, source_slots[i]) += gv * a(0, i);
  int ip = vocab_probs.id(), ia = attention.id(), ig = gate.id();
  std::vector<int> slots = source_slots;
  return g.make(std::move(out), [ip, ia, ig, slots](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    const Mat& p = g.node(ip).value;
    const Mat& a = g.node(ia).value;
    double gv = g.node(ig).value(0, 0);
    g.node(ip).grad += (1.0 - gv) * d.leftCols(p.cols());
    double dgate = -p.row(0).dot(d.row(0).head(p.cols()));
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      g.node(ia).grad(0, i) += gv * d(0, slots[i]);
      dgate += a(0, i) * d(0, slots[i]);
    }
    g.node(ig).grad(0, 0) += dgate;
  });
}

Var affine(Graph& g, Var x, const std::string& w_name,
           const std::string& b_name) {
  Var w = g.param(w_name);
  Var b = g.param(b_name);
  if (x.cols() != w.rows())
    throw DimError("affine: input " + dims(x.value()) + " vs " + w_name + " " +
                   dims(w.value()));
  if (b.cols() != w.cols())
    throw DimError("affine: " + b_name + " " + dims(b.value()) + " vs " +
                   w_name + " " + dims(w.value()));
  return add(matmul(x, w), b);
}

LstmState lstm_step(Graph& g, Var x, const LstmState& prev,
                    const std::string& prefix) {
  Var wx = g.param(prefix + ".wx");
  Var wh = g.param(prefix + ".wh");
  Var b = g.param(prefix + ".b");
  if (x.cols() != wx.rows())
    throw DimError("lstm_step: input " + dims(x.value()) + " vs " + prefix +
                   ".wx " + dims(wx.value()));
  if (prev.h.cols() != wh.rows())
    throw DimError("lstm_step: state " + dims(prev.h.value()) + " vs " +
                   prefix + ".wh " + dims(wh.value()));
  Eigen::Index H = wh.rows();
  if (wx.cols() != 4 * H || b.cols() != 4 * H)
    throw DimError("lstm_step: fused gate width mismatch in " + prefix);
  Var z = add(add(matmul(x, wx), matmul(prev.h, wh)), b);
  Var i = sigmoid(slice_cols(z, 0, H));
  Var f = sigmoid(slice_cols(z, H, H));
  Var gc = vtanh(slice_cols(z, 2 * H, H));
  Var o = sigmoid(slice_cols(z, 3 * H, H));
  Var c = add(mul(f, prev.c), mul(i, gc));
  Var h = mul(o, vtanh(c));
  return {h, c};
}

}  // namespace qgrl
