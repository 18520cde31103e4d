#pragma once

#include <map>

#include "qgrl/dense.hpp"
#include "qgrl/rng.hpp"

namespace qgrl {

enum class Init { Zero, Uniform };  // Uniform draws from U(-0.08, 0.08)

// Named parameter arrays with paired gradient buffers and Adam moments.
// Backed by a sorted map so every pass over the store is deterministic.
class ParamStore {
 public:
  DenseArray& create(const std::string& name, const Shape& shape, Init init,
                     Rng* rng = nullptr);
  void insert(const std::string& name, DenseArray value);

  bool has(const std::string& name) const;
  const DenseArray& value(const std::string& name) const;
  DenseArray& value(const std::string& name);
  const DenseArray& grad(const std::string& name) const;
  DenseArray& grad(const std::string& name);

  void zero_grads();
  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }
  long step_count() const { return step_count_; }

 private:
  struct Entry {
    DenseArray value;
    DenseArray grad;
    Mat m, v;  // Adam moments, allocated on first update
    long t = 0;
  };
  std::map<std::string, Entry> entries_;
  long step_count_ = 0;

  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  friend void adam_step(ParamStore&, double);
  friend bool bitwise_equal(const ParamStore&, const ParamStore&);
};

// Bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-8). Entries whose
// gradient is identically zero are skipped, so a no-op gradient never moves
// parameters or moments. A NaN/Inf gradient anywhere aborts the whole update
// (NumericError) before any value is touched. Gradients are cleared on
// success.
void adam_step(ParamStore& store, double lr);

// True when both stores hold the same names with bit-identical values.
bool bitwise_equal(const ParamStore& a, const ParamStore& b);

}  // namespace qgrl
