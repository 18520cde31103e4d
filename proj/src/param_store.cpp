#include "qgrl/param_store.hpp"

#include <cmath>
#include <cstring>

namespace qgrl {

DenseArray& ParamStore::create(const std::string& name, const Shape& shape,
                               Init init, Rng* rng) {
  if (entries_.count(name))
    throw ArgError("parameter already exists: " + name);
  Entry e;
  e.value = DenseArray::zeros(shape);
  e.grad = DenseArray::zeros(shape);
  if (init == Init::Uniform) {
    if (!rng) throw ArgError("uniform init needs an Rng: " + name);
    double* p = e.value.mat().data();
    for (Eigen::Index i = 0; i < e.value.size(); ++i)
      p[i] = rng->uniform(-0.08, 0.08);
  }
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

void ParamStore::insert(const std::string& name, DenseArray value) {
  if (entries_.count(name))
    throw ArgError("parameter already exists: " + name);
  Entry e;
  e.grad = DenseArray::zeros(value.shape());
  e.value = std::move(value);
  entries_.emplace(name, std::move(e));
}

bool ParamStore::has(const std::string& name) const {
  return entries_.count(name) != 0;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter: " + name);
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter: " + name);
  return it->second;
}

const DenseArray& ParamStore::value(const std::string& name) const {
  return entry(name).value;
}
DenseArray& ParamStore::value(const std::string& name) {
  return entry(name).value;
}
const DenseArray& ParamStore::grad(const std::string& name) const {
  return entry(name).grad;
}
DenseArray& ParamStore::grad(const std::string& name) {
  return entry(name).grad;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.mat().setZero();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (auto& [name, e] : entries_) out.push_back(name);
  return out;
}

void adam_step(ParamStore& store, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (auto& [name, e] : store.entries_)
    if (!e.grad.all_finite())
      throw NumericError("non-finite gradient for " + name + "; update aborted");
  for (auto& [name, e] : store.entries_) {
    const Mat& g = e.grad.mat();
    if ((g.array() == 0.0).all()) continue;
    if (e.m.size() == 0) {
      e.m = Mat::Zero(g.rows(), g.cols());
      e.v = Mat::Zero(g.rows(), g.cols());
    }
    e.t += 1;
    e.m = b1 * e.m + (1.0 - b1) * g;
    e.v = (b2 * e.v.array() + (1.0 - b2) * g.array().square()).matrix();
    double c1 = 1.0 - std::pow(b1, static_cast<double>(e.t));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(e.t));
    Eigen::ArrayXXd mhat = e.m.array() / c1;
    Eigen::ArrayXXd vhat = e.v.array() / c2;
    e.value.mat().array() -= lr * mhat / (vhat.sqrt() + eps);
    if (!e.value.all_finite())
      throw NumericError("non-finite value after update of " + name);
  }
  store.step_count_ += 1;
  store.zero_grads();
}

bool bitwise_equal(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  auto ia = a.entries_.begin();
  auto ib = b.entries_.begin();
  for (; ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    const Mat& ma = ia->second.value.mat();
    const Mat& mb = ib->second.value.mat();
    if (ma.rows() != mb.rows() || ma.cols() != mb.cols()) return false;
    if (ma.size() &&
        std::memcmp(ma.data(), mb.data(), sizeof(double) * ma.size()) != 0)
      return false;
  }
  return true;
}

}  // namespace qgrl
