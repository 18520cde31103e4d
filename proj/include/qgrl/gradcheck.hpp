#pragma once

#include <functional>

#include "qgrl/param_store.hpp"

namespace qgrl {

struct FdEntry {
  std::string name;
  double max_rel_err = 0.0;
  Eigen::Index index = -1;  // flat index of the worst component
  double analytic = 0.0;
  double numeric = 0.0;
};

struct FdReport {
  bool pass = true;
  double max_rel_err = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  std::vector<FdEntry> entries;
};

// Central-difference check of every component of every parameter in the
// store. loss_fn must be a deterministic function of the store's values that
// returns the loss and leaves its gradients in the store (zero, forward,
// backward). The +/-eps probes reuse loss_fn and discard the gradients it
// writes; a final call at the base point leaves the store's gradients
// consistent. Relative error uses max(|analytic|, |numeric|, 1e-4) as the
// denominator so near-zero components compare absolutely.
FdReport finite_diff_check(const std::function<double(ParamStore&)>& loss_fn,
                           ParamStore& store, double eps, double tol);

}  // namespace qgrl
