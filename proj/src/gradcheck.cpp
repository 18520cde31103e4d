#include "qgrl/gradcheck.hpp"

#include <cmath>

namespace qgrl {

FdReport finite_diff_check(const std::function<double(ParamStore&)>& loss_fn,
                           ParamStore& store, double eps, double tol) {
  if (eps <= 0 || tol <= 0) throw ArgError("finite_diff_check: eps and tol must be positive");
  store.zero_grads();
  double base = loss_fn(store);
  if (!std::isfinite(base)) throw NumericError("non-finite loss in finite_diff_check");

  std::map<std::string, Mat> analytic;
  for (const auto& name : store.names()) analytic[name] = store.grad(name).mat();

  FdReport report;
  for (const auto& name : store.names()) {
    Mat& val = store.value(name).mat();
    const Mat& an = analytic[name];
    FdEntry entry;
    entry.name = name;
    for (Eigen::Index i = 0; i < val.size(); ++i) {
      double saved = val.data()[i];
      val.data()[i] = saved + eps;
      double up = loss_fn(store);
      val.data()[i] = saved - eps;
      double down = loss_fn(store);
      val.data()[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("non-finite loss while probing " + name);
      double numeric = (up - down) / (2.0 * eps);
      double a = an.data()[i];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
      double rel = std::abs(a - numeric) / denom;
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    if (entry.max_rel_err > report.max_rel_err) {
      report.max_rel_err = entry.max_rel_err;
      report.worst_param = name;
      report.worst_index = entry.index;
    }
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tol;
  store.zero_grads();
  loss_fn(store);  // leave gradients consistent with the unperturbed point
  return report;
}

}  // namespace qgrl
