#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "f3/nn/graph.hpp"
#include "f3/nn/params.hpp"

namespace f3::testing {

struct GradCheckResult {
  double max_rel = 0.0;  // worst relative error among entries above the abs floor
  double max_abs = 0.0;  // worst absolute difference over all entries
  int checked = 0;
  int failures = 0;
  std::string worst;  // parameter and flat index of the worst entry

  bool ok() const { return failures == 0 && checked > 0; }
  void merge(const GradCheckResult& o) {
    max_abs = std::max(max_abs, o.max_abs);
    if (o.max_rel > max_rel) {
      max_rel = o.max_rel;
      worst = o.worst;
    }
    checked += o.checked;
    failures += o.failures;
  }
};

// Central differences over every scalar of `store`. `analytic` must leave
// the gradient of the objective in the store's grad buffers; `value`
// evaluates the objective at the current parameters.
inline GradCheckResult check_gradients(nn::ParameterStore<double>& store,
                                       const std::function<void()>& analytic,
                                       const std::function<double()>& value,
                                       double eps = 1e-4, double rel_tol = 1e-3,
                                       double abs_tol = 1e-6) {
  store.zero_grad();
  analytic();
  GradCheckResult r;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double saved = p.value.data()[k];
      p.value.data()[k] = saved + eps;
      const double up = value();
      p.value.data()[k] = saved - eps;
      const double down = value();
      p.value.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic_k = p.grad.data()[k];
      const double diff = std::abs(numeric - analytic_k);
      ++r.checked;
      r.max_abs = std::max(r.max_abs, diff);
      if (diff <= abs_tol) continue;
      const double rel = diff / std::max(std::abs(numeric), std::abs(analytic_k));
      if (rel > r.max_rel) {
        r.max_rel = rel;
        r.worst = p.name + "[" + std::to_string(k) + "]";
      }
      if (rel >= rel_tol) ++r.failures;
    }
  }
  store.zero_grad();
  return r;
}

// Same, for an objective built on a graph.
inline GradCheckResult check_graph_gradients(
    nn::ParameterStore<double>& store, const std::function<nn::Var(nn::Graph<double>&)>& loss,
    double eps = 1e-4, double rel_tol = 1e-3, double abs_tol = 1e-6) {
  return check_gradients(
      store,
      [&] {
        nn::Graph<double> g(true);
        g.backward(loss(g));
      },
      [&] {
        nn::Graph<double> g(false);
        return g.scalar(loss(g));
      },
      eps, rel_tol, abs_tol);
}

}  // namespace f3::testing
