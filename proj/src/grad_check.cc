#include "twotier/grad_check.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "twotier/errors.h"

namespace twotier {

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max(1e-8, std::abs(a[i]) + std::abs(b[i]));
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& value, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite differences need eps > 0");
  Tensor probe = x;
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    double up = value(probe);
    probe[i] = x[i] - eps;
    double down = value(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double grad_check(const GraphFunction& f, const Tensor& x, double eps) {
  Graph g;
  Var leaf = g.variable(x);
  Var root = f(g, leaf);
  g.backward(root);
  Tensor analytic = g.grad(leaf);

  auto value = [&](const Tensor& at) {
    Graph h;
    return h.value(f(h, h.constant(at)))[0];
  };
  Tensor numeric = finite_difference_gradient(value, x, eps);
  return max_relative_error(analytic.data(), numeric.data());
}

double grad_check(const std::function<double(const Tensor&)>& value,
                  const std::function<Tensor(const Tensor&)>& gradient, const Tensor& x, double eps) {
  Tensor analytic = gradient(x);
  if (analytic.size() != x.size()) throw DimensionError("grad_check: gradient size differs from input size");
  Tensor numeric = finite_difference_gradient(value, x, eps);
  return max_relative_error(analytic.data(), numeric.data());
}

double grad_check_params(const std::function<Var(Graph&, std::span<const Var>)>& loss, std::span<Tensor* const> params,
                         double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check_params: eps must be positive");
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> bound;
    for (Tensor* p : params) bound.push_back(g.parameter(*p));
    Var root = loss(g, bound);
    g.backward(root);
    for (Var v : bound) analytic.push_back(g.grad(v));
  }
  auto evaluate = [&] {
    Graph g;
    std::vector<Var> bound;
    for (Tensor* p : params) bound.push_back(g.constant(*p));
    return g.value(loss(g, bound))[0];
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    std::vector<double> numeric(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      double saved = p[i];
      p[i] = saved + eps;
      double up = evaluate();
      p[i] = saved - eps;
      double down = evaluate();
      p[i] = saved;
      numeric[i] = (up - down) / (2.0 * eps);
    }
    worst = std::max(worst, max_relative_error(analytic[k].data(), numeric));
  }
  return worst;
}

}  // namespace twotier
