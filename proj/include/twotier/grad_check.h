#pragma once

#include <functional>
#include <span>

#include "twotier/autodiff.h"

namespace twotier {

// Builds a scalar graph node from the leaf `x`.
using GraphFunction = std::function<Var(Graph&, Var x)>;

// Largest relative disagreement between two gradients:
// max_i |a_i - b_i| / max(1e-8, |a_i| + |b_i|).
double max_relative_error(std::span<const double> a, std::span<const double> b);

// Central-difference gradient of `value` at `x` with step `eps`.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& value, const Tensor& x, double eps);

// Compares the reverse-mode gradient of `f` at `x` with central differences.
double grad_check(const GraphFunction& f, const Tensor& x, double eps);

// Same comparison for a hand-written gradient.
double grad_check(const std::function<double(const Tensor&)>& value,
                  const std::function<Tensor(const Tensor&)>& gradient, const Tensor& x, double eps);

// Checks the gradient of a loss with respect to several parameter tensors at
// once. `loss` receives one bound Var per entry of `params`, in order. The
// tensors are perturbed in place and restored before returning.
double grad_check_params(const std::function<Var(Graph&, std::span<const Var>)>& loss, std::span<Tensor* const> params,
                         double eps);

}  // namespace twotier
