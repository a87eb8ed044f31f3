#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twotier/autodiff.h"
#include "twotier/tensor.h"

namespace twotier {

// Named trainable tensors with matching gradient accumulators.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor& value(std::size_t i) { return values_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  Tensor& grad(std::size_t i) { return grads_.at(i); }
  const Tensor& grad(std::size_t i) const { return grads_.at(i); }
  std::optional<std::size_t> find(const std::string& name) const;

  // Registers every tensor as a parameter leaf of `g`, in index order.
  std::vector<Var> bind(Graph& g) const;
  // Adds weight * (gradient of each bound leaf) into the accumulators.
  void accumulate(const Graph& g, const std::vector<Var>& bound, double weight = 1.0);

  void zero_grad();
  void scale_grad(double factor);
  double grad_norm() const;
  // Rescales gradients so their global L2 norm is at most `max_norm`.
  void clip_grad_norm(double max_norm);
  bool all_finite() const;
  std::size_t parameter_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
};

void sgd_step(ParameterSet& params, double learning_rate);

class Adam {
 public:
  explicit Adam(const ParameterSet& params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(ParameterSet& params);
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace twotier
