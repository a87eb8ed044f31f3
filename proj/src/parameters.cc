#include "twotier/parameters.h"

#include <cmath>

#include "twotier/errors.h"

namespace twotier {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) throw ContractError("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  grads_.emplace_back(value.shape());
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<Var> ParameterSet::bind(Graph& g) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.push_back(g.parameter(v));
  return out;
}

void ParameterSet::accumulate(const Graph& g, const std::vector<Var>& bound, double weight) {
  for (std::size_t i = 0; i < bound.size(); ++i) axpy(weight, g.grad(bound[i]).data(), grads_[i].data());
}

void ParameterSet::zero_grad() {
  for (auto& g : grads_) g.fill(0.0);
}

void ParameterSet::scale_grad(double factor) {
  for (auto& g : grads_) {
    for (auto& x : g.data()) x *= factor;
  }
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& g : grads_) s += squared_norm(g.data());
  return std::sqrt(s);
}

void ParameterSet::clip_grad_norm(double max_norm) {
  double n = grad_norm();
  if (n > max_norm && n > 0.0) scale_grad(max_norm / n);
}

bool ParameterSet::all_finite() const {
  for (const auto& v : values_) {
    if (!v.all_finite()) return false;
  }
  return true;
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void sgd_step(ParameterSet& params, double learning_rate) {
  for (std::size_t i = 0; i < params.size(); ++i) axpy(-learning_rate, params.grad(i).data(), params.value(i).data());
}

Adam::Adam(const ParameterSet& params, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.value(i).shape());
    v_.emplace_back(params.value(i).shape());
  }
}

void Adam::step(ParameterSet& params) {
  ++t_;
  double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params.value(i).data();
    auto g = params.grad(i).data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

}  // namespace twotier
