#include "twotier/autodiff.h"

#include <algorithm>
#include <cmath>

#include "twotier/errors.h"

namespace twotier {

namespace {

void require_same_graph(Var a, Var b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph) throw ContractError(std::string(op) + ": operands from different graphs");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

// c += a * b for row-major a (m x k) and b (k x n).
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- Graph ----

Var Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Graph::Node& Graph::node(Var v) { return nodes_.at(v.id); }
const Graph::Node& Graph::node(Var v) const { return nodes_.at(v.id); }

Var Graph::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::parameter(const Tensor& value) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = true;
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const { return node(v).val(); }

const Tensor& Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) n.grad = Tensor(n.val().shape());
  return n.grad;
}

Tensor& Graph::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.val().shape());
  return n.grad;
}

void Graph::backward(Var root) {
  if (root.graph != this) throw ContractError("backward: root belongs to another graph");
  if (value(root).size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " + shape_string(value(root).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_slot(root.id).fill(1.0);
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    if (!nodes_[id].grad.empty() && nodes_[id].op != Op::Leaf) backprop_node(id);
  }
}

void Graph::backprop_node(std::uint32_t id) {
  // nodes_ is not resized during backward, so references stay valid.
  const Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const Tensor& y = n.val();
  auto wants = [&](std::uint32_t parent) { return nodes_[parent].requires_grad; };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul: {
      const Tensor& a = nodes_[n.a].val();
      const Tensor& b = nodes_[n.b].val();
      std::size_t m = a.rows(), k = a.cols(), p = b.cols();
      if (wants(n.a)) {
        Tensor& ga = grad_slot(n.a);
        // ga += g * b^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < p; ++j) {
            double gij = g[i * p + j];
            if (gij == 0.0) continue;
            for (std::size_t q = 0; q < k; ++q) ga[i * k + q] += gij * b[q * p + j];
          }
        }
      }
      if (wants(n.b)) {
        Tensor& gb = grad_slot(n.b);
        // gb += a^T * g
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t q = 0; q < k; ++q) {
            double aiq = a[i * k + q];
            if (aiq == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) gb[q * p + j] += aiq * g[i * p + j];
          }
        }
      }
      break;
    }
    case Op::Add:
    case Op::Sub: {
      double sign = n.op == Op::Add ? 1.0 : -1.0;
      if (wants(n.a)) axpy(1.0, g.data(), grad_slot(n.a).data());
      if (wants(n.b)) axpy(sign, g.data(), grad_slot(n.b).data());
      break;
    }
    case Op::Mul: {
      const Tensor& a = nodes_[n.a].val();
      const Tensor& b = nodes_[n.b].val();
      if (wants(n.a)) {
        Tensor& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(n.b)) {
        Tensor& gb = grad_slot(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }
    case Op::Tanh: {
      if (!wants(n.a)) break;
      Tensor& ga = grad_slot(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::Sigmoid: {
      if (!wants(n.a)) break;
      Tensor& ga = grad_slot(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::Relu: {
      if (!wants(n.a)) break;
      Tensor& ga = grad_slot(n.a);
      const Tensor& x = nodes_[n.a].val();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : 0.0;
      break;
    }
    case Op::Softmax: {
      if (!wants(n.a)) break;
      Tensor& ga = grad_slot(n.a);
      std::size_t rows = y.rows(), cols = y.cols();
      bool along_cols = n.offset == 1 || y.rank() == 1;
      std::size_t outer = along_cols ? rows : cols;
      std::size_t inner = along_cols ? cols : rows;
      for (std::size_t o = 0; o < outer; ++o) {
        auto idx = [&](std::size_t i) { return along_cols ? o * cols + i : i * cols + o; };
        double s = 0.0;
        for (std::size_t i = 0; i < inner; ++i) s += g[idx(i)] * y[idx(i)];
        for (std::size_t i = 0; i < inner; ++i) ga[idx(i)] += y[idx(i)] * (g[idx(i)] - s);
      }
      break;
    }
    case Op::Concat: {
      const Tensor& a = nodes_[n.a].val();
      const Tensor& b = nodes_[n.b].val();
      if (n.offset == 0) {
        if (wants(n.a)) axpy(1.0, g.data().subspan(0, a.size()), grad_slot(n.a).data());
        if (wants(n.b)) axpy(1.0, g.data().subspan(a.size(), b.size()), grad_slot(n.b).data());
      } else {
        std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          if (wants(n.a)) axpy(1.0, g.data().subspan(r * (ca + cb), ca), grad_slot(n.a).data().subspan(r * ca, ca));
          if (wants(n.b)) {
            axpy(1.0, g.data().subspan(r * (ca + cb) + ca, cb), grad_slot(n.b).data().subspan(r * cb, cb));
          }
        }
      }
      break;
    }
    case Op::Sum: {
      if (!wants(n.a)) break;
      Tensor& ga = grad_slot(n.a);
      for (auto& x : ga.data()) x += g[0];
      break;
    }
    case Op::Scale: {
      if (!wants(n.a)) break;
      axpy(n.scalar, g.data(), grad_slot(n.a).data());
      break;
    }
    case Op::Transpose: {
      if (!wants(n.a)) break;
      Tensor& ga = grad_slot(n.a);
      std::size_t r = y.rows(), c = y.cols();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[j * r + i] += g[i * c + j];
      }
      break;
    }
    case Op::StackRows: {
      std::size_t c = y.cols();
      for (std::size_t r = 0; r < n.inputs.size(); ++r) {
        if (wants(n.inputs[r])) axpy(1.0, g.data().subspan(r * c, c), grad_slot(n.inputs[r]).data());
      }
      break;
    }
    case Op::Row: {
      if (!wants(n.a)) break;
      std::size_t c = y.cols();
      axpy(1.0, g.data(), grad_slot(n.a).data().subspan(static_cast<std::size_t>(n.offset) * c, c));
      break;
    }
    case Op::ShiftRows: {
      if (!wants(n.a)) break;
      Tensor& ga = grad_slot(n.a);
      long rows = static_cast<long>(y.rows());
      std::size_t c = y.cols();
      for (long t = 0; t < rows; ++t) {
        long src = t + n.offset;
        if (src < 0 || src >= rows) continue;
        axpy(1.0, g.data().subspan(static_cast<std::size_t>(t) * c, c),
             ga.data().subspan(static_cast<std::size_t>(src) * c, c));
      }
      break;
    }
    case Op::AddBias: {
      if (wants(n.a)) axpy(1.0, g.data(), grad_slot(n.a).data());
      if (wants(n.b)) {
        Tensor& gb = grad_slot(n.b);
        std::size_t c = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) axpy(1.0, g.data().subspan(r * c, c), gb.data());
      }
      break;
    }
    case Op::BceLogits: {
      if (!wants(n.a)) break;
      double z = nodes_[n.a].val()[0];
      grad_slot(n.a)[0] += g[0] * (stable_sigmoid(z) - n.scalar);
      break;
    }
  }
}

// ---- ops ----

namespace {

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw ContractError("operation on an unbound Var");
  return *a.graph;
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_graph(a, b, "matmul");
  Graph& g = *a.graph;
  const Tensor& x = g.value(a);
  const Tensor& y = g.value(b);
  require_rank2(x, "matmul");
  require_rank2(y, "matmul");
  if (x.cols() != y.rows()) {
    throw DimensionError("matmul: shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()));
  }
  Tensor out({x.rows(), y.cols()});
  gemm_acc(x.data().data(), y.data().data(), out.data().data(), x.rows(), x.cols(), y.cols());
  Graph::Node n;
  n.op = Graph::Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = g.nodes_[a.id].requires_grad || g.nodes_[b.id].requires_grad;
  n.owned = std::move(out);
  return g.push(std::move(n));
}

namespace {

template <typename F>
Tensor zip(const Tensor& x, const Tensor& y, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

#define TWOTIER_BINARY_OP(NAME, OPCODE, EXPR)                                   \
  Var NAME(Var a, Var b) {                                                      \
    require_same_graph(a, b, #NAME);                                            \
    Graph& g = *a.graph;                                                        \
    require_same_shape(g.value(a), g.value(b), #NAME);                          \
    Graph::Node n;                                                              \
    n.op = Graph::Op::OPCODE;                                                   \
    n.a = a.id;                                                                 \
    n.b = b.id;                                                                 \
    n.requires_grad = g.nodes_[a.id].requires_grad || g.nodes_[b.id].requires_grad; \
    n.owned = zip(g.value(a), g.value(b), [](double p, double q) { return EXPR; }); \
    return g.push(std::move(n));                                                \
  }

TWOTIER_BINARY_OP(add, Add, p + q)
TWOTIER_BINARY_OP(sub, Sub, p - q)
TWOTIER_BINARY_OP(mul, Mul, p* q)
#undef TWOTIER_BINARY_OP

#define TWOTIER_UNARY_OP(NAME, OPCODE, EXPR)                           \
  Var NAME(Var a) {                                                    \
    Graph& g = graph_of(a);                                            \
    Graph::Node n;                                                     \
    n.op = Graph::Op::OPCODE;                                          \
    n.a = a.id;                                                        \
    n.requires_grad = g.nodes_[a.id].requires_grad;                    \
    n.owned = map(g.value(a), [](double x) { return EXPR; });          \
    return g.push(std::move(n));                                       \
  }

TWOTIER_UNARY_OP(tanh, Tanh, std::tanh(x))
TWOTIER_UNARY_OP(sigmoid, Sigmoid, stable_sigmoid(x))
TWOTIER_UNARY_OP(relu, Relu, x > 0.0 ? x : 0.0)
#undef TWOTIER_UNARY_OP

Var softmax(Var a, int axis) {
  Graph& g = graph_of(a);
  const Tensor& x = g.value(a);
  if (x.rank() > 2 || axis < 0 || axis > 1 || (x.rank() == 1 && axis != 0)) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_string(x.shape()));
  }
  std::size_t rows = x.rows(), cols = x.cols();
  bool along_cols = axis == 1 || x.rank() == 1;
  std::size_t outer = along_cols ? rows : cols;
  std::size_t inner = along_cols ? cols : rows;
  Tensor out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    auto idx = [&](std::size_t i) { return along_cols ? o * cols + i : i * cols + o; };
    double m = x[idx(0)];
    for (std::size_t i = 1; i < inner; ++i) m = std::max(m, x[idx(i)]);
    double s = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      out[idx(i)] = std::exp(x[idx(i)] - m);
      s += out[idx(i)];
    }
    for (std::size_t i = 0; i < inner; ++i) out[idx(i)] /= s;
  }
  Graph::Node n;
  n.op = Graph::Op::Softmax;
  n.a = a.id;
  n.offset = x.rank() == 1 ? 1 : axis;
  n.requires_grad = g.nodes_[a.id].requires_grad;
  n.owned = std::move(out);
  return g.push(std::move(n));
}

Var concat(Var a, Var b, int axis) {
  require_same_graph(a, b, "concat");
  Graph& g = *a.graph;
  const Tensor& x = g.value(a);
  const Tensor& y = g.value(b);
  Tensor out;
  if (x.rank() == 1 && y.rank() == 1 && axis == 0) {
    std::vector<double> v(x.storage());
    v.insert(v.end(), y.storage().begin(), y.storage().end());
    out = Tensor({v.size()}, std::move(v));
  } else if (x.rank() == 2 && y.rank() == 2 && axis == 0 && x.cols() == y.cols()) {
    std::vector<double> v(x.storage());
    v.insert(v.end(), y.storage().begin(), y.storage().end());
    out = Tensor({x.rows() + y.rows(), x.cols()}, std::move(v));
  } else if (x.rank() == 2 && y.rank() == 2 && axis == 1 && x.rows() == y.rows()) {
    std::size_t ca = x.cols(), cb = y.cols();
    out = Tensor({x.rows(), ca + cb});
    for (std::size_t r = 0; r < x.rows(); ++r) {
      std::copy_n(x.row_span(r).begin(), ca, out.row_span(r).begin());
      std::copy_n(y.row_span(r).begin(), cb, out.row_span(r).begin() + static_cast<long>(ca));
    }
  } else {
    throw DimensionError("concat: shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()) +
                         " along axis " + std::to_string(axis));
  }
  Graph::Node n;
  n.op = Graph::Op::Concat;
  n.a = a.id;
  n.b = b.id;
  n.offset = (x.rank() == 2 && axis == 1) ? 1 : 0;
  n.requires_grad = g.nodes_[a.id].requires_grad || g.nodes_[b.id].requires_grad;
  n.owned = std::move(out);
  return g.push(std::move(n));
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  double s = 0.0;
  for (double x : g.value(a).data()) s += x;
  Graph::Node n;
  n.op = Graph::Op::Sum;
  n.a = a.id;
  n.requires_grad = g.nodes_[a.id].requires_grad;
  n.owned = Tensor::scalar(s);
  return g.push(std::move(n));
}

Var scale(Var a, double c) {
  Graph& g = graph_of(a);
  Graph::Node n;
  n.op = Graph::Op::Scale;
  n.a = a.id;
  n.scalar = c;
  n.requires_grad = g.nodes_[a.id].requires_grad;
  n.owned = map(g.value(a), [c](double x) { return c * x; });
  return g.push(std::move(n));
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  const Tensor& x = g.value(a);
  require_rank2(x, "transpose");
  Tensor out({x.cols(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
  }
  Graph::Node n;
  n.op = Graph::Op::Transpose;
  n.a = a.id;
  n.requires_grad = g.nodes_[a.id].requires_grad;
  n.owned = std::move(out);
  return g.push(std::move(n));
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  Graph& g = graph_of(rows[0]);
  std::size_t c = g.value(rows[0]).size();
  Tensor out({rows.size(), c});
  Graph::Node n;
  n.op = Graph::Op::StackRows;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_same_graph(rows[0], rows[r], "stack_rows");
    const Tensor& x = g.value(rows[r]);
    if (x.size() != c || x.rows() != 1) {
      throw DimensionError("stack_rows: row shapes " + shape_string(g.value(rows[0]).shape()) + " and " +
                           shape_string(x.shape()));
    }
    std::copy(x.storage().begin(), x.storage().end(), out.row_span(r).begin());
    n.inputs.push_back(rows[r].id);
    n.requires_grad = n.requires_grad || g.nodes_[rows[r].id].requires_grad;
  }
  n.owned = std::move(out);
  return g.push(std::move(n));
}

Var row(Var a, std::size_t index) {
  Graph& g = graph_of(a);
  const Tensor& x = g.value(a);
  require_rank2(x, "row");
  if (index >= x.rows()) throw DimensionError("row: index " + std::to_string(index) + " outside " + shape_string(x.shape()));
  auto r = x.row_span(index);
  Graph::Node n;
  n.op = Graph::Op::Row;
  n.a = a.id;
  n.offset = static_cast<long>(index);
  n.requires_grad = g.nodes_[a.id].requires_grad;
  n.owned = Tensor::row(std::vector<double>(r.begin(), r.end()));
  return g.push(std::move(n));
}

Var shift_rows(Var a, long offset) {
  Graph& g = graph_of(a);
  const Tensor& x = g.value(a);
  require_rank2(x, "shift_rows");
  Tensor out(x.shape());
  long rows = static_cast<long>(x.rows());
  for (long t = 0; t < rows; ++t) {
    long src = t + offset;
    if (src < 0 || src >= rows) continue;
    auto from = x.row_span(static_cast<std::size_t>(src));
    std::copy(from.begin(), from.end(), out.row_span(static_cast<std::size_t>(t)).begin());
  }
  Graph::Node n;
  n.op = Graph::Op::ShiftRows;
  n.a = a.id;
  n.offset = offset;
  n.requires_grad = g.nodes_[a.id].requires_grad;
  n.owned = std::move(out);
  return g.push(std::move(n));
}

Var add_bias(Var a, Var bias) {
  require_same_graph(a, bias, "add_bias");
  Graph& g = *a.graph;
  const Tensor& x = g.value(a);
  const Tensor& b = g.value(bias);
  require_rank2(x, "add_bias");
  if (b.size() != x.cols() || b.rows() != 1) {
    throw DimensionError("add_bias: shapes " + shape_string(x.shape()) + " and " + shape_string(b.shape()));
  }
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) axpy(1.0, b.data(), out.row_span(r));
  Graph::Node n;
  n.op = Graph::Op::AddBias;
  n.a = a.id;
  n.b = bias.id;
  n.requires_grad = g.nodes_[a.id].requires_grad || g.nodes_[bias.id].requires_grad;
  n.owned = std::move(out);
  return g.push(std::move(n));
}

Var bce_with_logits(Var logit, double target) {
  Graph& g = graph_of(logit);
  const Tensor& z = g.value(logit);
  if (z.size() != 1) throw DimensionError("bce_with_logits: expected a scalar logit, got " + shape_string(z.shape()));
  double x = z[0];
  double loss = std::max(x, 0.0) - x * target + std::log1p(std::exp(-std::abs(x)));
  Graph::Node n;
  n.op = Graph::Op::BceLogits;
  n.a = logit.id;
  n.scalar = target;
  n.requires_grad = g.nodes_[logit.id].requires_grad;
  n.owned = Tensor::scalar(loss);
  return g.push(std::move(n));
}

}  // namespace twotier
