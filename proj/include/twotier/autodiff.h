#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "twotier/tensor.h"

namespace twotier {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;
};

// Define-by-run computation graph for reverse-mode differentiation.
//
// Nodes are appended in evaluation order, so the node list is already a
// topological order and backward() is a single reverse sweep. A graph is
// built for one training step and then dropped. Not thread-safe; distinct
// graphs may be used from different threads.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Tensor value);
  // Leaf whose gradient is tracked.
  Var variable(Tensor value);
  // Tracked leaf that refers to `value` without copying it. The tensor must
  // outlive the graph and must not change while the graph is in use.
  Var parameter(const Tensor& value);

  const Tensor& value(Var v) const;
  // Gradient accumulated by the last backward(); zeros if `v` was unreached.
  const Tensor& grad(Var v) const;

  // Fills gradients of the scalar `root` with respect to every node that
  // requires one. Repeated calls start from zeroed accumulators.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Tanh,
    Sigmoid,
    Relu,
    Softmax,
    Concat,
    Sum,
    Scale,
    Transpose,
    StackRows,
    Row,
    ShiftRows,
    AddBias,
    BceLogits,
  };

  struct Node {
    Op op = Op::Leaf;
    bool requires_grad = false;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double scalar = 0.0;
    long offset = 0;
    Tensor owned;
    const Tensor* borrowed = nullptr;
    mutable Tensor grad;
    std::vector<std::uint32_t> inputs;

    const Tensor& val() const { return borrowed ? *borrowed : owned; }
  };

  Var push(Node node);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_slot(std::uint32_t id);
  void backprop_node(std::uint32_t id);

  std::vector<Node> nodes_;

  friend Var matmul(Var a, Var b);
  friend Var add(Var a, Var b);
  friend Var sub(Var a, Var b);
  friend Var mul(Var a, Var b);
  friend Var tanh(Var a);
  friend Var sigmoid(Var a);
  friend Var relu(Var a);
  friend Var softmax(Var a, int axis);
  friend Var concat(Var a, Var b, int axis);
  friend Var sum(Var a);
  friend Var scale(Var a, double c);
  friend Var transpose(Var a);
  friend Var stack_rows(std::span<const Var> rows);
  friend Var row(Var a, std::size_t index);
  friend Var shift_rows(Var a, long offset);
  friend Var add_bias(Var a, Var bias);
  friend Var bce_with_logits(Var logit, double target);
};

// Matrix product of rank-2 operands.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
// Softmax over `axis` of a rank-2 tensor (rank-1 tensors use axis 0).
Var softmax(Var a, int axis);
Var concat(Var a, Var b, int axis);
// Sum of all entries, shape [1].
Var sum(Var a);
Var scale(Var a, double c);
Var transpose(Var a);
// Stacks equally sized row vectors into a k x n matrix.
Var stack_rows(std::span<const Var> rows);
// Row `index` of a matrix as a 1 x n row vector.
Var row(Var a, std::size_t index);
// out[t] = a[t + offset], zero outside the row range.
Var shift_rows(Var a, long offset);
// Adds a 1 x n bias to every row of an m x n matrix.
Var add_bias(Var a, Var bias);
// Binary cross-entropy of sigmoid(logit) against target in [0, 1]; computed
// from the logit to stay finite when the sigmoid saturates.
Var bce_with_logits(Var logit, double target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace twotier
