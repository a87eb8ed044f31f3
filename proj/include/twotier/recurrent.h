#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twotier/autodiff.h"
#include "twotier/parameters.h"
#include "twotier/rng.h"

namespace twotier {

enum class CellKind { SimpleRNN, GRU, LSTM };

std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view name);

// Hidden state of a recurrent cell; `c` is only used by LSTM.
struct CellState {
  Var h;
  Var c;
};

// A recurrent cell whose weights live in a shared ParameterSet.
//
//   SimpleRNN: h' = tanh(x W + h U + b)
//   GRU:       z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
//              g = tanh(x Wg + (r*h) Ug + bg), h' = z*h + (1-z)*g
//   LSTM:      i, f, o = sig(...), g = tanh(...)
//              c' = f*c + i*g, h' = o*tanh(c')
//
// Inputs and states are 1 x n row vectors.
class RecurrentCell {
 public:
  RecurrentCell() = default;
  // Registers "<prefix>.W*", "<prefix>.U*" and "<prefix>.b*" in `params`.
  // Weights are uniform in +-1/sqrt(hidden); biases start at zero, except the
  // LSTM forget bias which starts at one.
  RecurrentCell(CellKind kind, std::string prefix, std::size_t input_dim, std::size_t hidden_dim, ParameterSet& params,
                Rng& rng);

  CellKind kind() const { return kind_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

  // Zero state built as graph constants.
  CellState initial_state(Graph& g) const;
  // `bound` is the result of ParameterSet::bind on the owning set.
  CellState step(const std::vector<Var>& bound, Var x, const CellState& state) const;

 private:
  struct Gate {
    std::size_t w, u, b;
  };
  Var gate_pre(const std::vector<Var>& bound, const Gate& gate, Var x, Var h) const;

  CellKind kind_ = CellKind::GRU;
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  std::vector<Gate> gates_;
};

// Scaled dot-product attention of a 1 x n query over the rows of a k x n key
// matrix. Returns the 1 x k weights and the 1 x n weighted sum of the rows.
struct AttentionResult {
  Var weights;
  Var context;
};
AttentionResult attend(Var query, Var keys);

}  // namespace twotier
