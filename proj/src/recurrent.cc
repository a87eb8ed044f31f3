#include "twotier/recurrent.h"

#include <cmath>

#include "twotier/errors.h"

namespace twotier {

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::SimpleRNN:
      return "rnn";
    case CellKind::GRU:
      return "gru";
    case CellKind::LSTM:
      return "lstm";
  }
  return "?";
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "rnn") return CellKind::SimpleRNN;
  if (name == "gru") return CellKind::GRU;
  if (name == "lstm") return CellKind::LSTM;
  throw ContractError("unknown cell kind '" + std::string(name) + "' (expected rnn, gru or lstm)");
}

RecurrentCell::RecurrentCell(CellKind kind, std::string prefix, std::size_t input_dim, std::size_t hidden_dim,
                             ParameterSet& params, Rng& rng)
    : kind_(kind), input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ContractError("RecurrentCell: dimensions must be positive");
  static constexpr const char* kSimple[] = {""};
  static constexpr const char* kGru[] = {"z", "r", "g"};
  static constexpr const char* kLstm[] = {"i", "f", "o", "g"};
  std::span<const char* const> names;
  switch (kind) {
    case CellKind::SimpleRNN:
      names = kSimple;
      break;
    case CellKind::GRU:
      names = kGru;
      break;
    case CellKind::LSTM:
      names = kLstm;
      break;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto random = [&](std::size_t r, std::size_t c) {
    Tensor t({r, c});
    for (auto& x : t.data()) x = rng.uniform(-bound, bound);
    return t;
  };
  for (const char* n : names) {
    std::string suffix(n);
    Gate gate;
    gate.w = params.add(prefix + ".W" + suffix, random(input_dim, hidden_dim));
    gate.u = params.add(prefix + ".U" + suffix, random(hidden_dim, hidden_dim));
    double bias = kind == CellKind::LSTM && suffix == "f" ? 1.0 : 0.0;
    gate.b = params.add(prefix + ".b" + suffix, Tensor({1, hidden_dim}, bias));
    gates_.push_back(gate);
  }
}

CellState RecurrentCell::initial_state(Graph& g) const {
  CellState s;
  s.h = g.constant(Tensor({1, hidden_dim_}));
  s.c = kind_ == CellKind::LSTM ? g.constant(Tensor({1, hidden_dim_})) : s.h;
  return s;
}

Var RecurrentCell::gate_pre(const std::vector<Var>& bound, const Gate& gate, Var x, Var h) const {
  return matmul(x, bound.at(gate.w)) + matmul(h, bound.at(gate.u)) + bound.at(gate.b);
}

CellState RecurrentCell::step(const std::vector<Var>& bound, Var x, const CellState& state) const {
  switch (kind_) {
    case CellKind::SimpleRNN:
      return {tanh(gate_pre(bound, gates_[0], x, state.h)), state.c};
    case CellKind::GRU: {
      Var z = sigmoid(gate_pre(bound, gates_[0], x, state.h));
      Var r = sigmoid(gate_pre(bound, gates_[1], x, state.h));
      const Gate& gg = gates_[2];
      Var cand = tanh(matmul(x, bound.at(gg.w)) + matmul(r * state.h, bound.at(gg.u)) + bound.at(gg.b));
      // z*h + (1-z)*cand, written without a ones constant.
      Var h = cand + z * (state.h - cand);
      return {h, h};
    }
    case CellKind::LSTM: {
      Var i = sigmoid(gate_pre(bound, gates_[0], x, state.h));
      Var f = sigmoid(gate_pre(bound, gates_[1], x, state.h));
      Var o = sigmoid(gate_pre(bound, gates_[2], x, state.h));
      Var cand = tanh(gate_pre(bound, gates_[3], x, state.h));
      Var c = f * state.c + i * cand;
      return {o * tanh(c), c};
    }
  }
  throw ContractError("RecurrentCell: unknown kind");
}

AttentionResult attend(Var query, Var keys) {
  const Tensor& k = keys.graph->value(keys);
  double scale_factor = 1.0 / std::sqrt(static_cast<double>(k.cols()));
  Var scores = scale(matmul(query, transpose(keys)), scale_factor);
  Var weights = softmax(scores, 1);
  return {weights, matmul(weights, keys)};
}

}  // namespace twotier
