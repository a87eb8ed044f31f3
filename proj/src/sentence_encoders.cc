#include "twotier/sentence_encoders.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "twotier/errors.h"
#include "twotier/rng.h"

namespace twotier {

std::string_view to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::Max:
      return "max";
    case PoolingMode::Min:
      return "min";
    case PoolingMode::Avg:
      return "avg";
  }
  return "?";
}

Vector pool(const std::vector<Vector>& vectors, PoolingMode mode) {
  if (vectors.empty()) throw ContractError("pool: empty vector list");
  const std::size_t dim = vectors[0].size();
  Vector out = vectors[0];
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.size() != dim) throw DimensionError("pool: vectors of length " + std::to_string(dim) + " and " +
                                              std::to_string(v.size()));
    for (std::size_t k = 0; k < dim; ++k) {
      switch (mode) {
        case PoolingMode::Max:
          out[k] = std::max(out[k], v[k]);
          break;
        case PoolingMode::Min:
          out[k] = std::min(out[k], v[k]);
          break;
        case PoolingMode::Avg:
          out[k] += v[k];
          break;
      }
    }
  }
  if (mode == PoolingMode::Avg) {
    // Summing each dimension in sorted order makes the mean bit-identical
    // under any permutation of the inputs.
    std::vector<double> column(vectors.size());
    for (std::size_t k = 0; k < dim; ++k) {
      for (std::size_t i = 0; i < vectors.size(); ++i) column[i] = vectors[i][k];
      std::sort(column.begin(), column.end());
      double total = 0.0;
      for (double x : column) total += x;
      out[k] = total / static_cast<double>(vectors.size());
    }
  }
  return out;
}

Vector attention_weights(std::span<const double> decoder_state, const std::vector<Vector>& encoder_states) {
  if (encoder_states.empty()) throw ContractError("attention_weights: no encoder states");
  Graph g;
  std::vector<Var> rows;
  for (const auto& s : encoder_states) rows.push_back(g.constant(Tensor::row(s)));
  Var query = g.constant(Tensor::row(Vector(decoder_state.begin(), decoder_state.end())));
  auto res = attend(query, stack_rows(rows));
  auto w = g.value(res.weights).data();
  return {w.begin(), w.end()};
}

void Seq2SeqConfig::validate() const {
  if (!(teacher_forcing >= 0.0 && teacher_forcing <= 1.0)) {
    throw ContractError("Seq2SeqConfig: teacher_forcing must lie in [0, 1]");
  }
  if (!(learning_rate >= 0.0)) throw ContractError("Seq2SeqConfig: learning_rate must be >= 0");
  if (!(final_lr_factor >= 0.0 && final_lr_factor <= 1.0)) {
    throw ContractError("Seq2SeqConfig: final_lr_factor must lie in [0, 1]");
  }
  if (max_len < 1) throw ContractError("Seq2SeqConfig: max_len must be >= 1");
  if (train_subset < 1) throw ContractError("Seq2SeqConfig: train_subset must be >= 1");
}

Seq2SeqModel::Seq2SeqModel(const Seq2SeqConfig& config, std::size_t word_dim) : config_(config), word_dim_(word_dim) {
  config.validate();
  if (word_dim == 0) throw ContractError("Seq2SeqModel: word dimension must be positive");
  if (config.hidden_dim != 0 && config.hidden_dim != word_dim) {
    throw ContractError("Seq2SeqModel: hidden_dim " + std::to_string(config.hidden_dim) +
                        " must equal the word dimension " + std::to_string(word_dim));
  }
  config_.hidden_dim = word_dim;
  const std::size_t h = word_dim;
  Rng rng(derive_seed(config.seed, "seq2seq.init"));
  encoder_ = RecurrentCell(config.cell, "encoder", word_dim, h, params_, rng);
  decoder_ = RecurrentCell(config.cell, "decoder", config.attention ? word_dim + h : word_dim, h, params_, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  Tensor w({h, word_dim});
  for (auto& x : w.data()) x = rng.uniform(-bound, bound);
  out_w_ = params_.add("output.W", std::move(w));
  out_b_ = params_.add("output.b", Tensor({1, word_dim}));
  sos_.assign(word_dim, 0.0);
  eos_.assign(word_dim, 0.0);
}

void Seq2SeqModel::set_markers(Vector sos, Vector eos) {
  if (sos.size() != word_dim_ || eos.size() != word_dim_) throw DimensionError("set_markers: wrong marker length");
  sos_ = std::move(sos);
  eos_ = std::move(eos);
}

Seq2SeqModel::Forward Seq2SeqModel::forward(Graph& g, const std::vector<Var>& bound, const Tensor& words,
                                            const std::vector<bool>& teacher) const {
  if (words.rank() != 2 || words.cols() != word_dim_) {
    throw DimensionError("Seq2SeqModel: expected T x " + std::to_string(word_dim_) + " input, got " +
                         shape_string(words.shape()));
  }
  const std::size_t steps = words.rows();
  std::vector<Var> inputs;
  for (std::size_t t = 0; t < steps; ++t) {
    auto r = words.row_span(t);
    inputs.push_back(g.constant(Tensor::row(Vector(r.begin(), r.end()))));
  }
  Var eos = g.constant(Tensor::row(eos_));

  CellState state = encoder_.initial_state(g);
  std::vector<Var> encoder_states;
  for (std::size_t t = 0; t <= steps; ++t) {
    state = encoder_.step(bound, t < steps ? inputs[t] : eos, state);
    encoder_states.push_back(state.h);
  }

  Forward out;
  out.context = state.h;
  Var keys{};
  if (config_.attention) keys = stack_rows(encoder_states);

  Var previous = g.constant(Tensor::row(sos_));
  Var token_total{};
  Var predicted_sum{};
  double true_sum = 0.0;
  for (std::size_t t = 0; t <= steps; ++t) {
    Var x = previous;
    if (config_.attention) x = concat(x, attend(state.h, keys).context, 1);
    state = decoder_.step(bound, x, state);
    Var pred = matmul(state.h, bound.at(out_w_)) + bound.at(out_b_);
    out.predictions.push_back(pred);

    Var target = t < steps ? inputs[t] : eos;
    Var diff = pred - target;
    Var sq = sum(diff * diff);
    token_total = t == 0 ? sq : token_total + sq;
    if (t < steps) {
      Var s = sum(pred);
      predicted_sum = t == 0 ? s : predicted_sum + s;
      for (double v : words.row_span(t)) true_sum += v;
      bool force = t < teacher.size() && teacher[t];
      previous = force ? inputs[t] : pred;
    }
  }
  out.token_loss = scale(token_total, 1.0 / static_cast<double>(steps + 1));
  Var gap = predicted_sum - g.constant(Tensor::scalar(true_sum));
  out.sequence_loss = gap * gap;
  return out;
}

Tensor Seq2SeqModel::clip(const std::vector<Vector>& words) const {
  if (words.empty()) throw ContractError("Seq2SeqModel: empty sequence");
  const std::size_t steps = std::min(words.size(), config_.max_len);
  Tensor m({steps, word_dim_});
  for (std::size_t t = 0; t < steps; ++t) {
    if (words[t].size() != word_dim_) {
      throw DimensionError("Seq2SeqModel: word vector of length " + std::to_string(words[t].size()) + ", expected " +
                           std::to_string(word_dim_));
    }
    std::copy(words[t].begin(), words[t].end(), m.row_span(t).begin());
  }
  return m;
}

Vector Seq2SeqModel::encode(const std::vector<Vector>& words) const {
  Tensor m = clip(words);
  Graph g;
  auto bound = params_.bind(g);
  CellState state = encoder_.initial_state(g);
  for (std::size_t t = 0; t <= m.rows(); ++t) {
    Vector x = t < m.rows() ? Vector(m.row_span(t).begin(), m.row_span(t).end()) : eos_;
    state = encoder_.step(bound, g.constant(Tensor::row(std::move(x))), state);
  }
  auto h = g.value(state.h).data();
  return {h.begin(), h.end()};
}

std::vector<std::string> Seq2SeqModel::reconstruct(const std::vector<Vector>& words, const WordVectors& table) const {
  Tensor m = clip(words);
  Graph g;
  auto bound = params_.bind(g);
  CellState state = encoder_.initial_state(g);
  std::vector<Var> encoder_states;
  for (std::size_t t = 0; t <= m.rows(); ++t) {
    Vector x = t < m.rows() ? Vector(m.row_span(t).begin(), m.row_span(t).end()) : eos_;
    state = encoder_.step(bound, g.constant(Tensor::row(std::move(x))), state);
    encoder_states.push_back(state.h);
  }
  Var keys{};
  if (config_.attention) keys = stack_rows(encoder_states);

  auto sq_dist = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };

  std::vector<std::string> tokens;
  Var previous = g.constant(Tensor::row(sos_));
  for (std::size_t t = 0; t < config_.max_len; ++t) {
    Var x = previous;
    if (config_.attention) x = concat(x, attend(state.h, keys).context, 1);
    state = decoder_.step(bound, x, state);
    Var pred = matmul(state.h, bound.at(out_w_)) + bound.at(out_b_);
    auto p = g.value(pred).data();

    double best = sq_dist(p, eos_);
    std::size_t best_row = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (i < Vocabulary::kNumSpecials && table.tokens()[i] == Vocabulary::special_name(i)) continue;
      double d = sq_dist(p, table.row(i));
      if (d < best) {
        best = d;
        best_row = i;
      }
    }
    if (best_row == std::numeric_limits<std::size_t>::max()) break;
    tokens.push_back(table.tokens()[best_row]);
    previous = pred;
  }
  return tokens;
}

Checkpoint Seq2SeqModel::to_checkpoint() const {
  Checkpoint ck;
  ck.metadata["model"] = "seq2seq";
  ck.metadata["cell"] = std::string(to_string(config_.cell));
  ck.metadata["attention"] = config_.attention ? "1" : "0";
  ck.metadata["word_dim"] = std::to_string(word_dim_);
  ck.metadata["teacher_forcing"] = format_double(config_.teacher_forcing);
  ck.metadata["learning_rate"] = format_double(config_.learning_rate);
  ck.metadata["epochs"] = std::to_string(config_.epochs);
  ck.metadata["max_len"] = std::to_string(config_.max_len);
  ck.metadata["train_subset"] = std::to_string(config_.train_subset);
  ck.metadata["loss"] = config_.loss == Seq2SeqLoss::PerToken ? "token" : "sequence";
  ck.metadata["seed"] = std::to_string(config_.seed);
  ck.add_parameters(params_);
  ck.blocks.emplace_back("marker.sos", Tensor::row(sos_));
  ck.blocks.emplace_back("marker.eos", Tensor::row(eos_));
  return ck;
}

Seq2SeqModel Seq2SeqModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.meta("model") != "seq2seq") throw FormatError("checkpoint does not hold a seq2seq model");
  Seq2SeqConfig c;
  try {
    c.cell = parse_cell_kind(ck.meta("cell"));
    c.attention = ck.meta("attention") == "1";
    c.teacher_forcing = std::stod(ck.meta("teacher_forcing"));
    c.learning_rate = std::stod(ck.meta("learning_rate"));
    c.epochs = std::stoul(ck.meta("epochs"));
    c.max_len = std::stoul(ck.meta("max_len"));
    c.train_subset = std::stoul(ck.meta("train_subset"));
    c.loss = ck.meta("loss") == "sequence" ? Seq2SeqLoss::SequenceSum : Seq2SeqLoss::PerToken;
    c.seed = std::stoull(ck.meta("seed"));
  } catch (const std::invalid_argument&) {
    throw FormatError("seq2seq checkpoint: malformed metadata");
  }
  Seq2SeqModel model(c, std::stoul(ck.meta("word_dim")));
  ck.load_parameters(model.params_);
  auto sos = ck.block("marker.sos").data();
  auto eos = ck.block("marker.eos").data();
  model.set_markers(Vector(sos.begin(), sos.end()), Vector(eos.begin(), eos.end()));
  return model;
}

namespace {

constexpr std::size_t kLossProbeSentences = 256;

// Random direction with the mean norm of the ordinary rows of `words`.
Vector marker_vector(const WordVectors& words, double target_norm, Rng& rng) {
  Vector v(words.dim());
  for (auto& x : v) x = rng.normal();
  double n = norm(v);
  for (auto& x : v) x *= target_norm / n;
  return v;
}

}  // namespace

Seq2SeqModel train_autoencoder(const std::vector<AnnotatedPost>& posts, const WordVectors& words,
                               const Seq2SeqConfig& config) {
  config.validate();
  Seq2SeqModel model(config, words.dim());

  std::vector<Tensor> sentences;
  for (const auto& post : posts) {
    for (const auto& s : post.sentences) {
      if (s.empty()) continue;
      if (s.size() > config.max_len) ++model.truncated_sentences;
      const std::size_t steps = std::min(s.size(), config.max_len);
      Tensor m({steps, words.dim()});
      for (std::size_t t = 0; t < steps; ++t) {
        auto v = words.lookup(s[t]);
        std::copy(v.begin(), v.end(), m.row_span(t).begin());
      }
      sentences.push_back(std::move(m));
    }
  }
  if (sentences.empty()) throw TrainingError("seq2seq: empty corpus");

  Rng rng(derive_seed(config.seed, "seq2seq"));
  double mean_norm = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i < Vocabulary::kNumSpecials && words.tokens()[i] == Vocabulary::special_name(i)) continue;
    mean_norm += norm(words.row(i));
    ++rows;
  }
  mean_norm = rows && mean_norm > 0.0 ? mean_norm / static_cast<double>(rows) : 1.0;
  if (words.space() == VectorSpace::Poincare) mean_norm = std::min(mean_norm, 1.0 - words.epsilon());
  Vector sos = marker_vector(words, mean_norm, rng);
  Vector eos = marker_vector(words, mean_norm, rng);
  model.set_markers(std::move(sos), std::move(eos));

  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  order.resize(std::min(order.size(), config.train_subset));

  ParameterSet& params = model.params();
  Adam adam(params, config.learning_rate);
  const std::size_t probe_count = std::min<std::size_t>(order.size(), kLossProbeSentences);
  const std::vector<std::size_t> probe(order.begin(), order.begin() + static_cast<long>(probe_count));
  std::vector<bool> teacher;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double progress = config.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(config.epochs - 1) : 0.0;
    adam.set_learning_rate(config.learning_rate * (1.0 - (1.0 - config.final_lr_factor) * progress));
    shuffle(order, rng);
    for (auto idx : order) {
      const Tensor& s = sentences[idx];
      teacher.assign(s.rows(), false);
      for (std::size_t t = 0; t < s.rows(); ++t) teacher[t] = rng.bernoulli(config.teacher_forcing);
      Graph g;
      auto bound = params.bind(g);
      auto fwd = model.forward(g, bound, s, teacher);
      g.backward(config.loss == Seq2SeqLoss::PerToken ? fwd.token_loss : fwd.sequence_loss);
      params.zero_grad();
      params.accumulate(g, bound);
      params.clip_grad_norm(5.0);
      adam.step(params);
    }
    if (!params.all_finite()) throw TrainingError("seq2seq: non-finite parameters after epoch " + std::to_string(epoch));

    double token_total = 0.0;
    double err_total = 0.0;
    const std::vector<bool> free_running;
    for (auto idx : probe) {
      Graph g;
      auto bound = params.bind(g);
      auto fwd = model.forward(g, bound, sentences[idx], free_running);
      token_total += g.value(fwd.token_loss)[0];
      err_total += g.value(fwd.sequence_loss)[0];
    }
    model.epoch_token_loss.push_back(token_total / static_cast<double>(probe.size()));
    model.epoch_sequence_err.push_back(err_total / static_cast<double>(probe.size()));
  }
  return model;
}

Vector SentenceEncoder::encode(const std::vector<Vector>& words) const {
  return model_ ? model_->encode(words) : pool(words, mode_);
}

std::vector<std::vector<Vector>> post_word_vectors(const AnnotatedPost& post, const WordVectors& words) {
  std::vector<std::vector<Vector>> out;
  for (const auto& s : post.sentences) {
    if (s.empty()) continue;
    std::vector<Vector> vs;
    vs.reserve(s.size());
    for (const auto& t : s) vs.push_back(words.lookup(t));
    out.push_back(std::move(vs));
  }
  return out;
}

std::vector<Vector> encode_post(const AnnotatedPost& post, const SentenceEncoder& encoder, const WordVectors& words) {
  std::vector<Vector> out;
  for (const auto& s : post_word_vectors(post, words)) out.push_back(encoder.encode(s));
  return out;
}

}  // namespace twotier
