#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twotier/autodiff.h"
#include "twotier/checkpoint.h"
#include "twotier/embedding_io.h"
#include "twotier/parameters.h"
#include "twotier/recurrent.h"
#include "twotier/text_corpus.h"

namespace twotier {

using Vector = std::vector<double>;

enum class PoolingMode { Max, Min, Avg };

std::string_view to_string(PoolingMode mode);

// Per-dimension max, min or mean of a non-empty list of equal-length vectors.
Vector pool(const std::vector<Vector>& vectors, PoolingMode mode);

// Softmax of scaled dot products between `decoder_state` and each encoder
// state.
Vector attention_weights(std::span<const double> decoder_state, const std::vector<Vector>& encoder_states);

enum class Seq2SeqLoss {
  // Mean over output positions of |pred_t - true_t|^2.
  PerToken,
  // (sum of all predicted entries - sum of all true entries)^2 over the word
  // positions of one sentence.
  SequenceSum,
};

struct Seq2SeqConfig {
  CellKind cell = CellKind::GRU;
  bool attention = false;
  // 0 means "same as the word dimension"; any other value must equal it.
  std::size_t hidden_dim = 0;
  double teacher_forcing = 0.5;
  double learning_rate = 0.005;
  // Learning rate reached at the last epoch as a fraction of the initial
  // one; it falls linearly in between. 1 keeps it constant.
  double final_lr_factor = 1.0;
  std::size_t epochs = 10;
  std::size_t max_len = 30;
  std::size_t train_subset = 400000;
  Seq2SeqLoss loss = Seq2SeqLoss::PerToken;
  std::uint64_t seed = 1;

  void validate() const;
};

// Encoder-decoder autoencoder over word vectors. The encoder reads the words
// of a sentence followed by an EOS vector; its final hidden state is the
// sentence vector. The decoder starts from that state, reads SOS and then the
// previous word (true or predicted), and regresses each word vector followed
// by EOS. SOS and EOS are fixed vectors chosen at training time.
class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  Seq2SeqModel(const Seq2SeqConfig& config, std::size_t word_dim);

  const Seq2SeqConfig& config() const { return config_; }
  std::size_t word_dim() const { return word_dim_; }
  std::size_t hidden_dim() const { return word_dim_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Vector& sos() const { return sos_; }
  const Vector& eos() const { return eos_; }
  void set_markers(Vector sos, Vector eos);

  // Graph-level forward pass used by training and gradient checks. `words`
  // is a T x word_dim matrix; `teacher[t]` chooses the true previous word as
  // decoder input t+1. Predictions cover the T words and then EOS.
  struct Forward {
    Var context;
    std::vector<Var> predictions;
    Var token_loss;
    Var sequence_loss;
  };
  Forward forward(Graph& g, const std::vector<Var>& bound, const Tensor& words, const std::vector<bool>& teacher) const;

  // Context vector of a sentence (truncated to max_len). ContractError on an
  // empty sequence.
  Vector encode(const std::vector<Vector>& words) const;

  // Free-running reconstruction: feeds back its own predictions and stops
  // after max_len outputs or when the nearest entry of `table` (ignoring the
  // special rows) or EOS is EOS. Returns the decoded tokens.
  std::vector<std::string> reconstruct(const std::vector<Vector>& words, const WordVectors& table) const;

  Checkpoint to_checkpoint() const;
  static Seq2SeqModel from_checkpoint(const Checkpoint& checkpoint);

  // Training log, one entry per epoch. Both losses are measured after the
  // epoch by a free-running pass (no teacher forcing) over up to 256 of the
  // training sentences, so they do not depend on the teacher-forcing draws.
  std::vector<double> epoch_token_loss;
  std::vector<double> epoch_sequence_err;
  std::size_t truncated_sentences = 0;

 private:
  Tensor clip(const std::vector<Vector>& words) const;

  Seq2SeqConfig config_;
  std::size_t word_dim_ = 0;
  ParameterSet params_;
  RecurrentCell encoder_;
  RecurrentCell decoder_;
  std::size_t out_w_ = 0;
  std::size_t out_b_ = 0;
  Vector sos_;
  Vector eos_;
};

// Trains on min(train_subset, #sentences) sentences of `posts`, one Adam step
// per sentence. Tokens resolve through `words` (with its UNK fallback).
Seq2SeqModel train_autoencoder(const std::vector<AnnotatedPost>& posts, const WordVectors& words,
                               const Seq2SeqConfig& config);

// The sentence tier of a pipeline: a pooling mode or a trained model.
class SentenceEncoder {
 public:
  explicit SentenceEncoder(PoolingMode mode) : mode_(mode) {}
  explicit SentenceEncoder(std::shared_ptr<const Seq2SeqModel> model) : model_(std::move(model)) {}

  bool is_pooling() const { return model_ == nullptr; }
  Vector encode(const std::vector<Vector>& words) const;

 private:
  PoolingMode mode_ = PoolingMode::Avg;
  std::shared_ptr<const Seq2SeqModel> model_;
};

// Word vectors of every sentence of `post`, in order; empty sentences are
// skipped.
std::vector<std::vector<Vector>> post_word_vectors(const AnnotatedPost& post, const WordVectors& words);

// One vector per sentence, in order.
std::vector<Vector> encode_post(const AnnotatedPost& post, const SentenceEncoder& encoder, const WordVectors& words);

}  // namespace twotier
