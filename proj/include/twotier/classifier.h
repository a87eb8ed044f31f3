#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "twotier/autodiff.h"
#include "twotier/checkpoint.h"
#include "twotier/parameters.h"
#include "twotier/recurrent.h"
#include "twotier/rng.h"
#include "twotier/text_corpus.h"

namespace twotier {

using FeatureSequence = std::vector<std::vector<double>>;

struct ClassifierConfig {
  std::size_t conv_filters = 64;
  std::size_t kernel_width = 3;
  std::size_t gru_hidden = 64;
  double dropout = 0.2;
  double learning_rate = 0.001;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Prediction {
  Sentiment label = Sentiment::Positive;
  double probability = 0.5;
};

// Positive iff probability >= 0.5.
Sentiment label_for(double probability);

// Convolution over the sequence (same padding) -> ReLU -> GRU -> dropout ->
// dense -> sigmoid. The input is a sequence of word vectors (one tier) or
// sentence vectors (two tiers); both use the same network.
class TrainedClassifier {
 public:
  TrainedClassifier() = default;
  TrainedClassifier(std::size_t input_dim, const ClassifierConfig& config);

  std::size_t input_dim() const { return input_dim_; }
  const ClassifierConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Pre-sigmoid output as a 1 x 1 node. Dropout is applied only when
  // `dropout_rng` is given.
  Var logit(Graph& g, const std::vector<Var>& bound, const FeatureSequence& sequence, Rng* dropout_rng) const;

  double probability(const FeatureSequence& sequence) const;
  Prediction predict(const FeatureSequence& sequence) const;
  std::vector<Prediction> predict_batch(const std::vector<FeatureSequence>& batch) const;

  Checkpoint to_checkpoint() const;
  static TrainedClassifier from_checkpoint(const Checkpoint& checkpoint);

  // Training log.
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_validation_f1;
  std::size_t best_epoch = 0;
  std::vector<std::string> warnings;

 private:
  void check_input(const FeatureSequence& sequence) const;

  std::size_t input_dim_ = 0;
  ClassifierConfig config_;
  ParameterSet params_;
  std::vector<std::size_t> kernels_;
  std::size_t conv_bias_ = 0;
  RecurrentCell gru_;
  std::size_t dense_w_ = 0;
  std::size_t dense_b_ = 0;
};

struct LabeledSequence {
  FeatureSequence features;
  Sentiment label = Sentiment::Positive;
};

// Mini-batch gradient descent on binary cross-entropy. The parameters of the
// epoch with the best validation F1 are kept (ties: lower validation loss,
// then the earlier epoch).
TrainedClassifier train_classifier(const std::vector<LabeledSequence>& train,
                                   const std::vector<LabeledSequence>& validation, const ClassifierConfig& config);

// Convenience overload that featurizes posts first.
using Featurizer = std::function<FeatureSequence(const AnnotatedPost&)>;
TrainedClassifier train_classifier(const std::vector<AnnotatedPost>& train, const std::vector<AnnotatedPost>& validation,
                                   const ClassifierConfig& config, const Featurizer& featurize);

}  // namespace twotier
