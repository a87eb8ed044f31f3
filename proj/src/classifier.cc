#include "twotier/classifier.h"

#include <cmath>
#include <iostream>

#include "twotier/embedding_io.h"
#include "twotier/errors.h"
#include "twotier/metrics.h"

namespace twotier {

void ClassifierConfig::validate() const {
  if (kernel_width < 1) throw ContractError("ClassifierConfig: kernel_width must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("ClassifierConfig: dropout must lie in [0, 1)");
  if (conv_filters < 1 || gru_hidden < 1) throw ContractError("ClassifierConfig: layer sizes must be >= 1");
  if (batch_size < 1) throw ContractError("ClassifierConfig: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ContractError("ClassifierConfig: learning_rate must be >= 0");
  if (!(clip_norm > 0.0)) throw ContractError("ClassifierConfig: clip_norm must be > 0");
}

Sentiment label_for(double probability) { return probability >= 0.5 ? Sentiment::Positive : Sentiment::Negative; }

TrainedClassifier::TrainedClassifier(std::size_t input_dim, const ClassifierConfig& config)
    : input_dim_(input_dim), config_(config) {
  config.validate();
  if (input_dim == 0) throw ContractError("TrainedClassifier: input_dim must be positive");
  Rng rng(derive_seed(config.seed, "classifier.init"));
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(input_dim * config.kernel_width));
  for (std::size_t j = 0; j < config.kernel_width; ++j) {
    Tensor k({input_dim, config.conv_filters});
    for (auto& x : k.data()) x = rng.uniform(-conv_bound, conv_bound);
    kernels_.push_back(params_.add("conv.K" + std::to_string(j), std::move(k)));
  }
  conv_bias_ = params_.add("conv.b", Tensor({1, config.conv_filters}));
  gru_ = RecurrentCell(CellKind::GRU, "gru", config.conv_filters, config.gru_hidden, params_, rng);
  const double dense_bound = 1.0 / std::sqrt(static_cast<double>(config.gru_hidden));
  Tensor w({config.gru_hidden, 1});
  for (auto& x : w.data()) x = rng.uniform(-dense_bound, dense_bound);
  dense_w_ = params_.add("dense.W", std::move(w));
  dense_b_ = params_.add("dense.b", Tensor({1, 1}));
}

void TrainedClassifier::check_input(const FeatureSequence& sequence) const {
  if (sequence.empty()) throw ContractError("classifier: empty input sequence");
  for (const auto& v : sequence) {
    if (v.size() != input_dim_) {
      throw ContractError("classifier: input vector of length " + std::to_string(v.size()) + ", expected " +
                          std::to_string(input_dim_));
    }
  }
}

Var TrainedClassifier::logit(Graph& g, const std::vector<Var>& bound, const FeatureSequence& sequence,
                             Rng* dropout_rng) const {
  check_input(sequence);
  const std::size_t steps = sequence.size();
  Tensor x({steps, input_dim_});
  for (std::size_t t = 0; t < steps; ++t) std::copy(sequence[t].begin(), sequence[t].end(), x.row_span(t).begin());
  Var input = g.constant(std::move(x));

  const long half = static_cast<long>(config_.kernel_width - 1) / 2;
  Var conv{};
  for (std::size_t j = 0; j < kernels_.size(); ++j) {
    long offset = static_cast<long>(j) - half;
    Var shifted = offset == 0 ? input : shift_rows(input, offset);
    Var term = matmul(shifted, bound.at(kernels_[j]));
    conv = j == 0 ? term : conv + term;
  }
  Var features = relu(add_bias(conv, bound.at(conv_bias_)));

  CellState state = gru_.initial_state(g);
  for (std::size_t t = 0; t < steps; ++t) state = gru_.step(bound, row(features, t), state);
  Var h = state.h;

  if (dropout_rng != nullptr && config_.dropout > 0.0) {
    Tensor mask({1, config_.gru_hidden});
    const double keep = 1.0 - config_.dropout;
    for (auto& m : mask.data()) m = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    h = h * g.constant(std::move(mask));
  }
  return matmul(h, bound.at(dense_w_)) + bound.at(dense_b_);
}

double TrainedClassifier::probability(const FeatureSequence& sequence) const {
  Graph g;
  auto bound = params_.bind(g);
  Var z = logit(g, bound, sequence, nullptr);
  double v = g.value(z)[0];
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

Prediction TrainedClassifier::predict(const FeatureSequence& sequence) const {
  double p = probability(sequence);
  return {label_for(p), p};
}

std::vector<Prediction> TrainedClassifier::predict_batch(const std::vector<FeatureSequence>& batch) const {
  std::vector<Prediction> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(predict(s));
  return out;
}

Checkpoint TrainedClassifier::to_checkpoint() const {
  Checkpoint ck;
  ck.metadata["model"] = "classifier";
  ck.metadata["input_dim"] = std::to_string(input_dim_);
  ck.metadata["conv_filters"] = std::to_string(config_.conv_filters);
  ck.metadata["kernel_width"] = std::to_string(config_.kernel_width);
  ck.metadata["gru_hidden"] = std::to_string(config_.gru_hidden);
  ck.metadata["dropout"] = format_double(config_.dropout);
  ck.metadata["learning_rate"] = format_double(config_.learning_rate);
  ck.metadata["epochs"] = std::to_string(config_.epochs);
  ck.metadata["batch_size"] = std::to_string(config_.batch_size);
  ck.metadata["clip_norm"] = format_double(config_.clip_norm);
  ck.metadata["seed"] = std::to_string(config_.seed);
  ck.metadata["best_epoch"] = std::to_string(best_epoch);
  ck.add_parameters(params_);
  return ck;
}

TrainedClassifier TrainedClassifier::from_checkpoint(const Checkpoint& ck) {
  if (ck.meta("model") != "classifier") throw FormatError("checkpoint does not hold a classifier");
  ClassifierConfig c;
  std::size_t input_dim = 0;
  try {
    input_dim = std::stoul(ck.meta("input_dim"));
    c.conv_filters = std::stoul(ck.meta("conv_filters"));
    c.kernel_width = std::stoul(ck.meta("kernel_width"));
    c.gru_hidden = std::stoul(ck.meta("gru_hidden"));
    c.dropout = std::stod(ck.meta("dropout"));
    c.learning_rate = std::stod(ck.meta("learning_rate"));
    c.epochs = std::stoul(ck.meta("epochs"));
    c.batch_size = std::stoul(ck.meta("batch_size"));
    c.clip_norm = std::stod(ck.meta("clip_norm"));
    c.seed = std::stoull(ck.meta("seed"));
  } catch (const std::invalid_argument&) {
    throw FormatError("classifier checkpoint: malformed metadata");
  }
  TrainedClassifier clf(input_dim, c);
  ck.load_parameters(clf.params_);
  clf.best_epoch = std::stoul(ck.meta("best_epoch"));
  return clf;
}

namespace {

double target_of(Sentiment s) { return s == Sentiment::Positive ? 1.0 : 0.0; }

struct Evaluation {
  RunMetrics metrics;
  double loss = 0.0;
};

Evaluation evaluate(const TrainedClassifier& clf, const std::vector<LabeledSequence>& data) {
  std::vector<Sentiment> preds, labels;
  double loss = 0.0;
  for (const auto& item : data) {
    double p = clf.probability(item.features);
    preds.push_back(label_for(p));
    labels.push_back(item.label);
    double y = target_of(item.label);
    double pc = std::clamp(p, 1e-15, 1.0 - 1e-15);
    loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
  }
  return {compute_metrics(preds, labels), loss / static_cast<double>(data.size())};
}

}  // namespace

TrainedClassifier train_classifier(const std::vector<LabeledSequence>& train,
                                   const std::vector<LabeledSequence>& validation, const ClassifierConfig& config) {
  config.validate();
  if (train.empty() || validation.empty()) throw TrainingError("classifier: training and validation sets must be non-empty");
  const std::size_t input_dim = train.front().features.empty() ? 0 : train.front().features.front().size();
  TrainedClassifier clf(input_dim, config);

  std::size_t positives = 0;
  for (const auto& item : train) {
    if (item.label == Sentiment::Skip) throw ContractError("classifier: Skip is not a trainable label");
    positives += item.label == Sentiment::Positive;
  }
  if (positives == 0 || positives == train.size()) {
    clf.warnings.push_back("training set holds a single class");
    std::clog << "warning: classifier training set holds a single class\n";
  }

  Rng rng(derive_seed(config.seed, "classifier"));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ParameterSet& params = clf.params();
  std::vector<Tensor> best;
  double best_f1 = -1.0;
  double best_loss = 0.0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      double weight = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& item = train[order[i]];
        Graph g;
        auto bound = params.bind(g);
        Var loss = bce_with_logits(clf.logit(g, bound, item.features, &rng), target_of(item.label));
        total += g.value(loss)[0];
        g.backward(loss);
        params.accumulate(g, bound, weight);
      }
      params.clip_grad_norm(config.clip_norm);
      sgd_step(params, config.learning_rate);
    }
    if (!params.all_finite()) throw TrainingError("classifier: non-finite parameters after epoch " + std::to_string(epoch));
    clf.epoch_train_loss.push_back(total / static_cast<double>(train.size()));

    Evaluation val = evaluate(clf, validation);
    clf.epoch_validation_f1.push_back(val.metrics.f1);
    if (val.metrics.f1 > best_f1 || (val.metrics.f1 == best_f1 && val.loss < best_loss)) {
      best_f1 = val.metrics.f1;
      best_loss = val.loss;
      clf.best_epoch = epoch;
      best.clear();
      for (std::size_t i = 0; i < params.size(); ++i) best.push_back(params.value(i));
    }
  }
  for (std::size_t i = 0; i < best.size(); ++i) params.value(i) = best[i];
  return clf;
}

TrainedClassifier train_classifier(const std::vector<AnnotatedPost>& train, const std::vector<AnnotatedPost>& validation,
                                   const ClassifierConfig& config, const Featurizer& featurize) {
  auto convert = [&](const std::vector<AnnotatedPost>& posts) {
    std::vector<LabeledSequence> out;
    out.reserve(posts.size());
    for (const auto& p : posts) out.push_back({featurize(p), p.label});
    return out;
  };
  return train_classifier(convert(train), convert(validation), config);
}

}  // namespace twotier
