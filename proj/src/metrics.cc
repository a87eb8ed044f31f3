#include "twotier/metrics.h"

#include "twotier/errors.h"

namespace twotier {

RunMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  RunMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const std::size_t n = tp + fp + fn + tn;
  if (n == 0) throw ContractError("compute_metrics: empty confusion matrix");
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(n);
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.degenerate = true;
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.degenerate = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.degenerate = true;
  }
  return m;
}

RunMetrics compute_metrics(const std::vector<Sentiment>& predictions, const std::vector<Sentiment>& labels) {
  if (predictions.size() != labels.size()) {
    throw ContractError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ContractError("compute_metrics: no labels");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Sentiment::Skip || predictions[i] == Sentiment::Skip) {
      throw ContractError("compute_metrics: Skip is not a class");
    }
    bool pred = predictions[i] == Sentiment::Positive;
    bool truth = labels[i] == Sentiment::Positive;
    if (pred && truth) ++tp;
    else if (pred) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

void MetricsReport::add(std::uint64_t seed, const RunMetrics& run) {
  seeds.push_back(seed);
  runs.push_back(run);
  double n = static_cast<double>(runs.size());
  accuracy = precision = recall = f1 = 0.0;
  for (const auto& r : runs) {
    accuracy += r.accuracy;
    precision += r.precision;
    recall += r.recall;
    f1 += r.f1;
  }
  accuracy /= n;
  precision /= n;
  recall /= n;
  f1 /= n;
}

}  // namespace twotier
