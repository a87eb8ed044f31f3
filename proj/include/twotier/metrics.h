#pragma once

#include <cstdint>
#include <vector>

#include "twotier/text_corpus.h"

namespace twotier {

// Scores of one run, Positive being the target class.
struct RunMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when precision, recall or F1 had a zero denominator and was reported
  // as 0.
  bool degenerate = false;
};

RunMetrics compute_metrics(const std::vector<Sentiment>& predictions, const std::vector<Sentiment>& labels);
RunMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

// Per-seed runs of one experiment cell and their arithmetic means.
struct MetricsReport {
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  void add(std::uint64_t seed, const RunMetrics& run);
};

}  // namespace twotier
