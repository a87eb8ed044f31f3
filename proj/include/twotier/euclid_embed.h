#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "twotier/tensor.h"
#include "twotier/text_corpus.h"

namespace twotier {

struct EuclidConfig {
  std::size_t dim = 200;
  std::size_t window = 40;
  std::size_t negatives = 5;
  double learning_rate = 0.025;
  std::size_t epochs = 10;
  std::size_t min_count = 5;
  // (0, 0) disables subword n-grams.
  std::size_t ngram_min = 3;
  std::size_t ngram_max = 6;
  double glove_x_max = 100.0;
  double glove_alpha = 0.75;
  std::uint64_t seed = 1;

  void validate() const;
};

// Trained Euclidean word vectors.
//
// `vectors` holds the final vector per vocabulary row: the input vectors for
// skipgram, token vector plus n-gram vectors for the subword variant, and
// w + w~ for GloVe. The input/output tables are the raw training state.
struct EmbeddingMatrix {
  Vocabulary vocab;
  std::size_t dim = 0;
  Tensor vectors;
  Tensor input_vectors;
  Tensor output_vectors;

  // Subword variant only.
  std::size_t ngram_min = 0;
  std::size_t ngram_max = 0;
  std::vector<std::string> ngrams;
  std::unordered_map<std::string, std::size_t> ngram_index;
  Tensor ngram_vectors;

  // Mean per-pair (skipgram) or per-entry (GloVe) loss of every epoch.
  std::vector<double> epoch_loss;

  bool has_subwords() const { return !ngrams.empty(); }
  // Row of `token`, or for subword models the sum of the vectors of its known
  // n-grams when the token itself is unknown.
  std::optional<std::vector<double>> word_vector(std::string_view token) const;
};

// Sparse symmetric co-occurrence counts keyed by vocabulary index.
class CooccurrenceTable {
 public:
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };

  void add(std::uint32_t i, std::uint32_t j, double x);
  double get(std::uint32_t i, std::uint32_t j) const;
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  // Entries sorted by (row, col).
  std::vector<Entry> entries() const;

 private:
  static std::uint64_t key(std::uint32_t i, std::uint32_t j) { return (std::uint64_t{i} << 32) | j; }
  std::unordered_map<std::uint64_t, double> cells_;
};

// Sentences as vocabulary indices; tokens below min_count map to UNK.
std::vector<std::vector<std::uint32_t>> index_sentences(const std::vector<AnnotatedPost>& posts,
                                                        const Vocabulary& vocab);

EmbeddingMatrix train_skipgram(const std::vector<AnnotatedPost>& posts, const Vocabulary& vocab,
                               const EuclidConfig& config);
EmbeddingMatrix train_subword_skipgram(const std::vector<AnnotatedPost>& posts, const Vocabulary& vocab,
                                       const EuclidConfig& config);

// X_ij accumulates 1/d for tokens i, j at distance d <= window inside one
// sentence.
CooccurrenceTable build_cooccurrence(const std::vector<AnnotatedPost>& posts, const Vocabulary& vocab,
                                     std::size_t window);

// f(x) = (x / x_max)^alpha below x_max, 1 above.
double glove_weight(double x, double x_max, double alpha);

EmbeddingMatrix train_glove(const CooccurrenceTable& table, const Vocabulary& vocab, const EuclidConfig& config);

// Weighted least-squares objective sum f(X_ij) (w_i.w~_j + b_i + b~_j - log X_ij)^2
// of a trained GloVe model.
double glove_loss(const CooccurrenceTable& table, const EmbeddingMatrix& emb, const EuclidConfig& config);

// Negative-sampling loss of one (center, context) step and its gradient.
// `params` packs [v_center | u_context | u_neg_1 | ... | u_neg_k], each of
// length dim.
double skipgram_pair_loss(std::span<const double> params, std::size_t dim);
Tensor skipgram_pair_gradient(std::span<const double> params, std::size_t dim);

// Single GloVe term f(x) (w.c + b + bc - log x)^2 and its gradient.
// `params` packs [w | c | b | bc].
double glove_term_loss(std::span<const double> params, std::size_t dim, double x, double x_max, double alpha);
Tensor glove_term_gradient(std::span<const double> params, std::size_t dim, double x, double x_max, double alpha);

// Exact top-k by cosine similarity, excluding the query token; ties break
// lexicographically.
std::vector<std::pair<std::string, double>> nearest_neighbors(const EmbeddingMatrix& emb, std::string_view token,
                                                              std::size_t k);

}  // namespace twotier
