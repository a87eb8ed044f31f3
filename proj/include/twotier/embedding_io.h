#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "twotier/euclid_embed.h"
#include "twotier/tensor.h"

namespace twotier {

enum class VectorSpace { Euclidean, Poincare };

// Read-only token -> vector table consumed by the sentence tier and the
// classifier. Built from any trained word model or loaded from disk.
class WordVectors {
 public:
  WordVectors() = default;
  WordVectors(std::vector<std::string> tokens, Tensor matrix, VectorSpace space = VectorSpace::Euclidean,
              double epsilon = 0.0);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return matrix_.cols(); }
  VectorSpace space() const { return space_; }
  double epsilon() const { return epsilon_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const Tensor& matrix() const { return matrix_; }
  std::span<const double> row(std::size_t i) const { return matrix_.row_span(i); }
  std::optional<std::size_t> find(std::string_view token) const;

  // Optional subword table used to compose vectors of unknown tokens.
  void set_subwords(std::size_t n_min, std::size_t n_max, std::vector<std::string> ngrams, Tensor vectors);
  bool has_subwords() const { return !ngrams_.empty(); }
  std::size_t ngram_min() const { return ngram_min_; }
  std::size_t ngram_max() const { return ngram_max_; }
  const std::vector<std::string>& ngrams() const { return ngrams_; }
  const Tensor& ngram_vectors() const { return ngram_vectors_; }

  // Vector for `token`: its own row, else the n-gram composition, else the
  // "<unk>" row. LookupError when none of these exist.
  std::vector<double> lookup(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  Tensor matrix_;
  std::unordered_map<std::string, std::size_t> index_;
  VectorSpace space_ = VectorSpace::Euclidean;
  double epsilon_ = 0.0;
  std::size_t ngram_min_ = 0;
  std::size_t ngram_max_ = 0;
  std::vector<std::string> ngrams_;
  std::unordered_map<std::string, std::size_t> ngram_index_;
  Tensor ngram_vectors_;
};

WordVectors to_word_vectors(const EmbeddingMatrix& emb);

// Text format: optional "# ..." comment lines, a "<count> <dim>" header, then
// one "token v1 ... vdim" line per row. Values use the shortest decimal form
// that reads back to the same double. Subword tables go to "<path>.ngrams" in
// the same layout with a "# ngram_min=<a> ngram_max=<b>" comment.
void write_embedding(const std::filesystem::path& path, const WordVectors& vectors);
WordVectors read_embedding(const std::filesystem::path& path);

// Shortest round-trip decimal rendering of a double.
std::string format_double(double x);

// Top-k neighbours of `token` excluding itself: cosine similarity for
// Euclidean tables, negated Poincare distance for hyperbolic ones. Ties break
// lexicographically.
std::vector<std::pair<std::string, double>> nearest_neighbors(const WordVectors& vectors, std::string_view token,
                                                              std::size_t k);

}  // namespace twotier
