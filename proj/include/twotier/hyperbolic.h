#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "twotier/tensor.h"
#include "twotier/text_corpus.h"

namespace twotier {

class WordVectors;

// Bipartite word <-> sentence graph. Entities are numbered words first, then
// sentences; edges store (word index, sentence index) within their own lists.
struct RelationGraph {
  std::vector<std::string> words;
  std::vector<std::string> sentences;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  std::size_t entity_count() const { return words.size() + sentences.size(); }
  bool empty() const { return edges.empty(); }
};

// One sentence node per (post, sentence index), named "<post id>#<index>",
// and one edge per distinct word of that sentence. Words are numbered in
// order of first appearance.
RelationGraph build_relation_graph(const std::vector<AnnotatedPost>& posts);

// "word<TAB>sentence_id" per edge.
void write_relation_graph_tsv(const std::filesystem::path& path, const RelationGraph& graph);

struct PoincareConfig {
  std::size_t dim = 200;
  double learning_rate = 0.3;
  std::size_t burn_in_epochs = 10;
  double burn_in_lr_factor = 0.01;
  std::size_t negatives = 10;
  std::size_t epochs = 50;
  double epsilon = 1e-5;
  std::uint64_t seed = 1;
  // Re-checks the ball invariant after every update and throws on violation.
  bool verify_ball = false;

  void validate() const;
};

struct PoincareEmbedding {
  // Words first, then sentences, matching the graph numbering.
  std::vector<std::string> entities;
  std::size_t word_count = 0;
  Tensor vectors;
  double epsilon = 1e-5;
  std::vector<double> epoch_loss;

  std::optional<std::size_t> find(std::string_view entity) const;
  std::span<const double> vector(std::string_view entity) const;
  // Word rows only, tagged as Poincare space. The special tokens are added
  // at the origin so the table has an "<unk>" fallback.
  WordVectors word_vectors() const;
};

// arccosh(1 + 2|u-v|^2 / ((1-|u|^2)(1-|v|^2))). DomainError unless both
// points lie strictly inside the unit ball.
double poincare_distance(std::span<const double> u, std::span<const double> v);

// Euclidean gradient of poincare_distance with respect to u. Zero at u = v.
std::vector<double> poincare_distance_grad(std::span<const double> u, std::span<const double> v);

// Rescales x onto the sphere of radius 1 - epsilon when it lies on or
// outside it.
void project_to_ball(std::span<double> x, double epsilon);

// theta - lr * (1-|theta|^2)^2/4 * grad, projected back into the ball.
std::vector<double> riemannian_update(std::span<const double> theta, std::span<const double> euclid_grad, double lr,
                                      double epsilon);

PoincareEmbedding train_poincare(const RelationGraph& graph, const PoincareConfig& config);

struct ProjectedPoint {
  std::string entity;
  double x = 0.0;
  double y = 0.0;
};

// First two principal components of the selected vectors, scaled so the
// farthest point lands on the unit circle. Component signs are fixed so the
// largest-magnitude loading is positive.
std::vector<ProjectedPoint> export_2d_projection(const PoincareEmbedding& emb, const std::vector<std::string>& entities);

}  // namespace twotier
