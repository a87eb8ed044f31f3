#include "twotier/hyperbolic.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "twotier/embedding_io.h"
#include "twotier/errors.h"
#include "twotier/rng.h"

namespace twotier {

RelationGraph build_relation_graph(const std::vector<AnnotatedPost>& posts) {
  RelationGraph g;
  std::unordered_map<std::string, std::uint32_t> word_ids;
  for (const auto& post : posts) {
    for (std::size_t s = 0; s < post.sentences.size(); ++s) {
      if (post.sentences[s].empty()) continue;
      auto sid = static_cast<std::uint32_t>(g.sentences.size());
      g.sentences.push_back(post.id + "#" + std::to_string(s));
      std::unordered_set<std::uint32_t> seen;
      for (const auto& token : post.sentences[s]) {
        auto [it, inserted] = word_ids.emplace(token, static_cast<std::uint32_t>(g.words.size()));
        if (inserted) g.words.push_back(token);
        if (seen.insert(it->second).second) g.edges.emplace_back(it->second, sid);
      }
    }
  }
  return g;
}

void write_relation_graph_tsv(const std::filesystem::path& path, const RelationGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& [w, s] : graph.edges) out << graph.words[w] << '\t' << graph.sentences[s] << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

void PoincareConfig::validate() const {
  if (dim < 2) throw ContractError("PoincareConfig: dim must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 0.1)) throw ContractError("PoincareConfig: epsilon must lie in (0, 0.1)");
  if (negatives < 1) throw ContractError("PoincareConfig: negatives must be >= 1");
  if (!(learning_rate >= 0.0) || !(burn_in_lr_factor >= 0.0)) {
    throw ContractError("PoincareConfig: learning rates must be >= 0");
  }
}

std::optional<std::size_t> PoincareEmbedding::find(std::string_view entity) const {
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i] == entity) return i;
  }
  return std::nullopt;
}

std::span<const double> PoincareEmbedding::vector(std::string_view entity) const {
  auto i = find(entity);
  if (!i) throw LookupError("unknown entity '" + std::string(entity) + "'");
  return vectors.row_span(*i);
}

WordVectors PoincareEmbedding::word_vectors() const {
  const std::size_t dim = vectors.cols();
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < Vocabulary::kNumSpecials; ++i) tokens.push_back(Vocabulary::special_name(i));
  Tensor m({Vocabulary::kNumSpecials + word_count, dim});
  for (std::size_t w = 0; w < word_count; ++w) {
    tokens.push_back(entities[w]);
    auto src = vectors.row_span(w);
    std::copy(src.begin(), src.end(), m.row_span(Vocabulary::kNumSpecials + w).begin());
  }
  return WordVectors(std::move(tokens), std::move(m), VectorSpace::Poincare, epsilon);
}

namespace {

void check_in_ball(std::span<const double> x, const char* name) {
  if (!(squared_norm(x) < 1.0)) throw DomainError(std::string("poincare_distance: ") + name + " is not inside the unit ball");
}

}  // namespace

double poincare_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("poincare_distance: dimension mismatch");
  check_in_ball(u, "u");
  check_in_ball(v, "v");
  double diff = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) diff += (u[i] - v[i]) * (u[i] - v[i]);
  double alpha = 1.0 - squared_norm(u);
  double beta = 1.0 - squared_norm(v);
  return std::acosh(1.0 + 2.0 * diff / (alpha * beta));
}

std::vector<double> poincare_distance_grad(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("poincare_distance_grad: dimension mismatch");
  double uu = squared_norm(u);
  double vv = squared_norm(v);
  double uv = dot(u, v);
  double alpha = 1.0 - uu;
  double beta = 1.0 - vv;
  double diff = uu - 2.0 * uv + vv;
  double gamma = 1.0 + 2.0 * diff / (alpha * beta);
  std::vector<double> g(u.size(), 0.0);
  double root = gamma * gamma - 1.0;
  if (root <= 1e-30) return g;
  double coef = 4.0 / (beta * std::sqrt(root));
  double cu = (vv - 2.0 * uv + 1.0) / (alpha * alpha);
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = coef * (cu * u[i] - v[i] / alpha);
  return g;
}

void project_to_ball(std::span<double> x, double epsilon) {
  const double limit = 1.0 - epsilon;
  double n = norm(x);
  if (n < limit) return;
  std::vector<double> orig(x.begin(), x.end());
  double scale = limit / n;
  for (;;) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = orig[i] * scale;
    if (norm(x) <= limit) return;
    scale = std::nextafter(scale, 0.0);
  }
}

std::vector<double> riemannian_update(std::span<const double> theta, std::span<const double> euclid_grad, double lr,
                                      double epsilon) {
  if (theta.size() != euclid_grad.size()) throw DimensionError("riemannian_update: dimension mismatch");
  double t = 1.0 - squared_norm(theta);
  double factor = lr * t * t / 4.0;
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= factor * euclid_grad[i];
  project_to_ball(out, epsilon);
  return out;
}

PoincareEmbedding train_poincare(const RelationGraph& graph, const PoincareConfig& config) {
  config.validate();
  if (graph.empty()) throw TrainingError("poincare: empty relation graph");
  const std::size_t n_words = graph.words.size();
  const std::size_t n_entities = graph.entity_count();
  const std::size_t dim = config.dim;
  Rng rng(derive_seed(config.seed, "poincare"));

  PoincareEmbedding emb;
  emb.entities = graph.words;
  emb.entities.insert(emb.entities.end(), graph.sentences.begin(), graph.sentences.end());
  emb.word_count = n_words;
  emb.epsilon = config.epsilon;
  emb.vectors = Tensor({n_entities, dim});
  for (auto& x : emb.vectors.data()) x = rng.uniform(-0.001, 0.001);

  std::vector<std::unordered_set<std::uint32_t>> adjacent(n_entities);
  for (const auto& [w, s] : graph.edges) {
    auto v = static_cast<std::uint32_t>(n_words + s);
    adjacent[w].insert(v);
    adjacent[v].insert(w);
  }

  std::vector<std::size_t> order(graph.edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::uint32_t> targets;
  std::vector<double> dist, grad_u(dim);
  std::vector<std::vector<double>> grad_targets;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = epoch < config.burn_in_epochs ? config.learning_rate * config.burn_in_lr_factor : config.learning_rate;
    shuffle(order, rng);
    double total = 0.0;
    for (auto e : order) {
      const std::uint32_t u = graph.edges[e].first;
      targets.assign(1, static_cast<std::uint32_t>(n_words + graph.edges[e].second));
      for (std::size_t k = 0; k < config.negatives; ++k) {
        std::uint32_t cand = 0;
        for (int attempt = 0; attempt <= 10; ++attempt) {
          cand = static_cast<std::uint32_t>(rng.below(n_entities));
          if (cand != u && !adjacent[u].count(cand)) break;
        }
        targets.push_back(cand);
      }

      auto uvec = emb.vectors.row_span(u);
      dist.resize(targets.size());
      double dmin = 0.0;
      for (std::size_t j = 0; j < targets.size(); ++j) {
        dist[j] = poincare_distance(uvec, emb.vectors.row_span(targets[j]));
        dmin = j == 0 ? dist[j] : std::min(dmin, dist[j]);
      }
      // loss = d_0 + log sum_j exp(-d_j), shifted by the smallest distance.
      double z = 0.0;
      for (double d : dist) z += std::exp(-(d - dmin));
      total += dist[0] - dmin + std::log(z);

      std::fill(grad_u.begin(), grad_u.end(), 0.0);
      grad_targets.resize(targets.size());
      for (std::size_t j = 0; j < targets.size(); ++j) {
        double softmax = std::exp(-(dist[j] - dmin)) / z;
        double c = (j == 0 ? 1.0 : 0.0) - softmax;
        auto tvec = emb.vectors.row_span(targets[j]);
        axpy(c, poincare_distance_grad(uvec, tvec), grad_u);
        grad_targets[j] = poincare_distance_grad(tvec, uvec);
        for (auto& g : grad_targets[j]) g *= c;
      }
      for (std::size_t j = 0; j < targets.size(); ++j) {
        auto row = emb.vectors.row_span(targets[j]);
        auto next = riemannian_update(row, grad_targets[j], lr, config.epsilon);
        std::copy(next.begin(), next.end(), row.begin());
      }
      auto next_u = riemannian_update(uvec, grad_u, lr, config.epsilon);
      std::copy(next_u.begin(), next_u.end(), uvec.begin());

      if (config.verify_ball) {
        for (auto id : targets) {
          if (norm(emb.vectors.row_span(id)) > 1.0 - config.epsilon) throw TrainingError("poincare: ball invariant violated");
        }
        if (norm(uvec) > 1.0 - config.epsilon) throw TrainingError("poincare: ball invariant violated");
      }
    }
    emb.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  return emb;
}

std::vector<ProjectedPoint> export_2d_projection(const PoincareEmbedding& emb, const std::vector<std::string>& entities) {
  const std::size_t n = entities.size();
  const std::size_t dim = emb.vectors.cols();
  std::vector<ProjectedPoint> out;
  if (n == 0) return out;

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    auto v = emb.vector(entities[i]);
    for (std::size_t k = 0; k < dim; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[k];
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2);
  if (n > 1) {
    Eigen::MatrixXd cov = x.transpose() * x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const auto& values = solver.eigenvalues();    // ascending
    const auto& vectors = solver.eigenvectors();
    const double top = std::max(values(values.size() - 1), 0.0);
    for (int c = 0; c < 2 && c < values.size(); ++c) {
      Eigen::Index idx = values.size() - 1 - c;
      if (!(values(idx) > 1e-12 * top) || top == 0.0) continue;
      Eigen::VectorXd axis = vectors.col(idx);
      Eigen::Index arg = 0;
      axis.cwiseAbs().maxCoeff(&arg);
      if (axis(arg) < 0) axis = -axis;
      coords.col(c) = x * axis;
    }
    double max_norm = coords.rowwise().norm().maxCoeff();
    if (max_norm > 0.0) coords /= max_norm;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto r = static_cast<Eigen::Index>(i);
    out.push_back({entities[i], coords(r, 0), coords(r, 1)});
  }
  return out;
}

}  // namespace twotier
