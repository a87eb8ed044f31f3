#include "twotier/euclid_embed.h"

#include <algorithm>
#include <cmath>

#include "twotier/errors.h"
#include "twotier/rng.h"

namespace twotier {

namespace {

constexpr std::size_t kLossProbePairs = 20000;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

void init_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& x : t.data()) x = rng.uniform(-bound, bound);
}

// Samples indices proportionally to frequency^0.75.
class UnigramSampler {
 public:
  explicit UnigramSampler(const std::vector<std::uint64_t>& counts) {
    double total = 0.0;
    cumulative_.reserve(counts.size());
    for (auto c : counts) {
      total += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(total);
    }
    total_ = total;
  }
  bool empty() const { return total_ <= 0.0; }
  std::uint32_t sample(Rng& rng) const {
    double u = rng.uniform() * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::uint32_t>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

// One negative-sampling step. outputs[0] is the true context row, the rest
// are negatives. Output rows are updated in place; the step for the center
// vector (-lr times its gradient) is added to `center_delta`. Returns the
// pair loss before the update.
double skipgram_pair_update(std::span<const double> center, std::span<double* const> outputs, double lr,
                            std::span<double> center_delta) {
  std::size_t dim = center.size();
  double loss = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    std::span<double> u(outputs[k], dim);
    double label = k == 0 ? 1.0 : 0.0;
    double f = dot(center, u);
    loss -= k == 0 ? log_sigmoid(f) : log_sigmoid(-f);
    double g = lr * (label - sigmoid(f));
    axpy(g, u, center_delta);
    axpy(g, center, u);
  }
  return loss;
}

EmbeddingMatrix train_skipgram_family(const std::vector<AnnotatedPost>& posts, const Vocabulary& vocab,
                                      const EuclidConfig& config, bool subwords) {
  config.validate();
  auto sentences = index_sentences(posts, vocab);
  std::size_t total_tokens = 0;
  for (const auto& s : sentences) total_tokens += s.size();
  if (total_tokens == 0) throw TrainingError("skipgram: empty corpus");

  std::vector<std::uint64_t> counts(vocab.size(), 0);
  for (const auto& s : sentences) {
    for (auto w : s) ++counts[w];
  }
  UnigramSampler sampler(counts);

  const std::size_t dim = config.dim;
  const std::size_t n_vocab = vocab.size();
  Rng rng(derive_seed(config.seed, "skipgram"));

  EmbeddingMatrix emb;
  emb.vocab = vocab;
  emb.dim = dim;
  emb.input_vectors = Tensor({n_vocab, dim});
  emb.output_vectors = Tensor({n_vocab, dim});
  init_uniform(emb.input_vectors, 0.5 / static_cast<double>(dim), rng);

  // Per-token list of n-gram rows.
  std::vector<std::vector<std::uint32_t>> components(n_vocab);
  bool use_ngrams = subwords && config.ngram_min > 0;
  if (use_ngrams) {
    emb.ngram_min = config.ngram_min;
    emb.ngram_max = config.ngram_max;
    for (std::size_t w = Vocabulary::kNumSpecials; w < n_vocab; ++w) {
      for (auto& g : char_ngrams(vocab.token(w), config.ngram_min, config.ngram_max)) {
        auto [it, inserted] = emb.ngram_index.emplace(g, emb.ngrams.size());
        if (inserted) emb.ngrams.push_back(g);
        components[w].push_back(static_cast<std::uint32_t>(it->second));
      }
    }
    if (!emb.ngrams.empty()) {
      emb.ngram_vectors = Tensor({emb.ngrams.size(), dim});
      init_uniform(emb.ngram_vectors, 0.5 / static_cast<double>(dim), rng);
    }
  }

  // Fixed probe of (center, context, negatives) triples drawn from a separate
  // stream. The per-epoch loss is the objective on this probe after the
  // epoch, so it is not biased by the updates made while it is measured.
  struct Probe {
    std::uint32_t center;
    std::vector<std::uint32_t> targets;
  };
  std::vector<Probe> probes;
  {
    Rng probe_rng(derive_seed(config.seed, "skipgram.probe"));
    for (std::size_t i = 0; i < kLossProbePairs; ++i) {
      const auto& s = sentences[probe_rng.below(sentences.size())];
      if (s.size() < 2) continue;
      std::size_t c = probe_rng.below(s.size());
      std::size_t lo = c >= config.window ? c - config.window : 0;
      std::size_t hi = std::min(s.size(), c + config.window + 1);
      std::size_t o = lo + probe_rng.below(hi - lo - 1);
      if (o >= c) ++o;
      Probe p{s[c], {s[o]}};
      for (std::size_t k = 0; k < config.negatives; ++k) {
        std::uint32_t neg = sampler.sample(probe_rng);
        if (neg != s[o]) p.targets.push_back(neg);
      }
      probes.push_back(std::move(p));
    }
  }

  const double total_steps = static_cast<double>(config.epochs * total_tokens) + 1.0;
  std::size_t processed = 0;
  std::vector<double> center(dim), delta(dim);
  std::vector<double*> outputs;
  outputs.reserve(config.negatives + 1);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& sentence : sentences) {
      for (std::size_t c = 0; c < sentence.size(); ++c, ++processed) {
        double lr = config.learning_rate * std::max(1e-4, 1.0 - static_cast<double>(processed) / total_steps);
        const std::uint32_t word = sentence[c];
        const auto& parts = components[word];
        const double n_parts = static_cast<double>(1 + parts.size());

        auto token_row = emb.input_vectors.row_span(word);
        std::copy(token_row.begin(), token_row.end(), center.begin());
        for (auto g : parts) axpy(1.0, emb.ngram_vectors.row_span(g), center);

        std::size_t lo = c >= config.window ? c - config.window : 0;
        std::size_t hi = std::min(sentence.size(), c + config.window + 1);
        for (std::size_t o = lo; o < hi; ++o) {
          if (o == c) continue;
          const std::uint32_t context = sentence[o];
          outputs.clear();
          outputs.push_back(emb.output_vectors.row_span(context).data());
          for (std::size_t k = 0; k < config.negatives; ++k) {
            std::uint32_t neg = sampler.sample(rng);
            if (neg == context) continue;
            outputs.push_back(emb.output_vectors.row_span(neg).data());
          }
          std::fill(delta.begin(), delta.end(), 0.0);
          skipgram_pair_update(center, outputs, lr, delta);

          axpy(1.0, delta, token_row);
          for (auto g : parts) axpy(1.0, delta, emb.ngram_vectors.row_span(g));
          axpy(n_parts, delta, center);
        }
      }
    }
    double loss = 0.0;
    for (const auto& p : probes) {
      auto row = emb.input_vectors.row_span(p.center);
      std::copy(row.begin(), row.end(), center.begin());
      for (auto g : components[p.center]) axpy(1.0, emb.ngram_vectors.row_span(g), center);
      for (std::size_t k = 0; k < p.targets.size(); ++k) {
        double f = dot(center, emb.output_vectors.row_span(p.targets[k]));
        loss -= k == 0 ? log_sigmoid(f) : log_sigmoid(-f);
      }
    }
    emb.epoch_loss.push_back(probes.empty() ? 0.0 : loss / static_cast<double>(probes.size()));
  }

  emb.vectors = emb.input_vectors;
  for (std::size_t w = 0; w < n_vocab; ++w) {
    for (auto g : components[w]) axpy(1.0, emb.ngram_vectors.row_span(g), emb.vectors.row_span(w));
  }
  return emb;
}

}  // namespace

void EuclidConfig::validate() const {
  if (dim < 1 || window < 1 || negatives < 1 || epochs < 1) {
    throw ContractError("EuclidConfig: dim, window, negatives and epochs must all be >= 1");
  }
  if (min_count < 1) throw ContractError("EuclidConfig: min_count must be >= 1");
  if (!(learning_rate >= 0.0)) throw ContractError("EuclidConfig: learning_rate must be >= 0");
  bool disabled = ngram_min == 0 && ngram_max == 0;
  if (!disabled && (ngram_min < 1 || ngram_min > ngram_max)) {
    throw ContractError("EuclidConfig: ngram range must satisfy 1 <= min <= max, or be (0, 0)");
  }
  if (!(glove_x_max > 0.0) || !(glove_alpha > 0.0)) throw ContractError("EuclidConfig: GloVe x_max and alpha must be > 0");
}

std::optional<std::vector<double>> EmbeddingMatrix::word_vector(std::string_view token) const {
  if (auto idx = vocab.find(token)) {
    auto r = vectors.row_span(*idx);
    return std::vector<double>(r.begin(), r.end());
  }
  if (!has_subwords()) return std::nullopt;
  std::vector<double> v(dim, 0.0);
  bool any = false;
  for (const auto& g : char_ngrams(token, ngram_min, ngram_max)) {
    auto it = ngram_index.find(g);
    if (it == ngram_index.end()) continue;
    axpy(1.0, ngram_vectors.row_span(it->second), v);
    any = true;
  }
  if (!any) return std::nullopt;
  return v;
}

// ---- co-occurrence ----

void CooccurrenceTable::add(std::uint32_t i, std::uint32_t j, double x) { cells_[key(i, j)] += x; }

double CooccurrenceTable::get(std::uint32_t i, std::uint32_t j) const {
  auto it = cells_.find(key(i, j));
  return it == cells_.end() ? 0.0 : it->second;
}

std::vector<CooccurrenceTable::Entry> CooccurrenceTable::entries() const {
  std::vector<Entry> out;
  out.reserve(cells_.size());
  for (const auto& [k, v] : cells_) {
    out.push_back({static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xffffffffu), v});
  }
  std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return out;
}

std::vector<std::vector<std::uint32_t>> index_sentences(const std::vector<AnnotatedPost>& posts,
                                                        const Vocabulary& vocab) {
  std::vector<std::vector<std::uint32_t>> out;
  for (const auto& post : posts) {
    for (const auto& sentence : post.sentences) {
      std::vector<std::uint32_t> ids;
      ids.reserve(sentence.size());
      for (const auto& t : sentence) ids.push_back(static_cast<std::uint32_t>(vocab.index_or_unk(t)));
      if (!ids.empty()) out.push_back(std::move(ids));
    }
  }
  return out;
}

EmbeddingMatrix train_skipgram(const std::vector<AnnotatedPost>& posts, const Vocabulary& vocab,
                               const EuclidConfig& config) {
  return train_skipgram_family(posts, vocab, config, false);
}

EmbeddingMatrix train_subword_skipgram(const std::vector<AnnotatedPost>& posts, const Vocabulary& vocab,
                                       const EuclidConfig& config) {
  return train_skipgram_family(posts, vocab, config, true);
}

CooccurrenceTable build_cooccurrence(const std::vector<AnnotatedPost>& posts, const Vocabulary& vocab,
                                     std::size_t window) {
  if (window < 1) throw ContractError("build_cooccurrence: window must be >= 1");
  CooccurrenceTable table;
  for (const auto& sentence : index_sentences(posts, vocab)) {
    for (std::size_t p = 0; p < sentence.size(); ++p) {
      std::size_t hi = std::min(sentence.size(), p + window + 1);
      for (std::size_t q = p + 1; q < hi; ++q) {
        double w = 1.0 / static_cast<double>(q - p);
        table.add(sentence[p], sentence[q], w);
        table.add(sentence[q], sentence[p], w);
      }
    }
  }
  return table;
}

// ---- GloVe ----

double glove_weight(double x, double x_max, double alpha) { return x < x_max ? std::pow(x / x_max, alpha) : 1.0; }

EmbeddingMatrix train_glove(const CooccurrenceTable& table, const Vocabulary& vocab, const EuclidConfig& config) {
  config.validate();
  if (table.empty()) throw TrainingError("glove: empty co-occurrence table");
  const std::size_t dim = config.dim;
  const std::size_t n = vocab.size();
  Rng rng(derive_seed(config.seed, "glove"));

  EmbeddingMatrix emb;
  emb.vocab = vocab;
  emb.dim = dim;
  emb.input_vectors = Tensor({n, dim});
  emb.output_vectors = Tensor({n, dim});
  init_uniform(emb.input_vectors, 0.5 / static_cast<double>(dim), rng);
  init_uniform(emb.output_vectors, 0.5 / static_cast<double>(dim), rng);
  std::vector<double> bias(n, 0.0), ctx_bias(n, 0.0);

  // AdaGrad accumulators start at 1.
  Tensor sq_w({n, dim}, 1.0), sq_c({n, dim}, 1.0);
  std::vector<double> sq_b(n, 1.0), sq_bc(n, 1.0);

  auto entries = table.entries();
  for (const auto& e : entries) {
    if (e.row >= n || e.col >= n) throw ContractError("glove: table index outside vocabulary");
    if (!(e.value > 0.0)) throw ContractError("glove: table values must be positive");
  }
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const double lr = config.learning_rate;
  std::vector<double> gw(dim), gc(dim);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    for (auto idx : order) {
      const auto& e = entries[idx];
      auto w = emb.input_vectors.row_span(e.row);
      auto c = emb.output_vectors.row_span(e.col);
      double diff = dot(w, c) + bias[e.row] + ctx_bias[e.col] - std::log(e.value);
      double fx = glove_weight(e.value, config.glove_x_max, config.glove_alpha);
      double g = 2.0 * fx * diff;
      for (std::size_t k = 0; k < dim; ++k) {
        gw[k] = g * c[k];
        gc[k] = g * w[k];
      }
      auto sw = sq_w.row_span(e.row);
      auto sc = sq_c.row_span(e.col);
      for (std::size_t k = 0; k < dim; ++k) {
        w[k] -= lr * gw[k] / std::sqrt(sw[k]);
        c[k] -= lr * gc[k] / std::sqrt(sc[k]);
        sw[k] += gw[k] * gw[k];
        sc[k] += gc[k] * gc[k];
      }
      bias[e.row] -= lr * g / std::sqrt(sq_b[e.row]);
      ctx_bias[e.col] -= lr * g / std::sqrt(sq_bc[e.col]);
      sq_b[e.row] += g * g;
      sq_bc[e.col] += g * g;
    }
    double objective = 0.0;
    for (const auto& e : entries) {
      double diff = dot(emb.input_vectors.row_span(e.row), emb.output_vectors.row_span(e.col)) + bias[e.row] +
                    ctx_bias[e.col] - std::log(e.value);
      objective += glove_weight(e.value, config.glove_x_max, config.glove_alpha) * diff * diff;
    }
    emb.epoch_loss.push_back(objective / static_cast<double>(entries.size()));
  }

  // Biases are appended as trailing state so glove_loss can rebuild the
  // objective; the final vectors are w + w~.
  emb.vectors = emb.input_vectors;
  for (std::size_t i = 0; i < n; ++i) axpy(1.0, emb.output_vectors.row_span(i), emb.vectors.row_span(i));
  emb.ngram_vectors = Tensor({2, n});
  std::copy(bias.begin(), bias.end(), emb.ngram_vectors.row_span(0).begin());
  std::copy(ctx_bias.begin(), ctx_bias.end(), emb.ngram_vectors.row_span(1).begin());
  return emb;
}

double glove_loss(const CooccurrenceTable& table, const EmbeddingMatrix& emb, const EuclidConfig& config) {
  double total = 0.0;
  const std::size_t n = emb.vocab.size();
  bool has_bias = emb.ngram_vectors.rank() == 2 && emb.ngram_vectors.rows() == 2 && emb.ngram_vectors.cols() == n &&
                  !emb.has_subwords();
  for (const auto& e : table.entries()) {
    double b = has_bias ? emb.ngram_vectors.at(0, e.row) : 0.0;
    double bc = has_bias ? emb.ngram_vectors.at(1, e.col) : 0.0;
    double diff = dot(emb.input_vectors.row_span(e.row), emb.output_vectors.row_span(e.col)) + b + bc -
                  std::log(e.value);
    total += glove_weight(e.value, config.glove_x_max, config.glove_alpha) * diff * diff;
  }
  return total;
}

// ---- per-step objectives (verification surface) ----

double skipgram_pair_loss(std::span<const double> params, std::size_t dim) {
  if (dim == 0 || params.size() % dim != 0 || params.size() < 2 * dim) {
    throw DimensionError("skipgram_pair_loss: parameter pack must hold at least two rows of dim");
  }
  auto v = params.subspan(0, dim);
  double loss = -log_sigmoid(dot(v, params.subspan(dim, dim)));
  for (std::size_t off = 2 * dim; off < params.size(); off += dim) loss -= log_sigmoid(-dot(v, params.subspan(off, dim)));
  return loss;
}

Tensor skipgram_pair_gradient(std::span<const double> params, std::size_t dim) {
  if (dim == 0 || params.size() % dim != 0 || params.size() < 2 * dim) {
    throw DimensionError("skipgram_pair_gradient: parameter pack must hold at least two rows of dim");
  }
  // The update kernel with lr = 1 moves each block by minus its gradient.
  std::vector<double> work(params.begin(), params.end());
  std::vector<double*> outputs;
  for (std::size_t off = dim; off < work.size(); off += dim) outputs.push_back(work.data() + off);
  std::vector<double> center(params.begin(), params.begin() + static_cast<long>(dim));
  std::vector<double> delta(dim, 0.0);
  skipgram_pair_update(center, outputs, 1.0, delta);

  Tensor grad({params.size()});
  for (std::size_t k = 0; k < dim; ++k) grad[k] = -delta[k];
  for (std::size_t i = dim; i < params.size(); ++i) grad[i] = params[i] - work[i];
  return grad;
}

double glove_term_loss(std::span<const double> params, std::size_t dim, double x, double x_max, double alpha) {
  if (params.size() != 2 * dim + 2) throw DimensionError("glove_term_loss: expected 2*dim+2 parameters");
  double diff = dot(params.subspan(0, dim), params.subspan(dim, dim)) + params[2 * dim] + params[2 * dim + 1] -
                std::log(x);
  return glove_weight(x, x_max, alpha) * diff * diff;
}

Tensor glove_term_gradient(std::span<const double> params, std::size_t dim, double x, double x_max, double alpha) {
  if (params.size() != 2 * dim + 2) throw DimensionError("glove_term_gradient: expected 2*dim+2 parameters");
  auto w = params.subspan(0, dim);
  auto c = params.subspan(dim, dim);
  double diff = dot(w, c) + params[2 * dim] + params[2 * dim + 1] - std::log(x);
  double g = 2.0 * glove_weight(x, x_max, alpha) * diff;
  Tensor grad({params.size()});
  for (std::size_t k = 0; k < dim; ++k) {
    grad[k] = g * c[k];
    grad[dim + k] = g * w[k];
  }
  grad[2 * dim] = g;
  grad[2 * dim + 1] = g;
  return grad;
}

// ---- queries ----

std::vector<std::pair<std::string, double>> nearest_neighbors(const EmbeddingMatrix& emb, std::string_view token,
                                                              std::size_t k) {
  const std::size_t n = emb.vocab.size();
  if (k < 1 || k >= n) throw ContractError("nearest_neighbors: need 1 <= k < |V| = " + std::to_string(n));
  auto query = emb.word_vector(token);
  if (!query) throw LookupError("unknown token '" + std::string(token) + "'");
  auto self = emb.vocab.find(token);

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (self && *self == i) continue;
    scored.emplace_back(emb.vocab.token(i), cosine(*query, emb.vectors.row_span(i)));
  }
  auto better = [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; };
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(k), scored.end(), better);
  scored.resize(k);
  return scored;
}

}  // namespace twotier
