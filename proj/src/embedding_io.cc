#include "twotier/embedding_io.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "twotier/errors.h"
#include "twotier/hyperbolic.h"

namespace twotier {

WordVectors::WordVectors(std::vector<std::string> tokens, Tensor matrix, VectorSpace space, double epsilon)
    : tokens_(std::move(tokens)), matrix_(std::move(matrix)), space_(space), epsilon_(epsilon) {
  if (matrix_.rank() != 2 || matrix_.rows() != tokens_.size()) {
    throw DimensionError("WordVectors: " + std::to_string(tokens_.size()) + " tokens but matrix " +
                         shape_string(matrix_.shape()));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw FormatError("WordVectors: duplicate token '" + tokens_[i] + "'");
  }
}

std::optional<std::size_t> WordVectors::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void WordVectors::set_subwords(std::size_t n_min, std::size_t n_max, std::vector<std::string> ngrams, Tensor vectors) {
  if (ngrams.empty()) return;
  if (vectors.rank() != 2 || vectors.rows() != ngrams.size() || vectors.cols() != dim()) {
    throw DimensionError("WordVectors: n-gram table shape " + shape_string(vectors.shape()));
  }
  if (n_min < 1 || n_min > n_max) throw ContractError("WordVectors: invalid n-gram range");
  ngram_min_ = n_min;
  ngram_max_ = n_max;
  ngrams_ = std::move(ngrams);
  ngram_vectors_ = std::move(vectors);
  ngram_index_.clear();
  for (std::size_t i = 0; i < ngrams_.size(); ++i) ngram_index_.emplace(ngrams_[i], i);
}

std::vector<double> WordVectors::lookup(std::string_view token) const {
  if (auto i = find(token)) {
    auto r = row(*i);
    return {r.begin(), r.end()};
  }
  if (has_subwords()) {
    std::vector<double> v(dim(), 0.0);
    bool any = false;
    for (const auto& g : char_ngrams(token, ngram_min_, ngram_max_)) {
      auto it = ngram_index_.find(g);
      if (it == ngram_index_.end()) continue;
      axpy(1.0, ngram_vectors_.row_span(it->second), v);
      any = true;
    }
    if (any) return v;
  }
  if (auto u = find(Vocabulary::special_name(Vocabulary::kUnk))) {
    auto r = row(*u);
    return {r.begin(), r.end()};
  }
  throw LookupError("no vector for token '" + std::string(token) + "'");
}

WordVectors to_word_vectors(const EmbeddingMatrix& emb) {
  WordVectors wv(emb.vocab.tokens(), emb.vectors);
  if (emb.has_subwords()) wv.set_subwords(emb.ngram_min, emb.ngram_max, emb.ngrams, emb.ngram_vectors);
  return wv;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

void write_table(std::ostream& out, const std::vector<std::string>& names, const Tensor& m) {
  out << names.size() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i];
    for (double x : m.row_span(i)) out << ' ' << format_double(x);
    out << '\n';
  }
}

struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> names;
  Tensor matrix;
};

double parse_double(std::string_view s, const std::filesystem::path& path, std::size_t line_no) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0, dim = 0;
  bool have_header = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    std::istringstream fields(line);
    if (!have_header) {
      if (!(fields >> count >> dim) || dim == 0) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected '<count> <dim>' header");
      }
      have_header = true;
      values.reserve(count * dim);
      continue;
    }
    std::string name, field;
    fields >> name;
    std::size_t n = 0;
    while (fields >> field) {
      values.push_back(parse_double(field, path, line_no));
      ++n;
    }
    if (n != dim) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, got " + std::to_string(n));
    }
    t.names.push_back(std::move(name));
  }
  if (!have_header) throw FormatError(path.string() + ": missing header");
  if (t.names.size() != count) {
    throw FormatError(path.string() + ": header declares " + std::to_string(count) + " rows, found " +
                      std::to_string(t.names.size()));
  }
  if (count > 0) t.matrix = Tensor({count, dim}, std::move(values));
  return t;
}

std::optional<std::string> comment_value(const std::vector<std::string>& comments, const std::string& key) {
  for (const auto& c : comments) {
    std::istringstream in(c.substr(1));
    std::string field;
    while (in >> field) {
      if (field.rfind(key + "=", 0) == 0) return field.substr(key.size() + 1);
    }
  }
  return std::nullopt;
}

std::filesystem::path ngram_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".ngrams";
  return p;
}

}  // namespace

void write_embedding(const std::filesystem::path& path, const WordVectors& vectors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  if (vectors.space() == VectorSpace::Poincare) {
    out << "# space=poincare epsilon=" << format_double(vectors.epsilon()) << '\n';
  }
  write_table(out, vectors.tokens(), vectors.matrix());
  if (!out) throw FormatError("write failed for " + path.string());

  if (vectors.has_subwords()) {
    std::ofstream ng(ngram_path(path), std::ios::binary);
    if (!ng) throw FormatError("cannot write " + ngram_path(path).string());
    ng << "# ngram_min=" << vectors.ngram_min() << " ngram_max=" << vectors.ngram_max() << '\n';
    write_table(ng, vectors.ngrams(), vectors.ngram_vectors());
  }
}

WordVectors read_embedding(const std::filesystem::path& path) {
  Table t = read_table(path);
  if (t.names.empty()) throw FormatError(path.string() + ": no vectors");
  VectorSpace space = VectorSpace::Euclidean;
  double epsilon = 0.0;
  if (auto s = comment_value(t.comments, "space"); s && *s == "poincare") {
    space = VectorSpace::Poincare;
    auto e = comment_value(t.comments, "epsilon");
    if (!e) throw FormatError(path.string() + ": poincare header without epsilon");
    epsilon = parse_double(*e, path, 1);
  }
  WordVectors wv(std::move(t.names), std::move(t.matrix), space, epsilon);

  auto ng = ngram_path(path);
  if (std::filesystem::exists(ng)) {
    Table g = read_table(ng);
    auto lo = comment_value(g.comments, "ngram_min");
    auto hi = comment_value(g.comments, "ngram_max");
    if (!lo || !hi) throw FormatError(ng.string() + ": missing ngram range comment");
    if (g.matrix.cols() != wv.dim()) throw FormatError(ng.string() + ": dimension differs from word table");
    wv.set_subwords(std::stoul(*lo), std::stoul(*hi), std::move(g.names), std::move(g.matrix));
  }
  return wv;
}

std::vector<std::pair<std::string, double>> nearest_neighbors(const WordVectors& vectors, std::string_view token,
                                                              std::size_t k) {
  const std::size_t n = vectors.size();
  if (k < 1 || k >= n) throw ContractError("nearest_neighbors: need 1 <= k < |V| = " + std::to_string(n));
  auto self = vectors.find(token);
  if (!self && !vectors.has_subwords()) throw LookupError("unknown token '" + std::string(token) + "'");
  std::vector<double> query = vectors.lookup(token);

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (self && *self == i) continue;
    double s = vectors.space() == VectorSpace::Poincare ? -poincare_distance(query, vectors.row(i))
                                                         : cosine(query, vectors.row(i));
    scored.emplace_back(vectors.tokens()[i], s);
  }
  auto better = [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; };
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(k), scored.end(), better);
  scored.resize(k);
  return scored;
}

}  // namespace twotier
