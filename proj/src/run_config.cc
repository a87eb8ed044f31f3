#include "twotier/run_config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "twotier/errors.h"

namespace twotier {

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw FormatError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_real(const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw FormatError("expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("expected true or false, got '" + v + "'");
}

std::vector<std::uint64_t> to_uint_list(const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_uint(trim(item)));
  if (out.empty()) throw FormatError("expected a comma-separated list of integers");
  return out;
}

struct Key {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define UINT_KEY(name, help, field) \
  Key { name, help, [](RunConfig& c, const std::string& v) { c.field = to_uint(v); } }
#define REAL_KEY(name, help, field) \
  Key { name, help, [](RunConfig& c, const std::string& v) { c.field = to_real(v); } }

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = {
      UINT_KEY("seed", "base seed of every stage (overridden by --seed)", seed),
      UINT_KEY("words.dim", "Euclidean word vector dimension", pipeline.words.dim),
      UINT_KEY("words.window", "context window in tokens", pipeline.words.window),
      UINT_KEY("words.negatives", "negative samples per skipgram pair", pipeline.words.negatives),
      REAL_KEY("words.learning_rate", "initial skipgram / GloVe step size", pipeline.words.learning_rate),
      UINT_KEY("words.epochs", "training epochs", pipeline.words.epochs),
      UINT_KEY("words.min_count", "minimum token frequency kept in the vocabulary", pipeline.words.min_count),
      UINT_KEY("words.ngram_min", "shortest subword n-gram (0 with ngram_max=0 disables)", pipeline.words.ngram_min),
      UINT_KEY("words.ngram_max", "longest subword n-gram", pipeline.words.ngram_max),
      REAL_KEY("words.glove_x_max", "GloVe weighting cutoff", pipeline.words.glove_x_max),
      REAL_KEY("words.glove_alpha", "GloVe weighting exponent", pipeline.words.glove_alpha),
      UINT_KEY("poincare.dim", "Poincare ball dimension", pipeline.poincare.dim),
      REAL_KEY("poincare.learning_rate", "Riemannian SGD step size", pipeline.poincare.learning_rate),
      UINT_KEY("poincare.burn_in_epochs", "epochs run at the reduced burn-in rate", pipeline.poincare.burn_in_epochs),
      REAL_KEY("poincare.burn_in_lr_factor", "learning-rate multiplier during burn-in",
               pipeline.poincare.burn_in_lr_factor),
      UINT_KEY("poincare.negatives", "negative samples per edge", pipeline.poincare.negatives),
      UINT_KEY("poincare.epochs", "training epochs including burn-in", pipeline.poincare.epochs),
      REAL_KEY("poincare.epsilon", "distance kept from the ball boundary", pipeline.poincare.epsilon),
      Key{"poincare.verify_ball", "check the ball invariant after every step (true/false)",
          [](RunConfig& c, const std::string& v) { c.pipeline.poincare.verify_ball = to_bool(v); }},
      UINT_KEY("seq2seq.hidden_dim", "hidden size; 0 or the word dimension", pipeline.seq2seq.hidden_dim),
      REAL_KEY("seq2seq.teacher_forcing", "probability of feeding the true previous word",
               pipeline.seq2seq.teacher_forcing),
      REAL_KEY("seq2seq.learning_rate", "Adam step size", pipeline.seq2seq.learning_rate),
      REAL_KEY("seq2seq.final_lr_factor", "last-epoch learning rate as a fraction of the first",
               pipeline.seq2seq.final_lr_factor),
      UINT_KEY("seq2seq.epochs", "training epochs", pipeline.seq2seq.epochs),
      UINT_KEY("seq2seq.max_len", "longest sentence fed to the autoencoder", pipeline.seq2seq.max_len),
      UINT_KEY("seq2seq.train_subset", "maximum number of training sentences", pipeline.seq2seq.train_subset),
      Key{"seq2seq.loss", "objective that is backpropagated: token or sequence",
          [](RunConfig& c, const std::string& v) {
            if (v == "token") c.pipeline.seq2seq.loss = Seq2SeqLoss::PerToken;
            else if (v == "sequence") c.pipeline.seq2seq.loss = Seq2SeqLoss::SequenceSum;
            else throw FormatError("expected token or sequence, got '" + v + "'");
          }},
      UINT_KEY("classifier.conv_filters", "convolution output channels", pipeline.classifier.conv_filters),
      UINT_KEY("classifier.kernel_width", "convolution width in sequence steps", pipeline.classifier.kernel_width),
      UINT_KEY("classifier.gru_hidden", "GRU hidden size", pipeline.classifier.gru_hidden),
      REAL_KEY("classifier.dropout", "dropout before the output layer", pipeline.classifier.dropout),
      REAL_KEY("classifier.learning_rate", "gradient descent step size", pipeline.classifier.learning_rate),
      UINT_KEY("classifier.epochs", "training epochs", pipeline.classifier.epochs),
      UINT_KEY("classifier.batch_size", "posts per gradient step", pipeline.classifier.batch_size),
      REAL_KEY("classifier.clip_norm", "gradient L2 clipping threshold", pipeline.classifier.clip_norm),
      UINT_KEY("harness.repeats", "runs per experiment cell", repeats),
      Key{"harness.seeds", "comma-separated seeds, one per run",
          [](RunConfig& c, const std::string& v) { c.seeds = to_uint_list(v); }},
      Key{"paths.corpus", "annotated corpus used when --input is not given",
          [](RunConfig& c, const std::string& v) { c.corpus = v; }},
      Key{"paths.word_vectors", "word vector file used by later stages",
          [](RunConfig& c, const std::string& v) { c.word_vectors = v; }},
      Key{"paths.sentence_model", "seq2seq checkpoint used by train-classifier",
          [](RunConfig& c, const std::string& v) { c.sentence_model = v; }},
      UINT_KEY("nn.k", "neighbours listed by nn", nn_k),
  };
  return keys;
}

#undef UINT_KEY
#undef REAL_KEY

}  // namespace

std::vector<std::uint64_t> RunConfig::harness_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < repeats; ++i) out.push_back(seed + i);
  return out;
}

std::vector<std::pair<std::string, std::string>> run_config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : schema()) out.emplace_back(k.name, k.help);
  return out;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto where = "config line " + std::to_string(line_no) + ": ";
    auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    const Key* entry = nullptr;
    for (const auto& k : schema()) {
      if (key == k.name) entry = &k;
    }
    if (entry == nullptr) throw FormatError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw FormatError(where + "key '" + key + "' given twice");
    if (value.empty()) throw FormatError(where + "empty value for '" + key + "'");
    try {
      entry->set(c, value);
    } catch (const FormatError& e) {
      throw FormatError(where + key + ": " + e.what());
    }
  }
  if (!c.seeds.empty() && seen.count("harness.repeats") && c.seeds.size() != c.repeats) {
    throw FormatError("config: harness.repeats must equal the number of harness.seeds");
  }
  if (!c.seeds.empty()) c.repeats = c.seeds.size();
  if (c.repeats < 1) throw FormatError("config: harness.repeats must be >= 1");
  try {
    c.pipeline.words.validate();
    c.pipeline.poincare.validate();
    c.pipeline.seq2seq.validate();
    c.pipeline.classifier.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace twotier
