#include "twotier/harness.h"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "twotier/errors.h"

namespace twotier {

std::string_view to_string(WordFamily family) {
  switch (family) {
    case WordFamily::Skipgram:
      return "skipgram";
    case WordFamily::Subword:
      return "subword";
    case WordFamily::GloVe:
      return "glove";
    case WordFamily::Poincare:
      return "poincare";
  }
  return "?";
}

std::string_view to_string(SentenceEncoderKind kind) {
  switch (kind) {
    case SentenceEncoderKind::None:
      return "none";
    case SentenceEncoderKind::MaxPool:
      return "maxpool";
    case SentenceEncoderKind::MinPool:
      return "minpool";
    case SentenceEncoderKind::AvgPool:
      return "avgpool";
    case SentenceEncoderKind::GRU:
      return "gru";
    case SentenceEncoderKind::GRUAttn:
      return "gru-attn";
    case SentenceEncoderKind::LSTM:
      return "lstm";
    case SentenceEncoderKind::LSTMAttn:
      return "lstm-attn";
  }
  return "?";
}

WordFamily parse_word_family(std::string_view name) {
  for (auto f : kAllWordFamilies) {
    if (to_string(f) == name) return f;
  }
  throw ContractError("unknown word embedding family '" + std::string(name) + "'");
}

SentenceEncoderKind parse_sentence_encoder(std::string_view name) {
  for (auto k : kAllSentenceEncoders) {
    if (to_string(k) == name) return k;
  }
  throw ContractError("unknown sentence encoder '" + std::string(name) + "'");
}

bool is_seq2seq(SentenceEncoderKind kind) {
  return kind == SentenceEncoderKind::GRU || kind == SentenceEncoderKind::GRUAttn || kind == SentenceEncoderKind::LSTM ||
         kind == SentenceEncoderKind::LSTMAttn;
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ContractError("ExperimentSpec: at least one seed is required");
}

WordVectors train_word_vectors(WordFamily family, const std::vector<AnnotatedPost>& posts, const PipelineConfig& config,
                               std::uint64_t seed) {
  if (family == WordFamily::Poincare) {
    PoincareConfig pc = config.poincare;
    pc.seed = seed;
    return train_poincare(build_relation_graph(posts), pc).word_vectors();
  }
  EuclidConfig ec = config.words;
  ec.seed = seed;
  Vocabulary vocab = build_vocab(posts, ec.min_count);
  switch (family) {
    case WordFamily::Skipgram:
      return to_word_vectors(train_skipgram(posts, vocab, ec));
    case WordFamily::Subword:
      return to_word_vectors(train_subword_skipgram(posts, vocab, ec));
    case WordFamily::GloVe:
      return to_word_vectors(train_glove(build_cooccurrence(posts, vocab, ec.window), vocab, ec));
    case WordFamily::Poincare:
      break;
  }
  throw ContractError("train_word_vectors: unknown family");
}

Seq2SeqConfig seq2seq_config_for(SentenceEncoderKind kind, const PipelineConfig& config, std::uint64_t seed) {
  Seq2SeqConfig sc = config.seq2seq;
  sc.seed = seed;
  sc.cell = kind == SentenceEncoderKind::LSTM || kind == SentenceEncoderKind::LSTMAttn ? CellKind::LSTM : CellKind::GRU;
  sc.attention = kind == SentenceEncoderKind::GRUAttn || kind == SentenceEncoderKind::LSTMAttn;
  return sc;
}

SentenceEncoder train_sentence_encoder(SentenceEncoderKind kind, const std::vector<AnnotatedPost>& posts,
                                       const WordVectors& words, const PipelineConfig& config, std::uint64_t seed) {
  switch (kind) {
    case SentenceEncoderKind::None:
      throw ContractError("train_sentence_encoder: the one-tier setting has no sentence encoder");
    case SentenceEncoderKind::MaxPool:
      return SentenceEncoder(PoolingMode::Max);
    case SentenceEncoderKind::MinPool:
      return SentenceEncoder(PoolingMode::Min);
    case SentenceEncoderKind::AvgPool:
      return SentenceEncoder(PoolingMode::Avg);
    default:
      break;
  }
  auto model = std::make_shared<Seq2SeqModel>(train_autoencoder(posts, words, seq2seq_config_for(kind, config, seed)));
  return SentenceEncoder(std::move(model));
}

FeatureSequence featurize(const AnnotatedPost& post, SentenceEncoderKind kind, const SentenceEncoder* encoder,
                          const WordVectors& words) {
  if (kind == SentenceEncoderKind::None) {
    FeatureSequence out;
    for (auto& sentence : post_word_vectors(post, words)) {
      for (auto& v : sentence) out.push_back(std::move(v));
    }
    return out;
  }
  if (encoder == nullptr) throw ContractError("featurize: two-tier setting needs a sentence encoder");
  return encode_post(post, *encoder, words);
}

namespace {

template <typename F>
auto stage(const char* name, std::uint64_t seed, ExperimentObserver* observer, F&& body) {
  if (observer) observer->on_stage(name, seed);
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

MetricsReport run_experiment(const ExperimentSpec& spec, const CorpusSplit& split, ExperimentObserver* observer) {
  spec.validate();
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw StageError("split", "train, validation and test sets must be non-empty");
  }
  // The test posts are featurized from a copy without labels; labels are
  // read back one by one only when scoring.
  std::vector<AnnotatedPost> test_inputs = split.test;
  for (auto& p : test_inputs) p.label = Sentiment::Positive;

  MetricsReport report;
  for (std::uint64_t seed : spec.seeds) {
    WordVectors words = stage("words", seed, observer,
                              [&] { return train_word_vectors(spec.word_embedding, split.train, spec.config, seed); });
    std::optional<SentenceEncoder> encoder;
    if (spec.sentence_encoder != SentenceEncoderKind::None) {
      encoder = stage("sentence", seed, observer, [&] {
        return train_sentence_encoder(spec.sentence_encoder, split.train, words, spec.config, seed);
      });
    }
    const SentenceEncoder* enc = encoder ? &*encoder : nullptr;
    auto to_sequences = [&](const std::vector<AnnotatedPost>& posts) {
      std::vector<LabeledSequence> out;
      out.reserve(posts.size());
      for (const auto& p : posts) out.push_back({featurize(p, spec.sentence_encoder, enc, words), p.label});
      return out;
    };
    auto [train, validation, test] = stage("features", seed, observer, [&] {
      return std::make_tuple(to_sequences(split.train), to_sequences(split.validation), to_sequences(test_inputs));
    });
    TrainedClassifier clf = stage("classifier", seed, observer, [&] {
      ClassifierConfig cc = spec.config.classifier;
      cc.seed = seed;
      return train_classifier(train, validation, cc);
    });
    std::vector<Sentiment> predictions = stage("predict", seed, observer, [&] {
      std::vector<Sentiment> out;
      for (const auto& item : test) out.push_back(clf.predict(item.features).label);
      return out;
    });
    RunMetrics run = stage("evaluate", seed, observer, [&] {
      std::vector<Sentiment> labels;
      labels.reserve(split.test.size());
      for (std::size_t i = 0; i < split.test.size(); ++i) {
        if (observer) observer->on_test_label_read(i);
        labels.push_back(split.test[i].label);
      }
      return compute_metrics(predictions, labels);
    });
    report.add(seed, run);
  }
  return report;
}

std::vector<ExperimentSpec> full_grid(const PipelineConfig& config, const std::vector<std::uint64_t>& seeds) {
  std::vector<ExperimentSpec> grid;
  for (auto family : kAllWordFamilies) grid.push_back({family, SentenceEncoderKind::None, seeds, config});
  for (auto family : kAllWordFamilies) {
    for (auto kind : kAllSentenceEncoders) {
      if (kind != SentenceEncoderKind::None) grid.push_back({family, kind, seeds, config});
    }
  }
  return grid;
}

std::vector<CellResult> run_grid(const std::vector<ExperimentSpec>& specs, const CorpusSplit& split,
                                 std::size_t workers) {
  std::vector<CellResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      results[i].spec = specs[i];
      try {
        results[i].report = run_experiment(specs[i], split);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, specs.size()));
  if (workers == 1) {
    work();
    return results;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return results;
}

std::size_t workers_from_env() {
  const char* v = std::getenv("TWOTIER_WORKERS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ContractError("TWOTIER_WORKERS must be a positive integer");
  return static_cast<std::size_t>(n);
}

// ---- reporting ----

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  fields.push_back(std::move(cur));
  return fields;
}

namespace {

constexpr const char* kResultColumns[] = {"word_embedding", "sentence_encoder", "seed", "accuracy",
                                          "precision",      "recall",           "f1"};

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << "\r\n";
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * x);
  return buf;
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<CellResult>& results) {
  write_row(out, {std::begin(kResultColumns), std::end(kResultColumns)});
  for (const auto& r : results) {
    std::string we(to_string(r.spec.word_embedding));
    std::string se(to_string(r.spec.sentence_encoder));
    if (r.error) continue;
    const auto& rep = r.report;
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
      const auto& m = rep.runs[i];
      write_row(out, {we, se, std::to_string(rep.seeds[i]), format_double(m.accuracy), format_double(m.precision),
                      format_double(m.recall), format_double(m.f1)});
    }
    write_row(out, {we, se, "mean", format_double(rep.accuracy), format_double(rep.precision),
                    format_double(rep.recall), format_double(rep.f1)});
  }
}

std::vector<CellResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("results CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = parse_csv_record(line);
  if (header != std::vector<std::string>(std::begin(kResultColumns), std::end(kResultColumns))) {
    throw FormatError("results CSV: unexpected header '" + line + "'");
  }
  std::vector<CellResult> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = parse_csv_record(line);
    if (f.size() != 7) throw FormatError("results CSV line " + std::to_string(line_no) + ": expected 7 fields");
    auto key = std::make_pair(f[0], f[1]);
    auto [it, inserted] = index.emplace(key, out.size());
    if (inserted) {
      CellResult cell;
      cell.spec.word_embedding = parse_word_family(f[0]);
      cell.spec.sentence_encoder = parse_sentence_encoder(f[1]);
      cell.spec.seeds.clear();
      out.push_back(std::move(cell));
    }
    auto& rep = out[it->second].report;
    try {
      if (f[2] == "mean") {
        rep.accuracy = std::stod(f[3]);
        rep.precision = std::stod(f[4]);
        rep.recall = std::stod(f[5]);
        rep.f1 = std::stod(f[6]);
      } else {
        RunMetrics m;
        m.accuracy = std::stod(f[3]);
        m.precision = std::stod(f[4]);
        m.recall = std::stod(f[5]);
        m.f1 = std::stod(f[6]);
        std::uint64_t seed = std::stoull(f[2]);
        rep.seeds.push_back(seed);
        rep.runs.push_back(m);
        out[it->second].spec.seeds.push_back(seed);
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("results CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return out;
}

std::string emit_table(const std::vector<CellResult>& results, TableFormat format) {
  if (results.empty()) throw ContractError("emit_table: empty result grid");
  std::ostringstream out;
  if (format == TableFormat::Markdown) {
    out << "| Word embedding | Sentence embedding | Accuracy | Precision | Recall | F1 |\n";
    out << "|---|---|---:|---:|---:|---:|\n";
  } else {
    write_row(out, {"word_embedding", "sentence_encoder", "accuracy", "precision", "recall", "f1", "best_f1_in_group"});
  }
  for (auto family : kAllWordFamilies) {
    std::vector<const CellResult*> group;
    for (auto kind : kAllSentenceEncoders) {
      for (const auto& r : results) {
        if (!r.error && r.spec.word_embedding == family && r.spec.sentence_encoder == kind) group.push_back(&r);
      }
    }
    const CellResult* best = nullptr;
    for (const auto* r : group) {
      if (best == nullptr || r->report.f1 > best->report.f1) best = r;
    }
    for (const auto* r : group) {
      const auto& m = r->report;
      bool is_best = r == best;
      std::string we(to_string(family));
      std::string se(to_string(r->spec.sentence_encoder));
      if (format == TableFormat::Markdown) {
        std::string f1 = percent(m.f1);
        if (is_best) f1 = "**" + f1 + "**";
        out << "| " << we << " | " << se << " | " << percent(m.accuracy) << " | " << percent(m.precision) << " | "
            << percent(m.recall) << " | " << f1 << " |\n";
      } else {
        write_row(out, {we, se, percent(m.accuracy), percent(m.precision), percent(m.recall), percent(m.f1),
                        is_best ? "yes" : "no"});
      }
    }
  }
  return out.str();
}

}  // namespace twotier
