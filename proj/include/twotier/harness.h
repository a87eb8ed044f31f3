#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twotier/classifier.h"
#include "twotier/embedding_io.h"
#include "twotier/euclid_embed.h"
#include "twotier/hyperbolic.h"
#include "twotier/metrics.h"
#include "twotier/sentence_encoders.h"
#include "twotier/text_corpus.h"

namespace twotier {

enum class WordFamily { Skipgram, Subword, GloVe, Poincare };
enum class SentenceEncoderKind { None, MaxPool, MinPool, AvgPool, GRU, GRUAttn, LSTM, LSTMAttn };

inline constexpr WordFamily kAllWordFamilies[] = {WordFamily::Skipgram, WordFamily::Subword, WordFamily::GloVe,
                                                  WordFamily::Poincare};
inline constexpr SentenceEncoderKind kAllSentenceEncoders[] = {
    SentenceEncoderKind::None, SentenceEncoderKind::MaxPool, SentenceEncoderKind::MinPool,
    SentenceEncoderKind::AvgPool, SentenceEncoderKind::GRU, SentenceEncoderKind::GRUAttn,
    SentenceEncoderKind::LSTM, SentenceEncoderKind::LSTMAttn};

std::string_view to_string(WordFamily family);
std::string_view to_string(SentenceEncoderKind kind);
WordFamily parse_word_family(std::string_view name);
SentenceEncoderKind parse_sentence_encoder(std::string_view name);
bool is_seq2seq(SentenceEncoderKind kind);

// Hyperparameters of every stage of a pipeline. Stage seeds are overwritten
// with the experiment seed of each run.
struct PipelineConfig {
  EuclidConfig words;
  PoincareConfig poincare;
  Seq2SeqConfig seq2seq;
  ClassifierConfig classifier;
};

struct ExperimentSpec {
  WordFamily word_embedding = WordFamily::Skipgram;
  SentenceEncoderKind sentence_encoder = SentenceEncoderKind::None;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  PipelineConfig config;

  std::size_t repeats() const { return seeds.size(); }
  void validate() const;
};

// Receives progress events; used to audit that test labels are read only
// when scoring.
class ExperimentObserver {
 public:
  virtual ~ExperimentObserver() = default;
  virtual void on_stage(std::string_view stage, std::uint64_t seed) {
    (void)stage;
    (void)seed;
  }
  virtual void on_test_label_read(std::size_t index) { (void)index; }
};

// ---- single stages ----

WordVectors train_word_vectors(WordFamily family, const std::vector<AnnotatedPost>& posts, const PipelineConfig& config,
                               std::uint64_t seed);

// Pooling encoders need no training; seq2seq kinds train an autoencoder on
// `posts`.
SentenceEncoder train_sentence_encoder(SentenceEncoderKind kind, const std::vector<AnnotatedPost>& posts,
                                       const WordVectors& words, const PipelineConfig& config, std::uint64_t seed);

// Seq2seq configuration for an encoder kind (cell and attention filled in).
Seq2SeqConfig seq2seq_config_for(SentenceEncoderKind kind, const PipelineConfig& config, std::uint64_t seed);

// Classifier input of a post: all word vectors in order for the one-tier
// setting, one vector per sentence otherwise.
FeatureSequence featurize(const AnnotatedPost& post, SentenceEncoderKind kind, const SentenceEncoder* encoder,
                          const WordVectors& words);

// Trains every tier on split.train (validation for model selection) and
// scores split.test, once per seed. Failures surface as StageError.
MetricsReport run_experiment(const ExperimentSpec& spec, const CorpusSplit& split,
                             ExperimentObserver* observer = nullptr);

// 4 one-tier cells followed by the 28 two-tier cells.
std::vector<ExperimentSpec> full_grid(const PipelineConfig& config, const std::vector<std::uint64_t>& seeds);

struct CellResult {
  ExperimentSpec spec;
  MetricsReport report;
  std::optional<std::string> error;
};

// Runs cells on up to `workers` threads; results keep the order of `specs`.
std::vector<CellResult> run_grid(const std::vector<ExperimentSpec>& specs, const CorpusSplit& split,
                                 std::size_t workers);

// TWOTIER_WORKERS, default 1.
std::size_t workers_from_env();

// ---- reporting ----

// One row per seed plus a "mean" row per cell. Line endings are CRLF.
void write_results_csv(std::ostream& out, const std::vector<CellResult>& results);
std::vector<CellResult> read_results_csv(std::istream& in);

enum class TableFormat { Markdown, Csv };

// Rows grouped by word embedding, metrics as percentages with two decimals,
// the best F1 of each group marked.
std::string emit_table(const std::vector<CellResult>& results, TableFormat format);

// Quotes a CSV field when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view value);
// Splits one RFC 4180 record (without its line terminator).
std::vector<std::string> parse_csv_record(std::string_view line);

}  // namespace twotier
