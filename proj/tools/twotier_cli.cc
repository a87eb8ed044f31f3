// Command-line front end: one subcommand per pipeline stage.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "twotier/classifier.h"
#include "twotier/embedding_io.h"
#include "twotier/errors.h"
#include "twotier/harness.h"
#include "twotier/hyperbolic.h"
#include "twotier/run_config.h"
#include "twotier/sentence_encoders.h"
#include "twotier/text_corpus.h"

namespace tt = twotier;

namespace {

// Misuse of the command line that CLI11 cannot detect on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string input;
  std::string output;
  std::string stopwords;
  std::string family;
  std::string encoder;
  std::string grid = "single";
  std::string token;
  std::optional<std::size_t> k;
  bool verbose = false;
};

tt::RunConfig load_config(const Options& opt) {
  tt::RunConfig c = opt.config.empty() ? tt::RunConfig{} : tt::load_run_config(opt.config);
  if (opt.seed) c.seed = *opt.seed;
  return c;
}

std::filesystem::path corpus_path(const Options& opt, const tt::RunConfig& c) {
  if (!opt.input.empty()) return opt.input;
  if (c.corpus) return *c.corpus;
  throw UsageError("--input is required (or set paths.corpus in the config)");
}

std::filesystem::path required(const std::optional<std::filesystem::path>& p, const char* key) {
  if (!p) throw UsageError(std::string("config key ") + key + " is required for this subcommand");
  return *p;
}

template <typename F>
auto run_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const tt::StageError&) {
    throw;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw tt::StageError(stage, e.what());
  }
}

void print_losses(const Options& opt, const char* what, const std::vector<double>& losses) {
  if (!opt.verbose) return;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::cerr << what << " epoch " << (i + 1) << " loss " << tt::format_double(losses[i]) << '\n';
  }
}

std::string summary_seconds(std::chrono::steady_clock::time_point start) {
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fs", s);
  return buf;
}

std::string cmd_preprocess(const Options& opt) {
  if (opt.input.empty() || opt.output.empty()) throw UsageError("preprocess needs --input and --output");
  auto raw = run_stage("read", [&] { return tt::read_raw_corpus(opt.input); });
  tt::StopWords stop;
  if (!opt.stopwords.empty()) stop = run_stage("read", [&] { return tt::read_stopwords(opt.stopwords); });
  tt::AnnotationSummary summary;
  auto posts = run_stage("annotate", [&] { return tt::annotate_posts(raw, stop, &summary); });
  run_stage("write", [&] { tt::write_annotated_corpus(opt.output, posts); });
  return "preprocess: " + std::to_string(raw.size()) + " posts read, " + std::to_string(summary.kept) + " kept, " +
         std::to_string(summary.skipped_label) + " without a majority reaction, " +
         std::to_string(summary.skipped_empty) + " empty after cleaning";
}

tt::WordVectors train_words(const std::vector<tt::AnnotatedPost>& posts, tt::WordFamily family,
                            const tt::RunConfig& c, const Options& opt, std::string* detail) {
  return run_stage("train-words", [&] {
    if (family == tt::WordFamily::Poincare) {
      tt::PoincareConfig pc = c.pipeline.poincare;
      pc.seed = c.seed;
      auto emb = tt::train_poincare(tt::build_relation_graph(posts), pc);
      print_losses(opt, "poincare", emb.epoch_loss);
      return emb.word_vectors();
    }
    tt::EuclidConfig ec = c.pipeline.words;
    ec.seed = c.seed;
    auto vocab = tt::build_vocab(posts, ec.min_count);
    tt::EmbeddingMatrix emb;
    if (family == tt::WordFamily::Skipgram) emb = tt::train_skipgram(posts, vocab, ec);
    else if (family == tt::WordFamily::Subword) emb = tt::train_subword_skipgram(posts, vocab, ec);
    else emb = tt::train_glove(tt::build_cooccurrence(posts, vocab, ec.window), vocab, ec);
    print_losses(opt, std::string(tt::to_string(family)).c_str(), emb.epoch_loss);
    if (!emb.epoch_loss.empty()) *detail = ", final loss " + tt::format_double(emb.epoch_loss.back());
    return tt::to_word_vectors(emb);
  });
}

std::string cmd_train_words(const Options& opt) {
  if (opt.output.empty() || opt.family.empty()) throw UsageError("train-words needs --family and --output");
  auto c = load_config(opt);
  auto family = tt::parse_word_family(opt.family);
  auto posts = run_stage("read", [&] { return tt::read_annotated_corpus(corpus_path(opt, c)); });
  std::string detail;
  auto wv = train_words(posts, family, c, opt, &detail);
  run_stage("write", [&] { tt::write_embedding(opt.output, wv); });
  return "train-words: " + std::to_string(wv.size()) + " vectors of dim " + std::to_string(wv.dim()) + detail;
}

std::string cmd_train_poincare(const Options& opt) {
  if (opt.output.empty()) throw UsageError("train-poincare needs --output");
  auto c = load_config(opt);
  auto posts = run_stage("read", [&] { return tt::read_annotated_corpus(corpus_path(opt, c)); });
  tt::PoincareConfig pc = c.pipeline.poincare;
  pc.seed = c.seed;
  auto graph = tt::build_relation_graph(posts);
  auto emb = run_stage("train-poincare", [&] { return tt::train_poincare(graph, pc); });
  print_losses(opt, "poincare", emb.epoch_loss);
  run_stage("write", [&] {
    tt::write_embedding(opt.output, emb.word_vectors());
    tt::write_relation_graph_tsv(opt.output + ".graph.tsv", graph);
    std::vector<std::string> words(emb.entities.begin(), emb.entities.begin() + static_cast<long>(emb.word_count));
    std::ofstream out(opt.output + ".2d.tsv", std::ios::binary);
    for (const auto& p : tt::export_2d_projection(emb, words)) {
      out << p.entity << '\t' << tt::format_double(p.x) << '\t' << tt::format_double(p.y) << '\n';
    }
    if (!out) throw tt::FormatError("cannot write " + opt.output + ".2d.tsv");
  });
  return "train-poincare: " + std::to_string(graph.words.size()) + " words, " +
         std::to_string(graph.sentences.size()) + " sentences, " + std::to_string(graph.edges.size()) + " edges";
}

std::string cmd_train_sentence(const Options& opt) {
  if (opt.output.empty() || opt.encoder.empty()) throw UsageError("train-sentence needs --encoder and --output");
  auto kind = tt::parse_sentence_encoder(opt.encoder);
  if (!tt::is_seq2seq(kind)) throw UsageError("train-sentence trains seq2seq encoders only; pooling has no parameters");
  auto c = load_config(opt);
  auto posts = run_stage("read", [&] { return tt::read_annotated_corpus(corpus_path(opt, c)); });
  auto words = run_stage("read", [&] { return tt::read_embedding(required(c.word_vectors, "paths.word_vectors")); });
  auto model = run_stage("train-sentence", [&] {
    return tt::train_autoencoder(posts, words, tt::seq2seq_config_for(kind, c.pipeline, c.seed));
  });
  print_losses(opt, "seq2seq", model.epoch_token_loss);
  run_stage("write", [&] { tt::write_checkpoint(opt.output, model.to_checkpoint()); });
  std::string loss = model.epoch_token_loss.empty() ? "n/a" : tt::format_double(model.epoch_token_loss.back());
  return "train-sentence: " + std::string(tt::to_string(kind)) + ", final token loss " + loss + ", " +
         std::to_string(model.truncated_sentences) + " sentences truncated";
}

std::string cmd_train_classifier(const Options& opt) {
  if (opt.output.empty() || opt.encoder.empty()) throw UsageError("train-classifier needs --encoder and --output");
  auto kind = tt::parse_sentence_encoder(opt.encoder);
  auto c = load_config(opt);
  auto posts = run_stage("read", [&] { return tt::read_annotated_corpus(corpus_path(opt, c)); });
  auto words = run_stage("read", [&] { return tt::read_embedding(required(c.word_vectors, "paths.word_vectors")); });
  std::optional<tt::SentenceEncoder> encoder;
  switch (kind) {
    case tt::SentenceEncoderKind::None:
      break;
    case tt::SentenceEncoderKind::MaxPool:
      encoder.emplace(tt::PoolingMode::Max);
      break;
    case tt::SentenceEncoderKind::MinPool:
      encoder.emplace(tt::PoolingMode::Min);
      break;
    case tt::SentenceEncoderKind::AvgPool:
      encoder.emplace(tt::PoolingMode::Avg);
      break;
    default: {
      auto path = required(c.sentence_model, "paths.sentence_model");
      auto model = run_stage("read", [&] { return tt::Seq2SeqModel::from_checkpoint(tt::read_checkpoint(path)); });
      encoder.emplace(std::make_shared<const tt::Seq2SeqModel>(std::move(model)));
    }
  }
  auto split = run_stage("split", [&] { return tt::split_holdout(posts, c.seed); });
  tt::ClassifierConfig cc = c.pipeline.classifier;
  cc.seed = c.seed;
  const tt::SentenceEncoder* enc = encoder ? &*encoder : nullptr;
  auto clf = run_stage("train-classifier", [&] {
    return tt::train_classifier(split.train, split.validation, cc,
                                [&](const tt::AnnotatedPost& p) { return tt::featurize(p, kind, enc, words); });
  });
  print_losses(opt, "classifier", clf.epoch_train_loss);
  run_stage("write", [&] { tt::write_checkpoint(opt.output, clf.to_checkpoint()); });
  double f1 = clf.epoch_validation_f1.empty() ? 0.0 : clf.epoch_validation_f1[clf.best_epoch];
  return "train-classifier: best epoch " + std::to_string(clf.best_epoch + 1) + ", validation F1 " +
         tt::format_double(f1);
}

std::string cmd_evaluate(const Options& opt) {
  if (opt.output.empty()) throw UsageError("evaluate needs --output");
  auto c = load_config(opt);
  auto posts = run_stage("read", [&] { return tt::read_annotated_corpus(corpus_path(opt, c)); });
  auto split = run_stage("split", [&] { return tt::split_holdout(posts, c.seed); });
  std::vector<tt::ExperimentSpec> specs;
  if (opt.grid == "full") {
    specs = tt::full_grid(c.pipeline, c.harness_seeds());
  } else if (opt.grid == "single") {
    if (opt.family.empty() || opt.encoder.empty()) throw UsageError("--grid single needs --family and --encoder");
    specs.push_back({tt::parse_word_family(opt.family), tt::parse_sentence_encoder(opt.encoder), c.harness_seeds(),
                     c.pipeline});
  } else {
    throw UsageError("--grid must be full or single");
  }
  auto results = tt::run_grid(specs, split, tt::workers_from_env());
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (r.error) {
      ++failed;
      std::cerr << "error in cell " << tt::to_string(r.spec.word_embedding) << "/"
                << tt::to_string(r.spec.sentence_encoder) << ": " << *r.error << '\n';
    }
  }
  run_stage("write", [&] {
    std::ofstream out(opt.output, std::ios::binary);
    if (!out) throw tt::FormatError("cannot write " + opt.output);
    tt::write_results_csv(out, results);
  });
  if (failed > 0) throw tt::StageError("evaluate", std::to_string(failed) + " cell(s) failed");
  return "evaluate: " + std::to_string(results.size()) + " cells, " + std::to_string(specs.front().seeds.size()) +
         " seed(s) each";
}

std::string cmd_nn(const Options& opt) {
  if (opt.input.empty() || opt.token.empty()) throw UsageError("nn needs --input and a query token");
  auto c = load_config(opt);
  std::size_t k = opt.k.value_or(c.nn_k);
  auto words = run_stage("read", [&] { return tt::read_embedding(opt.input); });
  auto result = run_stage("nn", [&] { return tt::nearest_neighbors(words, opt.token, std::min(k, words.size() - 1)); });
  std::ostringstream text;
  for (const auto& [token, score] : result) text << token << '\t' << tt::format_double(score) << '\n';
  if (opt.output.empty()) {
    std::cout << text.str();
  } else {
    run_stage("write", [&] {
      std::ofstream out(opt.output, std::ios::binary);
      out << text.str();
      if (!out) throw tt::FormatError("cannot write " + opt.output);
    });
  }
  return "nn: " + std::to_string(result.size()) + " neighbours of '" + opt.token + "'";
}

std::string cmd_export_table(const Options& opt) {
  if (opt.input.empty() || opt.output.empty()) throw UsageError("export-table needs --input and --output");
  auto results = run_stage("read", [&] {
    std::ifstream in(opt.input, std::ios::binary);
    if (!in) throw tt::FormatError("cannot open " + opt.input);
    return tt::read_results_csv(in);
  });
  auto format = std::filesystem::path(opt.output).extension() == ".csv" ? tt::TableFormat::Csv : tt::TableFormat::Markdown;
  std::string table = run_stage("export-table", [&] { return tt::emit_table(results, format); });
  run_stage("write", [&] {
    std::ofstream out(opt.output, std::ios::binary);
    out << table;
    if (!out) throw tt::FormatError("cannot write " + opt.output);
  });
  return "export-table: " + std::to_string(results.size()) + " rows";
}

std::string config_help() {
  std::string s = "Config keys (key=value, '#' comments):\n";
  for (const auto& [key, help] : tt::run_config_keys()) s += "  " + key + "  " + help + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tier text embedding toolkit"};
  app.require_subcommand(1);
  app.footer(config_help());
  Options opt;

  auto add_common = [&](CLI::App* sub) { sub->add_flag("--verbose", opt.verbose, "Print per-epoch losses to stderr"); };
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Flat key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "Base seed; overrides the config key 'seed'");
  };
  auto add_input = [&](CLI::App* sub, const char* what) {
    sub->add_option("--input", opt.input, what)->check(CLI::ExistingFile);
  };

  auto* pre = app.add_subcommand("preprocess", "Clean, split and label a raw JSON-lines corpus");
  add_input(pre, "Raw corpus (JSON lines)");
  pre->add_option("--stopwords", opt.stopwords, "Stop-word file, one token per line")->check(CLI::ExistingFile);
  pre->add_option("--output", opt.output, "Annotated corpus to write");
  add_common(pre);

  auto* words = app.add_subcommand("train-words", "Train word vectors");
  add_config(words);
  add_input(words, "Annotated corpus");
  words->add_option("--family", opt.family, "Word embedding family")
      ->check(CLI::IsMember({"skipgram", "subword", "glove", "poincare"}));
  words->add_option("--output", opt.output, "Embedding file to write");
  add_common(words);

  auto* poinc = app.add_subcommand("train-poincare", "Train Poincare word vectors from the word-sentence graph");
  add_config(poinc);
  add_input(poinc, "Annotated corpus");
  poinc->add_option("--output", opt.output, "Embedding file; <output>.graph.tsv and <output>.2d.tsv are written too");
  add_common(poinc);

  const std::vector<std::string> encoders = {"maxpool", "minpool", "avgpool", "gru",
                                             "gru-attn", "lstm",   "lstm-attn", "none"};
  auto* sent = app.add_subcommand("train-sentence", "Train a seq2seq sentence encoder");
  add_config(sent);
  add_input(sent, "Annotated corpus");
  sent->add_option("--encoder", opt.encoder, "Sentence encoder")->check(CLI::IsMember(encoders));
  sent->add_option("--output", opt.output, "Model checkpoint to write");
  add_common(sent);

  auto* clf = app.add_subcommand("train-classifier", "Train the CNN+GRU sentiment classifier");
  add_config(clf);
  add_input(clf, "Annotated corpus");
  clf->add_option("--encoder", opt.encoder, "Sentence encoder ('none' for word sequences)")
      ->check(CLI::IsMember(encoders));
  clf->add_option("--output", opt.output, "Classifier checkpoint to write");
  add_common(clf);

  auto* eval = app.add_subcommand("evaluate", "Run experiment cells and write a results CSV");
  add_config(eval);
  add_input(eval, "Annotated corpus (or config key paths.corpus)");
  eval->add_option("--grid", opt.grid, "full: all 32 cells; single: one cell from --family/--encoder")
      ->check(CLI::IsMember({"full", "single"}));
  eval->add_option("--family", opt.family, "Word embedding family for --grid single")
      ->check(CLI::IsMember({"skipgram", "subword", "glove", "poincare"}));
  eval->add_option("--encoder", opt.encoder, "Sentence encoder for --grid single")->check(CLI::IsMember(encoders));
  eval->add_option("--output", opt.output, "Results CSV to write");
  add_common(eval);

  auto* nn = app.add_subcommand("nn", "List nearest neighbours of a token");
  add_config(nn);
  add_input(nn, "Embedding file");
  nn->add_option("token", opt.token, "Query token")->required();
  nn->add_option("--k", opt.k, "Number of neighbours (default: config nn.k, 10)");
  nn->add_option("--output", opt.output, "Write the neighbour list here instead of stdout");
  add_common(nn);

  auto* table = app.add_subcommand("export-table", "Render a results CSV as a Markdown or CSV table");
  add_input(table, "Results CSV from evaluate");
  table->add_option("--output", opt.output, "Table file; a .csv extension selects CSV, anything else Markdown");
  add_common(table);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto start = std::chrono::steady_clock::now();
  try {
    std::string summary;
    if (*pre) summary = cmd_preprocess(opt);
    else if (*words) summary = cmd_train_words(opt);
    else if (*poinc) summary = cmd_train_poincare(opt);
    else if (*sent) summary = cmd_train_sentence(opt);
    else if (*clf) summary = cmd_train_classifier(opt);
    else if (*eval) summary = cmd_evaluate(opt);
    else if (*nn) summary = cmd_nn(opt);
    else if (*table) summary = cmd_export_table(opt);
    std::cout << summary << " (" << summary_seconds(start) << ")\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const tt::StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return 1;
  } catch (const tt::FormatError& e) {
    std::cerr << "error [config]: " << e.what() << '\n';
    return 1;
  } catch (const tt::ContractError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
