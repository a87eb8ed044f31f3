#include <set>
#include <string>

#include "doctest.h"
#include "twotier/errors.h"
#include "twotier/run_config.h"

using namespace twotier;

namespace {

bool fails_with(const std::string& text, const std::string& fragment) {
  try {
    parse_run_config(text);
  } catch (const FormatError& e) {
    return std::string(e.what()).find(fragment) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("empty text gives the defaults") {
    auto c = parse_run_config("");
    CHECK(c.seed == 1);
    CHECK(c.repeats == 3);
    CHECK(c.pipeline.words.dim == PipelineConfig{}.words.dim);
    CHECK(c.harness_seeds() == std::vector<std::uint64_t>{1, 2, 3});
    CHECK_FALSE(c.corpus.has_value());
  }

  TEST_CASE("values of every kind parse") {
    auto c = parse_run_config(
        "# comment\n"
        "seed = 9\n"
        "words.dim=16\r\n"
        "  words.learning_rate = 0.05  \n"
        "\n"
        "poincare.verify_ball = true\n"
        "seq2seq.loss = sequence\n"
        "seq2seq.final_lr_factor = 0.5\n"
        "paths.corpus = data/corpus.jsonl\n"
        "nn.k = 4\n");
    CHECK(c.seed == 9);
    CHECK(c.pipeline.words.dim == 16);
    CHECK(c.pipeline.words.learning_rate == 0.05);
    CHECK(c.pipeline.poincare.verify_ball);
    CHECK(c.pipeline.seq2seq.loss == Seq2SeqLoss::SequenceSum);
    CHECK(c.pipeline.seq2seq.final_lr_factor == 0.5);
    CHECK(c.corpus.value() == "data/corpus.jsonl");
    CHECK(c.nn_k == 4);
    CHECK(c.harness_seeds() == std::vector<std::uint64_t>{9, 10, 11});
  }

  TEST_CASE("explicit seeds set the repeat count") {
    auto c = parse_run_config("harness.seeds = 5,7, 11\n");
    CHECK(c.repeats == 3);
    CHECK(c.harness_seeds() == std::vector<std::uint64_t>{5, 7, 11});
    CHECK(parse_run_config("harness.repeats = 1\n").harness_seeds() == std::vector<std::uint64_t>{1});
    CHECK(fails_with("harness.seeds = 1,2\nharness.repeats = 3\n", "harness.repeats"));
  }

  TEST_CASE("malformed files are format errors naming the line") {
    CHECK(fails_with("words.dimension = 3\n", "line 1: unknown key 'words.dimension'"));
    CHECK(fails_with("seed = 1\nseed = 2\n", "line 2: key 'seed' given twice"));
    CHECK(fails_with("\nwords.dim =\n", "line 2: empty value"));
    CHECK(fails_with("words.dim 3\n", "expected key=value"));
    CHECK(fails_with("words.dim = -3\n", "non-negative integer"));
    CHECK(fails_with("words.dim = 3x\n", "non-negative integer"));
    CHECK(fails_with("words.learning_rate = fast\n", "expected a number"));
    CHECK(fails_with("poincare.verify_ball = yes\n", "true or false"));
    CHECK(fails_with("seq2seq.loss = mse\n", "token or sequence"));
    CHECK(fails_with("harness.seeds = 1,,2\n", "harness.seeds"));
    CHECK(fails_with("harness.repeats = 0\n", ">= 1"));
  }

  TEST_CASE("values outside the module contracts are rejected") {
    CHECK(fails_with("poincare.dim = 1\n", "config:"));
    CHECK(fails_with("seq2seq.final_lr_factor = 2\n", "config:"));
    CHECK(fails_with("classifier.dropout = 1\n", "config:"));
  }

  TEST_CASE("schema keys are unique and documented") {
    std::set<std::string> names;
    for (const auto& [name, help] : run_config_keys()) {
      CHECK(names.insert(name).second);
      CHECK_FALSE(help.empty());
    }
    CHECK(names.count("paths.word_vectors") == 1);
  }

  TEST_CASE("missing config file") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/twotier.cfg"), FormatError);
  }
}
