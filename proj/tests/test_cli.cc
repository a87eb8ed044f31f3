#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fixtures.h"
#include "twotier/embedding_io.h"
#include "twotier/harness.h"
#include "twotier/text_corpus.h"

using namespace twotier;
namespace fs = std::filesystem;

namespace {

const fs::path kScratch = TWOTIER_SCRATCH_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome run(const std::string& args) {
  const auto out = kScratch / "stdout.txt", err = kScratch / "stderr.txt";
  std::string cmd = std::string(TWOTIER_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string p(const std::string& name) { return (kScratch / name).string(); }

// Writes the small annotated corpus and config used by most cases.
void setup() {
  fs::create_directories(kScratch);
  write_annotated_corpus(kScratch / "corpus.jsonl", fixtures::negation_corpus(160));
  std::ofstream cfg(kScratch / "tiny.cfg");
  cfg << "words.dim = 8\nwords.epochs = 1\nwords.min_count = 1\n"
         "poincare.dim = 4\npoincare.epochs = 2\npoincare.burn_in_epochs = 1\n"
         "seq2seq.epochs = 1\nseq2seq.train_subset = 40\n"
         "classifier.conv_filters = 4\nclassifier.gru_hidden = 4\nclassifier.epochs = 1\n"
         "classifier.learning_rate = 0.1\nharness.repeats = 1\n"
         "paths.corpus = " << p("corpus.jsonl") << "\n";
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("preprocess reports its counts") {
    setup();
    {
      std::ofstream raw(kScratch / "raw.jsonl");
      raw << R"({"id": "1", "text": "Great day!", "reactions": {"loves": 3}})" << "\n";
      raw << R"({"id": "2", "text": "meh", "reactions": {"likes": 9}})" << "\n";
      raw << R"({"id": "3", "text": "the bad news", "reactions": {"angry": 2}})" << "\n";
    }
    {
      std::ofstream stop(kScratch / "stop.txt");
      stop << "the\n";
    }
    auto r = run("preprocess --input " + p("raw.jsonl") + " --stopwords " + p("stop.txt") + " --output " +
                 p("pre.jsonl"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("3 posts read, 2 kept, 1 without a majority reaction") != std::string::npos);
    auto posts = read_annotated_corpus(kScratch / "pre.jsonl");
    REQUIRE(posts.size() == 2);
    CHECK(posts[1].sentences[0] == Sentence{"bad", "news"});
  }

  TEST_CASE("train-words writes a header of count and dimension") {
    setup();
    auto r = run("train-words --config " + p("tiny.cfg") + " --family skipgram --output " + p("sg.vec"));
    REQUIRE(r.code == 0);
    auto text = slurp(kScratch / "sg.vec");
    auto wv = read_embedding(kScratch / "sg.vec");
    CHECK(text.rfind(std::to_string(wv.size()) + " 8\n", 0) == 0);
    CHECK(wv.find("good").has_value());
  }

  TEST_CASE("reruns with the same seed are byte identical") {
    setup();
    for (std::string family : {"skipgram", "subword", "glove"}) {
      const std::string base = "train-words --config " + p("tiny.cfg") + " --seed 3 --family " + family;
      REQUIRE(run(base + " --output " + p("a.vec")).code == 0);
      REQUIRE(run(base + " --output " + p("b.vec")).code == 0);
      CHECK(slurp(kScratch / "a.vec") == slurp(kScratch / "b.vec"));
    }
    REQUIRE(run("train-poincare --config " + p("tiny.cfg") + " --output " + p("pa.vec")).code == 0);
    REQUIRE(run("train-poincare --config " + p("tiny.cfg") + " --output " + p("pb.vec")).code == 0);
    CHECK(slurp(kScratch / "pa.vec") == slurp(kScratch / "pb.vec"));
    CHECK(slurp(kScratch / "pa.vec.2d.tsv") == slurp(kScratch / "pb.vec.2d.tsv"));
    CHECK(fs::file_size(kScratch / "pa.vec.graph.tsv") > 0);
  }

  TEST_CASE("sentence and classifier stages chain through config paths") {
    setup();
    REQUIRE(run("train-words --config " + p("tiny.cfg") + " --family glove --output " + p("w.vec")).code == 0);
    {
      std::ofstream cfg(kScratch / "tiny.cfg", std::ios::app);
      cfg << "paths.word_vectors = " << p("w.vec") << "\n"
          << "paths.sentence_model = " << p("s2s.ckpt") << "\n";
    }
    auto s = run("train-sentence --config " + p("tiny.cfg") + " --encoder lstm --output " + p("s2s.ckpt"));
    REQUIRE(s.code == 0);
    auto c = run("train-classifier --config " + p("tiny.cfg") + " --encoder lstm --verbose --output " +
                 p("clf.ckpt"));
    REQUIRE(c.code == 0);
    CHECK(c.out.find("validation F1") != std::string::npos);
    CHECK(c.err.find("classifier epoch 1 loss") != std::string::npos);
    CHECK(fs::file_size(kScratch / "clf.ckpt") > 0);
  }

  TEST_CASE("evaluate and export-table") {
    setup();
    auto r = run("evaluate --config " + p("tiny.cfg") + " --grid single --family skipgram --encoder maxpool --output " +
                 p("results.csv"));
    REQUIRE(r.code == 0);
    std::ifstream in(kScratch / "results.csv", std::ios::binary);
    auto results = read_results_csv(in);
    REQUIRE(results.size() == 1);
    CHECK(results[0].spec.sentence_encoder == SentenceEncoderKind::MaxPool);

    REQUIRE(run("export-table --input " + p("results.csv") + " --output " + p("table.md")).code == 0);
    auto md = slurp(kScratch / "table.md");
    CHECK(md.rfind("| Word embedding | Sentence embedding |", 0) == 0);
    CHECK(md.find("**") != std::string::npos);
    REQUIRE(run("export-table --input " + p("results.csv") + " --output " + p("table.csv")).code == 0);
    CHECK(slurp(kScratch / "table.csv").rfind("word_embedding,sentence_encoder,", 0) == 0);
  }

  TEST_CASE("nn lists k neighbours") {
    setup();
    REQUIRE(run("train-words --config " + p("tiny.cfg") + " --family skipgram --output " + p("n.vec")).code == 0);
    auto r = run("nn good --input " + p("n.vec") + " --k 3");
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    int count = 0;
    for (std::string l; std::getline(lines, l);) count += l.find('\t') != std::string::npos;
    CHECK(count == 3);
    CHECK(run("nn zzzz --input " + p("n.vec")).code == 1);
  }

  TEST_CASE("usage errors exit with 2") {
    setup();
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("train-words --family word2vec --output " + p("x.vec")).code == 2);
    CHECK(run("train-words --config " + p("missing.cfg") + " --family skipgram --output " + p("x.vec")).code == 2);
    CHECK(run("evaluate --grid half --output " + p("x.csv")).code == 2);
    CHECK(run("train-words --bogus").code == 2);
  }

  TEST_CASE("data errors exit with 1 and name the stage") {
    setup();
    {
      std::ofstream bad(kScratch / "bad.jsonl");
      bad << "{broken\n";
    }
    auto r = run("preprocess --input " + p("bad.jsonl") + " --output " + p("x.jsonl"));
    CHECK(r.code == 1);
    CHECK(r.err.find("error [read]") != std::string::npos);
    {
      std::ofstream cfg(kScratch / "unknown.cfg");
      cfg << "words.size = 3\n";
    }
    r = run("train-words --config " + p("unknown.cfg") + " --family skipgram --output " + p("x.vec"));
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown key 'words.size'") != std::string::npos);
    r = run("train-sentence --config " + p("tiny.cfg") + " --encoder gru --output " + p("x.ckpt"));
    CHECK(r.code != 0);
  }

  TEST_CASE("help lists subcommands, flags and config keys") {
    auto r = run("--help");
    CHECK(r.code == 0);
    for (const char* s : {"preprocess", "train-words", "train-poincare", "train-sentence", "train-classifier",
                          "evaluate", "nn", "export-table", "words.dim", "paths.word_vectors"})
      CHECK(r.out.find(s) != std::string::npos);
    auto sub = run("evaluate --help");
    CHECK(sub.out.find("--grid") != std::string::npos);
    CHECK(sub.out.find("--verbose") != std::string::npos);
  }
}
