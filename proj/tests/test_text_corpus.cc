#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.h"
#include "twotier/errors.h"
#include "twotier/rng.h"
#include "twotier/text_corpus.h"

using namespace twotier;
using fixtures::make_post;

namespace {

std::string join(const Sentence& s) {
  std::string out;
  for (const auto& t : s) out += (out.empty() ? "" : " ") + t;
  return out;
}

std::vector<AnnotatedPost> numbered_posts(std::size_t n) {
  std::vector<AnnotatedPost> posts;
  for (std::size_t i = 0; i < n; ++i) posts.push_back(make_post("id" + std::to_string(i), {{"w"}}));
  return posts;
}

std::set<std::string> ids(const std::vector<AnnotatedPost>& posts) {
  std::set<std::string> out;
  for (const auto& p : posts) out.insert(p.id);
  return out;
}

}  // namespace

TEST_SUITE("text-corpus") {
  TEST_CASE("preprocess drops urls and digit tokens") {
    CHECK(preprocess("check http://a.bc now 123", {}) == std::vector<Sentence>{{"check", "now"}});
  }

  TEST_CASE("preprocess of empty text is empty") { CHECK(preprocess("", {}).empty()); }

  TEST_CASE("preprocess splits sentences and removes stop words") {
    CHECK(preprocess("Good day! bad day", {"day"}) == std::vector<Sentence>{{"good"}, {"bad"}});
  }

  TEST_CASE("preprocess removes emails, hashtags and foreign scripts") {
    auto s = preprocess("mail me at a@b.com #tag \xD0\xBF\xD1\x80\xD0\xB8 ok", {});
    CHECK(s == std::vector<Sentence>{{"mail", "me", "at", "ok"}});
  }

  TEST_CASE("preprocess keeps sinhala tokens and splits on newline and danda") {
    // U+0DC3 U+0DD2 U+0D82 (three code points of Sinhala script)
    const std::string si = "\xE0\xB7\x83\xE0\xB7\x92\xE0\xB6\x82";
    auto s = preprocess(si + " Hello\nworld \xE0\xB7\xB4 again", {});
    REQUIRE(s.size() >= 2);
    CHECK(s[0] == Sentence{si, "hello"});
    CHECK(s[1].front() == "world");
  }

  TEST_CASE("preprocess is idempotent on its own output") {
    Rng rng(3);
    const std::vector<std::string> pieces = {"Alpha", "beta.", "x1", "http://u.rl", "#h", "GAMMA!", "delta?",
                                             "e@f.gh", "\xE0\xB6\x85", "word", "\n", "42"};
    for (int trial = 0; trial < 200; ++trial) {
      std::string text;
      for (int i = 0; i < 12; ++i) text += pieces[rng.below(pieces.size())] + " ";
      auto once = preprocess(text, {"word"});
      std::vector<Sentence> again;
      for (const auto& s : once) {
        auto r = preprocess(join(s), {"word"});
        again.insert(again.end(), r.begin(), r.end());
      }
      CHECK(again == once);
    }
  }

  TEST_CASE("annotate examples") {
    ReactionCounts r;
    r.loves = 5;
    r.wow = 2;
    r.sad = 1;
    CHECK(annotate(r) == Sentiment::Positive);

    ReactionCounts likes_only;
    likes_only.likes = 10000;
    CHECK(annotate(likes_only) == Sentiment::Skip);

    ReactionCounts tie;
    tie.loves = 1;
    tie.sad = 1;
    CHECK(annotate(tie) == Sentiment::Skip);

    ReactionCounts neg;
    neg.angry = 3;
    neg.wow = 1;
    CHECK(annotate(neg) == Sentiment::Negative);
  }

  TEST_CASE("annotate ignores likes, haha and thankful") {
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
      ReactionCounts r;
      r.loves = static_cast<std::int64_t>(rng.below(6));
      r.wow = static_cast<std::int64_t>(rng.below(6));
      r.sad = static_cast<std::int64_t>(rng.below(6));
      r.angry = static_cast<std::int64_t>(rng.below(6));
      ReactionCounts other = r;
      other.likes = static_cast<std::int64_t>(rng.below(100000));
      other.haha = static_cast<std::int64_t>(rng.below(1000));
      other.thankful = static_cast<std::int64_t>(rng.below(1000));
      CHECK(annotate(r) == annotate(other));
    }
  }

  TEST_CASE("build_vocab examples") {
    auto v = build_vocab({make_post("p", {{"a", "a", "b"}})}, 2);
    CHECK(v.size() == 5);
    CHECK(v.contains("a"));
    CHECK_FALSE(v.contains("b"));

    auto both = build_vocab({make_post("p", {{"a", "b"}})}, 1);
    CHECK(both.size() == 6);

    auto empty = build_vocab({}, 1);
    CHECK(empty.size() == Vocabulary::kNumSpecials);
    CHECK(empty.token(Vocabulary::kUnk) == Vocabulary::special_name(Vocabulary::kUnk));
  }

  TEST_CASE("build_vocab orders by frequency then token") {
    auto v = build_vocab({make_post("p", {{"c", "b", "a", "b", "c", "d"}})}, 1);
    std::vector<std::string> words(v.tokens().begin() + Vocabulary::kNumSpecials, v.tokens().end());
    CHECK(words == std::vector<std::string>{"b", "c", "a", "d"});
  }

  TEST_CASE("build_vocab respects min_count and is a bijection") {
    Rng rng(5);
    std::vector<AnnotatedPost> posts;
    for (int i = 0; i < 50; ++i) {
      Sentence s;
      for (int t = 0; t < 6; ++t) s.push_back("t" + std::to_string(rng.below(40)));
      posts.push_back(make_post("p" + std::to_string(i), {s}));
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& p : posts)
      for (const auto& t : p.sentences[0]) ++counts[t];
    for (std::size_t min_count : {1, 3, 8}) {
      auto v = build_vocab(posts, min_count);
      for (std::size_t i = Vocabulary::kNumSpecials; i < v.size(); ++i) {
        CHECK(counts[v.token(i)] >= min_count);
        CHECK(v.frequency(i) == counts[v.token(i)]);
        CHECK(v.find(v.token(i)) == i);
      }
      std::size_t expected = 0;
      for (const auto& [t, c] : counts) expected += c >= min_count;
      CHECK(v.size() == expected + Vocabulary::kNumSpecials);
    }
  }

  TEST_CASE("char_ngrams examples") {
    CHECK(char_ngrams("ab", 3, 3) == std::vector<std::string>{"<ab", "ab>", "<ab>"});
    CHECK(char_ngrams("a", 3, 3) == std::vector<std::string>{"<a>"});
    CHECK(char_ngrams("abc", 3, 4) == std::vector<std::string>{"<ab", "abc", "bc>", "<abc", "abc>", "<abc>"});
  }

  TEST_CASE("char_ngrams never splits a multi-byte character") {
    const std::string si = "\xE0\xB6\x85\xE0\xB6\x86";  // two Sinhala letters
    auto grams = char_ngrams(si, 2, 2);
    CHECK(grams == std::vector<std::string>{"<\xE0\xB6\x85", "\xE0\xB6\x85\xE0\xB6\x86", "\xE0\xB6\x86>", "<" + si + ">"});
  }

  TEST_CASE("split_holdout sizes") {
    auto a = split_holdout(numbered_posts(100), 1);
    CHECK(a.train.size() == 80);
    CHECK(a.validation.size() == 10);
    CHECK(a.test.size() == 10);
    auto b = split_holdout(numbered_posts(101), 1);
    CHECK(b.train.size() == 81);
    CHECK(b.validation.size() == 10);
    CHECK(b.test.size() == 10);
    CHECK_THROWS_AS(split_holdout(numbered_posts(9), 1), SizeError);
  }

  TEST_CASE("split_holdout partitions the input deterministically") {
    for (std::size_t n : {10, 37, 250}) {
      auto posts = numbered_posts(n);
      for (std::uint64_t seed : {1, 2, 99}) {
        auto s = split_holdout(posts, seed);
        auto tr = ids(s.train), va = ids(s.validation), te = ids(s.test);
        std::set<std::string> all = tr;
        all.insert(va.begin(), va.end());
        all.insert(te.begin(), te.end());
        CHECK(all == ids(posts));
        CHECK(tr.size() + va.size() + te.size() == n);
        const long tenth = static_cast<long>(n / 10);
        CHECK(std::abs(static_cast<long>(te.size()) - tenth) <= 1);
        CHECK(std::abs(static_cast<long>(va.size()) - tenth) <= 1);
        auto again = split_holdout(posts, seed);
        CHECK(ids(again.train) == tr);
        CHECK(ids(again.test) == te);
      }
    }
  }

  TEST_CASE("raw corpus and annotated corpus files") {
    const auto dir = std::filesystem::temp_directory_path() / "twotier_corpus_test";
    std::filesystem::create_directories(dir);
    {
      std::ofstream out(dir / "raw.jsonl");
      out << R"({"id": "1", "text": "Great day!", "reactions": {"loves": 3, "sad": 1}})" << "\n";
      out << R"({"id": "2", "text": "meh", "reactions": {"likes": 9}})" << "\n";
      out << R"({"id": "3", "text": "123 456", "reactions": {"angry": 2}})" << "\n";
      out << R"({"id": "4", "text": "bad news. very bad", "reactions": {"angry": 2, "wow": 1}})" << "\n";
    }
    auto raw = read_raw_corpus(dir / "raw.jsonl");
    REQUIRE(raw.size() == 4);
    CHECK(raw[1].reactions.likes == 9);
    CHECK(raw[1].reactions.loves == 0);
    AnnotationSummary summary;
    auto posts = annotate_posts(raw, {}, &summary);
    CHECK(summary.kept == 2);
    CHECK(summary.skipped_label == 1);
    CHECK(summary.skipped_empty == 1);
    REQUIRE(posts.size() == 2);
    CHECK(posts[1].label == Sentiment::Negative);
    CHECK(posts[1].sentences.size() == 2);

    write_annotated_corpus(dir / "corpus.jsonl", posts);
    auto back = read_annotated_corpus(dir / "corpus.jsonl");
    REQUIRE(back.size() == posts.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].id == posts[i].id);
      CHECK(back[i].sentences == posts[i].sentences);
      CHECK(back[i].label == posts[i].label);
    }

    {
      std::ofstream out(dir / "bad.jsonl");
      out << "{not json\n";
    }
    CHECK_THROWS_AS(read_raw_corpus(dir / "bad.jsonl"), FormatError);
    std::filesystem::remove_all(dir);
  }
}
