// Synthetic corpora shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "twotier/embedding_io.h"
#include "twotier/hyperbolic.h"
#include "twotier/rng.h"
#include "twotier/text_corpus.h"

namespace twotier::fixtures {

inline AnnotatedPost make_post(std::string id, std::vector<Sentence> sentences,
                               Sentiment label = Sentiment::Positive) {
  AnnotatedPost p;
  p.id = std::move(id);
  p.sentences = std::move(sentences);
  p.label = label;
  return p;
}

// Topic A sentences use only a1..a5, topic B sentences only b1..b5.
inline std::vector<AnnotatedPost> two_cluster_corpus(std::size_t per_topic = 500, std::size_t length = 8,
                                                     std::uint64_t seed = 11) {
  Rng rng(seed);
  std::vector<AnnotatedPost> posts;
  for (std::size_t i = 0; i < 2 * per_topic; ++i) {
    const char prefix = i % 2 == 0 ? 'a' : 'b';
    Sentence s;
    for (std::size_t t = 0; t < length; ++t) s.push_back(std::string(1, prefix) + std::to_string(1 + rng.below(5)));
    posts.push_back(make_post("p" + std::to_string(i), {s}, i % 2 == 0 ? Sentiment::Positive : Sentiment::Negative));
  }
  return posts;
}

inline bool in_topic_a(const std::string& token) { return !token.empty() && token[0] == 'a'; }

// One hub word linked to ten sentences, plus ten isolated word-sentence pairs.
inline RelationGraph star_graph() {
  RelationGraph g;
  g.words.push_back("hub");
  for (int i = 0; i < 10; ++i) {
    g.sentences.push_back("s" + std::to_string(i));
    g.edges.emplace_back(0, i);
  }
  for (int i = 0; i < 10; ++i) {
    g.words.push_back("w" + std::to_string(i));
    g.sentences.push_back("t" + std::to_string(i));
    g.edges.emplace_back(1 + i, 10 + i);
  }
  return g;
}

// Twenty distinct 3-5 token sentences over a 12-word vocabulary.
inline std::vector<AnnotatedPost> toy_sentences() {
  const std::vector<std::string> words = {"sun", "moon", "star", "tree", "rock", "lake",
                                          "bird", "fish", "wind", "fire", "snow", "leaf"};
  Rng rng(2024);
  std::vector<AnnotatedPost> posts;
  std::vector<Sentence> seen;
  while (posts.size() < 20) {
    Sentence s;
    std::size_t len = 3 + rng.below(3);
    for (std::size_t t = 0; t < len; ++t) s.push_back(words[rng.below(words.size())]);
    bool duplicate = false;
    for (const auto& o : seen) duplicate = duplicate || o == s;
    if (duplicate) continue;
    seen.push_back(s);
    posts.push_back(make_post("toy" + std::to_string(posts.size()), {s}));
  }
  return posts;
}

// Random word vectors for the toy vocabulary (plus the special rows), with
// entries of standard deviation 2/sqrt(dim) so rows are well separated.
inline WordVectors toy_word_vectors(std::size_t dim, std::uint64_t seed = 5) {
  std::vector<std::string> tokens = {"<sos>", "<eos>", "<unk>", "<pad>"};
  for (const auto& p : toy_sentences())
    for (const auto& t : p.sentences[0])
      if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(t);
  Rng rng(seed);
  Tensor m({tokens.size(), dim});
  for (auto& x : m.data()) x = 2.0 * rng.normal() / std::sqrt(static_cast<double>(dim));
  return WordVectors(std::move(tokens), std::move(m));
}

// Sentiment corpus where word order matters. Half of the posts carry one
// sentiment word plus topic words of their class. The other half contain one
// positive and one negative word with "not" in front of the one opposing the
// label, so the bag of words is the same for both labels. Some posts get a
// second, neutral sentence.
inline std::vector<AnnotatedPost> negation_corpus(std::size_t n = 2000, std::uint64_t seed = 99) {
  const std::vector<std::string> pos = {"good", "great", "happy", "love"};
  const std::vector<std::string> neg = {"bad", "awful", "sad", "hate"};
  const std::vector<std::string> pos_topic = {"sunny", "gift", "smile", "party"};
  const std::vector<std::string> neg_topic = {"rain", "loss", "pain", "storm"};
  const std::vector<std::string> neutral = {"the", "day", "we", "it", "was", "and", "so", "very", "this", "then"};
  Rng rng(seed);
  auto pick = [&](const std::vector<std::string>& v) { return v[rng.below(v.size())]; };
  auto neutral_run = [&](std::size_t k) {
    Sentence s;
    for (std::size_t i = 0; i < k; ++i) s.push_back(pick(neutral));
    return s;
  };

  std::vector<AnnotatedPost> posts;
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = rng.bernoulli(0.5);
    Sentence key;
    if (rng.bernoulli(0.5)) {
      key = neutral_run(1 + rng.below(2));
      key.push_back(pick(positive ? pos : neg));
      Sentence tail = neutral_run(rng.below(2));
      key.insert(key.end(), tail.begin(), tail.end());
      key.push_back(pick(positive ? pos_topic : neg_topic));
    } else {
      std::string p = pick(pos), q = pick(neg);
      // The word that agrees with the label stays bare; the other is negated.
      Sentence first = {positive ? p : q};
      Sentence second = {"not", positive ? q : p};
      if (rng.bernoulli(0.5)) std::swap(first, second);
      key = neutral_run(1 + rng.below(2));
      key.insert(key.end(), first.begin(), first.end());
      key.push_back(pick(neutral));
      key.insert(key.end(), second.begin(), second.end());
    }
    std::vector<Sentence> sentences = {key};
    if (rng.bernoulli(0.5)) sentences.push_back(neutral_run(3 + rng.below(3)));
    posts.push_back(make_post("n" + std::to_string(i), sentences, positive ? Sentiment::Positive : Sentiment::Negative));
  }
  return posts;
}

}  // namespace twotier::fixtures
