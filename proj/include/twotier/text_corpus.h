#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace twotier {

using Sentence = std::vector<std::string>;

struct ReactionCounts {
  std::int64_t likes = 0;
  std::int64_t loves = 0;
  std::int64_t wow = 0;
  std::int64_t haha = 0;
  std::int64_t sad = 0;
  std::int64_t angry = 0;
  std::int64_t thankful = 0;
};

struct RawPost {
  std::string id;
  std::string text;
  ReactionCounts reactions;
};

enum class Sentiment { Positive, Negative, Skip };

// A preprocessed post with a binary label. The label is never Skip.
struct AnnotatedPost {
  std::string id;
  std::vector<Sentence> sentences;
  Sentiment label = Sentiment::Positive;

  std::size_t token_count() const;
};

// Token table with the four special tokens pinned at indices 0..3.
class Vocabulary {
 public:
  static constexpr std::size_t kSos = 0;
  static constexpr std::size_t kEos = 1;
  static constexpr std::size_t kUnk = 2;
  static constexpr std::size_t kPad = 3;
  static constexpr std::size_t kNumSpecials = 4;
  static const std::string& special_name(std::size_t index);

  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::uint64_t frequency(std::size_t index) const { return counts_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& frequencies() const { return counts_; }

  std::optional<std::size_t> find(std::string_view token) const;
  // Index of `token`, or kUnk when the token was not retained.
  std::size_t index_or_unk(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  // Appends a new token; duplicate tokens are a ContractError.
  std::size_t add(std::string token, std::uint64_t count);
  void set_frequency(std::size_t index, std::uint64_t count) { counts_.at(index) = count; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

struct CorpusSplit {
  std::vector<AnnotatedPost> train;
  std::vector<AnnotatedPost> validation;
  std::vector<AnnotatedPost> test;
  std::uint64_t seed = 0;
};

using StopWords = std::unordered_set<std::string>;

// Cleans `text` and splits it into sentences of lowercased tokens. URLs,
// e-mail addresses, hashtags, tokens carrying digits, tokens with letters from
// scripts other than Sinhala and Latin, and stop words are dropped.
std::vector<Sentence> preprocess(std::string_view text, const StopWords& stopwords);

Sentiment annotate(const ReactionCounts& reactions);

// Vocabulary of tokens occurring at least `min_count` times, ordered by
// descending frequency with lexicographic tie-break. The UNK entry's frequency
// is the total count of tokens that fell below the threshold.
Vocabulary build_vocab(const std::vector<AnnotatedPost>& posts, std::size_t min_count);

// Character n-grams of "<word>" for every length in [n_min, n_max], followed by
// the bracketed word itself. Works on code points, so multi-byte scripts are
// never cut inside a character.
std::vector<std::string> char_ngrams(std::string_view word, std::size_t n_min, std::size_t n_max);

// Deterministic 8:1:1 split; the remainder after rounding goes to train.
CorpusSplit split_holdout(const std::vector<AnnotatedPost>& posts, std::uint64_t seed);

// Annotates and preprocesses raw posts; Skip posts and posts left without any
// token are dropped.
struct AnnotationSummary {
  std::size_t kept = 0;
  std::size_t skipped_label = 0;
  std::size_t skipped_empty = 0;
};
std::vector<AnnotatedPost> annotate_posts(const std::vector<RawPost>& raw, const StopWords& stopwords,
                                          AnnotationSummary* summary = nullptr);

// ---- file formats ----

std::vector<RawPost> read_raw_corpus(const std::filesystem::path& path);
StopWords read_stopwords(const std::filesystem::path& path);

std::vector<AnnotatedPost> read_annotated_corpus(const std::filesystem::path& path);
void write_annotated_corpus(const std::filesystem::path& path, const std::vector<AnnotatedPost>& posts);

std::string_view to_string(Sentiment s);

}  // namespace twotier
