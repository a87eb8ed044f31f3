#include "twotier/text_corpus.h"

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"
#include "twotier/errors.h"
#include "twotier/rng.h"

namespace twotier {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one UTF-8 code point starting at s[pos] and advances pos. Malformed
// bytes decode to kInvalid and consume a single byte.
char32_t next_code_point(std::string_view s, std::size_t& pos) {
  auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  unsigned char lead = byte(pos);
  std::size_t len = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++pos;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    ++pos;
    return kInvalid;
  }
  if (pos + len > s.size()) {
    ++pos;
    return kInvalid;
  }
  for (std::size_t i = 1; i < len; ++i) {
    unsigned char b = byte(pos + i);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  std::size_t pos = 0;
  while (pos < s.size()) out.push_back(next_code_point(s, pos));
  return out;
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v' || c == 0x00A0 || c == 0x200B ||
         c == 0x3000 || (c >= 0x2000 && c <= 0x200A);
}

bool is_sentence_end(char32_t c) { return c == '.' || c == '?' || c == '!' || c == 0x17D4; }

enum class CharClass { Letter, Joiner, Digit, Foreign, Strip };

CharClass classify(char32_t c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return CharClass::Letter;
  if (c >= '0' && c <= '9') return CharClass::Digit;
  if (c < 0x80) return CharClass::Strip;
  if (c >= 0x0D80 && c <= 0x0DFF) {
    if (c >= 0x0DE6 && c <= 0x0DEF) return CharClass::Digit;  // Sinhala Lith digits
    if (c == 0x0DF4) return CharClass::Strip;                  // kunddaliya
    return CharClass::Letter;
  }
  if (c == 0x200C || c == 0x200D) return CharClass::Joiner;
  // Punctuation, symbol and emoji blocks are stripped rather than treated as
  // letters of another language.
  if (c == kInvalid) return CharClass::Strip;
  if (c <= 0x00BF || c == 0x00D7 || c == 0x00F7) return CharClass::Strip;
  if (c >= 0x0300 && c <= 0x036F) return CharClass::Strip;
  if (c >= 0x2000 && c <= 0x2BFF) return CharClass::Strip;
  if (c >= 0x3000 && c <= 0x303F) return CharClass::Strip;
  if (c >= 0xFE00 && c <= 0xFE0F) return CharClass::Strip;
  if (c >= 0xFF00 && c <= 0xFF20) return CharClass::Strip;
  if (c >= 0x1F000 && c <= 0x1FAFF) return CharClass::Strip;
  if (c >= 0xE0000) return CharClass::Strip;
  return CharClass::Foreign;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_url(std::string_view chunk) {
  std::string lower = ascii_lower(chunk);
  return lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("ftp://") ||
         lower.starts_with("www.") || lower.find("://") != std::string::npos;
}

bool is_email(std::string_view chunk) {
  auto at = chunk.find('@');
  if (at == std::string_view::npos || at == 0) return false;
  auto dot = chunk.find('.', at + 1);
  return dot != std::string_view::npos && dot > at + 1 && dot + 1 < chunk.size();
}

// Returns the cleaned token, or nothing when the piece must be dropped.
std::optional<std::string> clean_token(const std::vector<char32_t>& piece) {
  std::string out;
  bool has_letter = false;
  for (char32_t c : piece) {
    switch (classify(c)) {
      case CharClass::Letter:
        has_letter = true;
        append_utf8(out, (c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
        break;
      case CharClass::Joiner:
        if (has_letter) append_utf8(out, c);
        break;
      case CharClass::Digit:
      case CharClass::Foreign:
        return std::nullopt;
      case CharClass::Strip:
        break;
    }
  }
  if (!has_letter) return std::nullopt;
  // Trailing joiners carry no meaning once punctuation is gone.
  while (out.size() >= 3 && (out.ends_with("\u200c") || out.ends_with("\u200d"))) out.resize(out.size() - 3);
  return out;
}

class SentenceBuilder {
 public:
  explicit SentenceBuilder(const StopWords& stopwords) : stopwords_(stopwords) {}

  void token(std::string t) {
    if (!stopwords_.contains(t)) current_.push_back(std::move(t));
  }
  void boundary() {
    if (!current_.empty()) sentences_.push_back(std::move(current_));
    current_.clear();
  }
  std::vector<Sentence> finish() {
    boundary();
    return std::move(sentences_);
  }

 private:
  const StopWords& stopwords_;
  Sentence current_;
  std::vector<Sentence> sentences_;
};

void process_chunk(const std::vector<char32_t>& chunk, SentenceBuilder& builder) {
  if (chunk.empty()) return;
  std::string bytes;
  for (char32_t c : chunk) append_utf8(bytes, c);

  if (chunk.front() == '#' || is_url(bytes) || is_email(bytes)) {
    if (is_sentence_end(chunk.back())) builder.boundary();
    return;
  }
  std::vector<char32_t> piece;
  for (char32_t c : chunk) {
    if (is_sentence_end(c)) {
      if (auto t = clean_token(piece)) builder.token(std::move(*t));
      piece.clear();
      builder.boundary();
    } else {
      piece.push_back(c);
    }
  }
  if (auto t = clean_token(piece)) builder.token(std::move(*t));
}

}  // namespace

std::size_t AnnotatedPost::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

// ---- Vocabulary ----

const std::string& Vocabulary::special_name(std::size_t index) {
  static const std::string names[] = {"<sos>", "<eos>", "<unk>", "<pad>"};
  return names[index];
}

Vocabulary::Vocabulary() {
  for (std::size_t i = 0; i < kNumSpecials; ++i) add(special_name(i), 0);
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index_or_unk(std::string_view token) const { return find(token).value_or(kUnk); }

std::size_t Vocabulary::add(std::string token, std::uint64_t count) {
  if (index_.contains(token)) throw ContractError("duplicate vocabulary token '" + token + "'");
  std::size_t id = tokens_.size();
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
  return id;
}

// ---- operations ----

std::vector<Sentence> preprocess(std::string_view text, const StopWords& stopwords) {
  SentenceBuilder builder(stopwords);
  std::vector<char32_t> chunk;
  for (char32_t c : decode(text)) {
    if (c == '\n') {
      process_chunk(chunk, builder);
      chunk.clear();
      builder.boundary();
    } else if (is_space(c)) {
      process_chunk(chunk, builder);
      chunk.clear();
    } else {
      chunk.push_back(c);
    }
  }
  process_chunk(chunk, builder);
  return builder.finish();
}

Sentiment annotate(const ReactionCounts& r) {
  std::int64_t positive = r.loves + r.wow;
  std::int64_t negative = r.sad + r.angry;
  if (positive > negative) return Sentiment::Positive;
  if (negative > positive) return Sentiment::Negative;
  return Sentiment::Skip;
}

Vocabulary build_vocab(const std::vector<AnnotatedPost>& posts, std::size_t min_count) {
  if (min_count < 1) throw ContractError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::uint64_t, std::less<>> counts;
  for (const auto& post : posts) {
    for (const auto& sentence : post.sentences) {
      for (const auto& token : sentence) ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  std::uint64_t rare = 0;
  for (auto& [token, count] : counts) {
    if (count >= min_count) {
      kept.emplace_back(token, count);
    } else {
      rare += count;
    }
  }
  // `counts` is already lexicographic, so a stable sort by frequency keeps
  // the tie-break.
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  vocab.set_frequency(Vocabulary::kUnk, rare);
  for (auto& [token, count] : kept) {
    // A corpus token spelled like a special marker folds into it.
    if (auto existing = vocab.find(token)) {
      vocab.set_frequency(*existing, vocab.frequency(*existing) + count);
      continue;
    }
    vocab.add(token, count);
  }
  return vocab;
}

std::vector<std::string> char_ngrams(std::string_view word, std::size_t n_min, std::size_t n_max) {
  if (n_min < 1 || n_min > n_max) throw ContractError("char_ngrams: need 1 <= n_min <= n_max");
  std::vector<char32_t> chars{U'<'};
  for (char32_t c : decode(word)) chars.push_back(c);
  chars.push_back(U'>');

  auto encode = [&](std::size_t from, std::size_t len) {
    std::string s;
    for (std::size_t i = from; i < from + len; ++i) append_utf8(s, chars[i]);
    return s;
  };
  std::vector<std::string> out;
  for (std::size_t n = n_min; n <= n_max && n < chars.size(); ++n) {
    for (std::size_t i = 0; i + n <= chars.size(); ++i) out.push_back(encode(i, n));
  }
  out.push_back(encode(0, chars.size()));
  return out;
}

CorpusSplit split_holdout(const std::vector<AnnotatedPost>& posts, std::uint64_t seed) {
  if (posts.size() < 10) {
    throw SizeError("split_holdout: need at least 10 posts, got " + std::to_string(posts.size()));
  }
  std::vector<std::size_t> order(posts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "holdout"));
  shuffle(order, rng);

  std::size_t tenth = posts.size() / 10;
  CorpusSplit split;
  split.seed = seed;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& post = posts[order[k]];
    if (k < tenth) {
      split.test.push_back(post);
    } else if (k < 2 * tenth) {
      split.validation.push_back(post);
    } else {
      split.train.push_back(post);
    }
  }
  return split;
}

std::vector<AnnotatedPost> annotate_posts(const std::vector<RawPost>& raw, const StopWords& stopwords,
                                          AnnotationSummary* summary) {
  AnnotationSummary local;
  std::vector<AnnotatedPost> out;
  for (const auto& post : raw) {
    Sentiment label = annotate(post.reactions);
    if (label == Sentiment::Skip) {
      ++local.skipped_label;
      continue;
    }
    auto sentences = preprocess(post.text, stopwords);
    if (sentences.empty()) {
      ++local.skipped_empty;
      continue;
    }
    out.push_back({post.id, std::move(sentences), label});
    ++local.kept;
  }
  if (summary) *summary = local;
  return out;
}

std::string_view to_string(Sentiment s) {
  switch (s) {
    case Sentiment::Positive:
      return "positive";
    case Sentiment::Negative:
      return "negative";
    case Sentiment::Skip:
      return "skip";
  }
  return "skip";
}

// ---- file formats ----

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::vector<RawPost> read_raw_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<RawPost> posts;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where(path, line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
        !j["text"].is_string()) {
      throw FormatError(where(path, line_no) + ": expected string fields 'id' and 'text'");
    }
    RawPost post;
    post.id = j["id"].get<std::string>();
    post.text = j["text"].get<std::string>();
    if (j.contains("reactions")) {
      const auto& r = j["reactions"];
      if (!r.is_object()) throw FormatError(where(path, line_no) + ": 'reactions' must be an object");
      auto field = [&](const char* key, std::int64_t& dst) {
        if (!r.contains(key)) return;
        if (!r[key].is_number_integer() || r[key].get<std::int64_t>() < 0) {
          throw FormatError(where(path, line_no) + ": reaction '" + key + "' must be a non-negative integer");
        }
        dst = r[key].get<std::int64_t>();
      };
      field("likes", post.reactions.likes);
      field("loves", post.reactions.loves);
      field("wow", post.reactions.wow);
      field("haha", post.reactions.haha);
      field("sad", post.reactions.sad);
      field("angry", post.reactions.angry);
      field("thankful", post.reactions.thankful);
    }
    if (!seen.insert(post.id).second) throw FormatError(where(path, line_no) + ": duplicate id '" + post.id + "'");
    posts.push_back(std::move(post));
  }
  return posts;
}

StopWords read_stopwords(const std::filesystem::path& path) {
  auto in = open_input(path);
  StopWords words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    words.insert(ascii_lower(line.substr(start)));
  }
  return words;
}

std::vector<AnnotatedPost> read_annotated_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<AnnotatedPost> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      AnnotatedPost post;
      post.id = j.at("id").get<std::string>();
      auto label = j.at("label").get<std::string>();
      if (label == "positive") {
        post.label = Sentiment::Positive;
      } else if (label == "negative") {
        post.label = Sentiment::Negative;
      } else {
        throw FormatError("label must be 'positive' or 'negative'");
      }
      post.sentences = j.at("sentences").get<std::vector<Sentence>>();
      std::erase_if(post.sentences, [](const Sentence& s) { return s.empty(); });
      if (post.sentences.empty()) throw FormatError("post has no tokens");
      posts.push_back(std::move(post));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where(path, line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where(path, line_no) + ": " + e.what());
    }
  }
  return posts;
}

void write_annotated_corpus(const std::filesystem::path& path, const std::vector<AnnotatedPost>& posts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& post : posts) {
    nlohmann::json j;
    j["id"] = post.id;
    j["label"] = std::string(to_string(post.label));
    j["sentences"] = post.sentences;
    out << j.dump() << '\n';
  }
}

}  // namespace twotier
