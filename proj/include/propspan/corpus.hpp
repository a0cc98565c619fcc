#pragma once

// Articles, character-offset spans, offset-exact tokenization, and the
// projection between spans and per-token binary labels.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "propspan/error.hpp"
#include "propspan/io.hpp"
#include "propspan/utf8.hpp"

namespace propspan {

/// Half-open interval of code point offsets.
struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  auto operator<=>(const CharRange&) const = default;
};

struct Span {
  std::string article_id;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  auto operator<=>(const Span&) const = default;
};

struct Article {
  std::string id;
  std::u32string text;
  std::vector<CharRange> sentences;

  std::size_t length() const { return text.size(); }
  std::string slice(std::size_t start, std::size_t end) const {
    return utf8::encode(std::u32string_view(text).substr(start, end - start));
  }
};

struct Token {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t sentence = 0;

  bool operator==(const Token&) const = default;
};

enum class Label : std::uint8_t { kNonProp = 0, kProp = 1 };

struct TokenLabelSeq {
  std::vector<Label> labels;
  Label sentence_label = Label::kNonProp;

  bool operator==(const TokenLabelSeq&) const = default;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

inline void sort_spans(std::vector<Span>& spans) { std::sort(spans.begin(), spans.end()); }

// Sentence segmentation: a sentence ends at a newline, or after a run of
// `.!?` (plus closing quotes/brackets) that is followed by whitespace or the
// end of text. Bounds exclude surrounding whitespace.
inline std::vector<CharRange> split_sentences(std::u32string_view text) {
  const auto is_terminal = [](char32_t c) { return c == U'.' || c == U'!' || c == U'?'; };
  const auto is_closer = [](char32_t c) {
    return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == 0x201D || c == 0x2019 ||
           c == 0xBB;
  };
  std::vector<CharRange> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    while (i < n && utf8::is_space(text[i])) ++i;
    if (i >= n) break;
    const std::size_t start = i;
    std::size_t end = n;
    while (i < n) {
      if (text[i] == U'\n') {
        end = i;
        break;
      }
      if (is_terminal(text[i])) {
        std::size_t j = i + 1;
        while (j < n && is_terminal(text[j])) ++j;
        while (j < n && is_closer(text[j])) ++j;
        if (j == n || utf8::is_space(text[j])) {
          end = j;
          i = j;
          break;
        }
        i = j;
        continue;
      }
      ++i;
    }
    if (i >= n) end = std::min(end, n);
    while (end > start && utf8::is_space(text[end - 1])) --end;
    if (end > start) out.push_back({start, end});
  }
  return out;
}

inline Article make_article(std::string id, std::string_view utf8_text) {
  Article a;
  a.id = std::move(id);
  a.text = utf8::decode(utf8_text);
  a.sentences = split_sentences(a.text);
  return a;
}

/// Replaces automatic sentence bounds; validates ordering and bounds.
inline void set_sentence_bounds(Article& article, std::vector<CharRange> bounds) {
  std::sort(bounds.begin(), bounds.end());
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const auto& b = bounds[k];
    if (b.start >= b.end || b.end > article.length()) {
      throw DataError("sentence bound [" + std::to_string(b.start) + "," +
                      std::to_string(b.end) + ") invalid for article '" + article.id +
                      "' of length " + std::to_string(article.length()));
    }
    if (k > 0 && bounds[k - 1].end > b.start) {
      throw DataError("overlapping sentence bounds in article '" + article.id + "'");
    }
  }
  article.sentences = std::move(bounds);
}

/// Whitespace-delimited tokens with each punctuation character split off.
inline std::vector<Token> tokenize(const Article& article) {
  std::vector<Token> tokens;
  const auto& t = article.text;
  for (std::size_t s = 0; s < article.sentences.size(); ++s) {
    const auto [begin, end] = article.sentences[s];
    std::size_t i = begin;
    while (i < end) {
      if (utf8::is_space(t[i])) {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      if (!utf8::is_punct(t[i])) {
        while (j < end && utf8::is_word_char(t[j])) ++j;
      }
      tokens.push_back({article.slice(i, j), i, j, s});
      i = j;
    }
  }
  return tokens;
}

/// Token index range of every sentence; tokens must come from tokenize().
inline std::vector<IndexRange> sentence_token_ranges(std::span<const Token> tokens,
                                                     std::size_t n_sentences) {
  std::vector<IndexRange> ranges(n_sentences);
  std::size_t i = 0;
  for (std::size_t s = 0; s < n_sentences; ++s) {
    ranges[s].begin = i;
    while (i < tokens.size() && tokens[i].sentence == s) ++i;
    ranges[s].end = i;
  }
  if (i != tokens.size()) throw InternalError("tokens are not grouped by sentence");
  return ranges;
}

inline std::vector<TokenLabelSeq> project_spans(const Article& article,
                                                std::span<const Token> tokens,
                                                std::span<const Span> spans) {
  // prefix[k] = covered characters in [0, k)
  std::vector<std::uint8_t> covered(article.length(), 0);
  for (const auto& sp : spans) {
    if (sp.article_id != article.id) continue;
    const auto end = std::min(sp.end, article.length());
    for (std::size_t c = sp.start; c < end; ++c) covered[c] = 1;
  }
  std::vector<std::size_t> prefix(article.length() + 1, 0);
  for (std::size_t c = 0; c < article.length(); ++c) prefix[c + 1] = prefix[c] + covered[c];

  const auto ranges = sentence_token_ranges(tokens, article.sentences.size());
  std::vector<TokenLabelSeq> out(ranges.size());
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    auto& seq = out[s];
    for (std::size_t k = ranges[s].begin; k < ranges[s].end; ++k) {
      const auto& tok = tokens[k];
      const bool prop = prefix[tok.end] - prefix[tok.start] > 0;
      seq.labels.push_back(prop ? Label::kProp : Label::kNonProp);
      if (prop) seq.sentence_label = Label::kProp;
    }
  }
  return out;
}

inline std::vector<Span> decode_spans(const Article& article, std::span<const Token> tokens,
                                      std::span<const TokenLabelSeq> labels) {
  const auto ranges = sentence_token_ranges(tokens, article.sentences.size());
  if (labels.size() != ranges.size()) {
    throw DataError("label sequences (" + std::to_string(labels.size()) +
                    ") do not match sentence count (" + std::to_string(ranges.size()) + ")");
  }
  std::vector<Span> out;
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    const auto& seq = labels[s].labels;
    if (seq.size() != ranges[s].size()) {
      throw DataError("sentence " + std::to_string(s) + " has " +
                      std::to_string(ranges[s].size()) + " tokens but " +
                      std::to_string(seq.size()) + " labels");
    }
    std::optional<std::size_t> run_start;
    for (std::size_t k = 0; k <= seq.size(); ++k) {
      const bool prop = k < seq.size() && seq[k] == Label::kProp;
      if (prop && !run_start) run_start = k;
      if (!prop && run_start) {
        out.push_back({article.id, tokens[ranges[s].begin + *run_start].start,
                       tokens[ranges[s].begin + k - 1].end});
        run_start.reset();
      }
    }
  }
  return out;
}

/// Number of spans that cross at least one sentence boundary. Projection
/// splits such spans at the boundary.
inline std::size_t count_cross_sentence_spans(const Article& article,
                                              std::span<const Span> spans) {
  std::size_t n = 0;
  for (const auto& sp : spans) {
    if (sp.article_id != article.id) continue;
    for (const auto& s : article.sentences) {
      const bool overlaps = sp.start < s.end && s.start < sp.end;
      if (overlaps && (sp.start < s.start || sp.end > s.end)) {
        ++n;
        break;
      }
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// File formats

inline std::vector<Span> parse_span_tsv(std::string_view contents, const std::string& source) {
  std::vector<Span> spans;
  const auto rows = io::lines(contents);
  for (std::size_t ln = 0; ln < rows.size(); ++ln) {
    const auto line = rows[ln];
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(ln + 1);
    const auto fields = io::split(line, '\t');
    if (fields.size() != 3) {
      throw DataError(where + ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    Span sp;
    sp.article_id = std::string(fields[0]);
    if (!io::parse_int(fields[1], sp.start) || !io::parse_int(fields[2], sp.end)) {
      throw DataError(where + ": offsets must be non-negative integers");
    }
    if (sp.start >= sp.end) {
      throw DataError(where + ": empty span " + sp.article_id + " [" + std::to_string(sp.start) +
                      "," + std::to_string(sp.end) + ")");
    }
    spans.push_back(std::move(sp));
  }
  return spans;
}

inline std::vector<Span> read_span_tsv(const std::filesystem::path& path) {
  return parse_span_tsv(io::read_file(path), path.string());
}

inline std::string format_span_tsv(std::vector<Span> spans) {
  sort_spans(spans);
  std::string out;
  for (const auto& sp : spans) {
    out += sp.article_id;
    out += '\t';
    out += std::to_string(sp.start);
    out += '\t';
    out += std::to_string(sp.end);
    out += '\n';
  }
  return out;
}

/// Sidecar rows `<article_id>\t<start>\t<end>`, one per sentence.
inline std::map<std::string, std::vector<CharRange>> read_sentence_sidecar(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<CharRange>> out;
  for (const auto& sp : read_span_tsv(path)) out[sp.article_id].push_back({sp.start, sp.end});
  return out;
}

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Article> articles, std::vector<Span> spans)
      : articles_(std::move(articles)), spans_(std::move(spans)) {
    reindex();
  }

  const std::vector<Article>& articles() const { return articles_; }
  const std::vector<Span>& spans() const { return spans_; }

  const Article* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &articles_[it->second];
  }

  std::vector<Span> spans_for(std::string_view id) const {
    std::vector<Span> out;
    for (const auto& sp : spans_) {
      if (sp.article_id == id) out.push_back(sp);
    }
    return out;
  }

  /// Hard errors for spans naming unknown articles or exceeding text length.
  void validate() const {
    for (const auto& sp : spans_) {
      const auto* a = find(sp.article_id);
      if (a == nullptr) {
        throw DataError("span references missing article '" + sp.article_id + "'");
      }
      if (sp.start >= sp.end) {
        throw DataError("empty span " + sp.article_id + " [" + std::to_string(sp.start) + "," +
                        std::to_string(sp.end) + ")");
      }
      if (sp.end > a->length()) {
        throw DataError("span out of bounds: " + sp.article_id + " [" +
                        std::to_string(sp.start) + "," + std::to_string(sp.end) +
                        ") exceeds text length " + std::to_string(a->length()));
      }
    }
  }

  /// Keeps only the listed article ids (and their spans).
  Corpus subset(std::span<const std::string> ids) const {
    std::vector<Article> arts;
    std::vector<Span> sps;
    for (const auto& id : ids) {
      const auto* a = find(id);
      if (a == nullptr) throw DataError("unknown article '" + id + "'");
      arts.push_back(*a);
      auto s = spans_for(id);
      sps.insert(sps.end(), s.begin(), s.end());
    }
    return Corpus(std::move(arts), std::move(sps));
  }

 private:
  void reindex() {
    std::sort(articles_.begin(), articles_.end(),
              [](const Article& a, const Article& b) { return a.id < b.id; });
    sort_spans(spans_);
    index_.clear();
    for (std::size_t i = 0; i < articles_.size(); ++i) {
      if (!index_.emplace(articles_[i].id, i).second) {
        throw DataError("duplicate article id '" + articles_[i].id + "'");
      }
    }
  }

  std::vector<Article> articles_;
  std::vector<Span> spans_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads every `article<ID>.txt` in a directory.
inline std::vector<Article> read_article_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<Article> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    constexpr std::string_view kPrefix = "article";
    constexpr std::string_view kSuffix = ".txt";
    if (name.size() <= kPrefix.size() + kSuffix.size() || !name.starts_with(kPrefix) ||
        !name.ends_with(kSuffix)) {
      continue;
    }
    auto id = name.substr(kPrefix.size(), name.size() - kPrefix.size() - kSuffix.size());
    try {
      out.push_back(make_article(id, io::read_file(entry.path())));
    } catch (const DataError& e) {
      throw DataError(entry.path().string() + ": " + e.what());
    }
  }
  std::sort(out.begin(), out.end(), [](const Article& a, const Article& b) { return a.id < b.id; });
  return out;
}

inline Corpus load_corpus(const std::filesystem::path& articles_dir,
                          const std::optional<std::filesystem::path>& labels_file,
                          const std::optional<std::filesystem::path>& sentence_sidecar = {}) {
  auto articles = read_article_dir(articles_dir);
  if (sentence_sidecar) {
    auto bounds = read_sentence_sidecar(*sentence_sidecar);
    for (auto& a : articles) {
      auto it = bounds.find(a.id);
      if (it != bounds.end()) set_sentence_bounds(a, std::move(it->second));
    }
  }
  std::vector<Span> spans;
  if (labels_file) spans = read_span_tsv(*labels_file);
  Corpus corpus(std::move(articles), std::move(spans));
  corpus.validate();
  return corpus;
}

}  // namespace propspan
