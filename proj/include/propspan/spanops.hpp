#pragma once

// Span algebra, prediction post-processing and character-level majority
// voting.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/lexfeatures.hpp"
#include "propspan/utf8.hpp"

namespace propspan {

struct CharMask {
  std::string article_id;
  std::vector<std::uint8_t> bits;

  std::size_t length() const { return bits.size(); }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  bool operator==(const CharMask&) const = default;
};

/// Sorted, disjoint, maximal spans: overlapping or touching spans of the
/// same article are unioned.
inline std::vector<Span> merge_spans(std::vector<Span> spans) {
  sort_spans(spans);
  std::vector<Span> out;
  for (auto& sp : spans) {
    if (!out.empty() && out.back().article_id == sp.article_id && sp.start <= out.back().end) {
      out.back().end = std::max(out.back().end, sp.end);
    } else {
      out.push_back(std::move(sp));
    }
  }
  return out;
}

/// Spans of other articles are ignored.
inline CharMask to_mask(std::span<const Span> spans, const std::string& article_id,
                        std::size_t length) {
  CharMask mask{article_id, std::vector<std::uint8_t>(length, 0)};
  for (const auto& sp : spans) {
    if (sp.article_id != article_id) continue;
    if (sp.end > length || sp.start > sp.end) {
      throw DataError("span out of bounds: " + sp.article_id + " [" + std::to_string(sp.start) +
                      "," + std::to_string(sp.end) + ") exceeds text length " +
                      std::to_string(length));
    }
    std::fill(mask.bits.begin() + static_cast<std::ptrdiff_t>(sp.start),
              mask.bits.begin() + static_cast<std::ptrdiff_t>(sp.end), std::uint8_t{1});
  }
  return mask;
}

inline CharMask to_mask(std::span<const Span> spans, const Article& article) {
  return to_mask(spans, article.id, article.length());
}

inline std::vector<Span> from_mask(const CharMask& mask) {
  std::vector<Span> out;
  std::size_t i = 0;
  const auto n = mask.bits.size();
  while (i < n) {
    if (!mask.bits[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && mask.bits[j]) ++j;
    out.push_back({mask.article_id, i, j});
    i = j;
  }
  return out;
}

/// Merges consecutive spans when at most `max_gap_words` tokens lie strictly
/// between them. With `within_sentence`, spans in different sentences are
/// never joined.
inline std::vector<Span> merge_gaps(std::vector<Span> spans, std::span<const Token> tokens,
                                    std::size_t max_gap_words, bool within_sentence = true) {
  spans = merge_spans(std::move(spans));
  std::vector<Span> out;
  for (auto& sp : spans) {
    if (out.empty() || out.back().article_id != sp.article_id) {
      out.push_back(std::move(sp));
      continue;
    }
    auto& prev = out.back();
    // First token starting at or after prev.end, then the tokens that end
    // before the next span starts.
    const auto first = std::lower_bound(tokens.begin(), tokens.end(), prev.end,
                                        [](const Token& t, std::size_t pos) { return t.start < pos; });
    auto last = first;
    while (last != tokens.end() && last->end <= sp.start) ++last;
    const auto between = static_cast<std::size_t>(last - first);
    bool same_sentence = true;
    if (within_sentence && first != tokens.begin() && last != tokens.end()) {
      same_sentence = std::prev(first)->sentence == last->sentence;
    }
    if (between <= max_gap_words && same_sentence) {
      prev.end = std::max(prev.end, sp.end);
    } else {
      out.push_back(std::move(sp));
    }
  }
  return out;
}

inline const std::u32string& default_trim_chars() {
  static const std::u32string chars = U"\"'`“”‘’«»„";
  return chars;
}

// Fifty common English function words.
inline const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words = {
      "a",     "an",    "the",  "and",   "or",   "but",  "if",    "of",    "at",    "by",
      "for",   "with",  "about", "to",   "from", "in",   "on",    "is",    "are",   "was",
      "were",  "be",    "been", "being", "have", "has",  "had",   "do",    "does",  "did",
      "this",  "that",  "these", "those", "it",  "its",  "as",    "so",    "than",  "too",
      "very",  "can",   "will", "just",  "not",  "he",   "she",   "they",  "we",    "i"};
  return words;
}

struct PostProcessConfig {
  std::size_t max_gap_words = 2;
  bool within_sentence = true;
  bool trim_stopwords = true;
  std::u32string trim_chars = default_trim_chars();
  std::set<std::string> stopwords{default_stopwords().begin(), default_stopwords().end()};
  std::set<std::string> loaded_language;
  std::vector<std::string> order{"merge_gaps", "trim", "loaded_language", "merge"};
  std::size_t max_passes = 8;
};

inline void to_json(nlohmann::json& j, const PostProcessConfig& c) {
  j = {{"max_gap_words", c.max_gap_words},
       {"within_sentence", c.within_sentence},
       {"trim_stopwords", c.trim_stopwords},
       {"trim_chars", utf8::encode(c.trim_chars)},
       {"stopword_count", c.stopwords.size()},
       {"loaded_language_count", c.loaded_language.size()},
       {"order", c.order},
       {"max_passes", c.max_passes}};
}

/// Strips whitespace, configured stray characters and (optionally) whole
/// stopwords from both ends until nothing changes; empty spans are dropped.
inline std::vector<Span> trim_boundaries(std::span<const Span> spans, const Article& article,
                                         const PostProcessConfig& config) {
  const auto& t = article.text;
  const auto n = t.size();
  const auto strippable = [&](char32_t c) {
    return utf8::is_space(c) || config.trim_chars.find(c) != std::u32string::npos;
  };
  const auto is_stopword = [&](std::size_t a, std::size_t b) {
    const auto w = utf8::encode(utf8::lower(std::u32string_view(t).substr(a, b - a)));
    return config.stopwords.count(w) > 0;
  };
  std::vector<Span> out;
  for (auto sp : spans) {
    if (sp.article_id != article.id) {
      out.push_back(sp);
      continue;
    }
    auto& s = sp.start;
    auto& e = sp.end;
    bool changed = true;
    while (changed && s < e) {
      changed = false;
      while (s < e && strippable(t[s])) s++, changed = true;
      while (s < e && strippable(t[e - 1])) e--, changed = true;
      if (!config.trim_stopwords || s >= e) continue;
      // leading whole word
      if (s == 0 || !utf8::is_word_char(t[s - 1])) {
        std::size_t k = s;
        while (k < e && utf8::is_word_char(t[k])) ++k;
        const bool whole = k > s && (k == n || !utf8::is_word_char(t[k]));
        if (whole && is_stopword(s, k)) {
          s = k;
          changed = true;
          continue;
        }
      }
      // trailing whole word
      if (e == n || !utf8::is_word_char(t[e])) {
        std::size_t k = e;
        while (k > s && utf8::is_word_char(t[k - 1])) --k;
        const bool whole = k < e && (k == 0 || !utf8::is_word_char(t[k - 1]));
        if (whole && is_stopword(k, e)) {
          e = k;
          changed = true;
        }
      }
    }
    if (s < e) out.push_back(sp);
  }
  return out;
}

/// Adds a single-token span for every lexicon word not already covered,
/// then re-merges.
inline std::vector<Span> add_loaded_language(std::vector<Span> spans, const Article& article,
                                             std::span<const Token> tokens,
                                             const std::set<std::string>& lexicon) {
  if (lexicon.empty()) return spans;
  const auto mask = to_mask(spans, article);
  for (const auto& tok : tokens) {
    if (!lexicon.count(utf8::lower(tok.surface))) continue;
    bool covered = true;
    for (std::size_t c = tok.start; c < tok.end; ++c) covered = covered && mask.bits[c];
    if (!covered) spans.push_back({article.id, tok.start, tok.end});
  }
  return merge_spans(std::move(spans));
}

/// A character is kept when more than half of the models mark it, or at
/// least `quorum` models when given.
inline CharMask majority_vote(std::span<const CharMask> masks,
                              std::optional<std::size_t> quorum = {}) {
  if (masks.empty()) throw DataError("majority_vote needs at least one model");
  const auto& first = masks.front();
  for (const auto& m : masks) {
    if (m.length() != first.length() || m.article_id != first.article_id) {
      throw DataError("majority_vote: masks disagree on article or length ('" + m.article_id +
                      "' length " + std::to_string(m.length()) + " vs '" + first.article_id +
                      "' length " + std::to_string(first.length()) + ")");
    }
  }
  const std::size_t need = quorum ? *quorum : masks.size() / 2 + 1;
  CharMask out{first.article_id, std::vector<std::uint8_t>(first.length(), 0)};
  for (std::size_t c = 0; c < out.length(); ++c) {
    std::size_t votes = 0;
    for (const auto& m : masks) votes += m.bits[c];
    out.bits[c] = votes >= need ? 1 : 0;
  }
  return out;
}

/// Runs the configured steps for one article, repeating the whole pipeline
/// until it reaches a fixed point (bounded by max_passes).
inline std::vector<Span> postprocess(std::vector<Span> spans, const Article& article,
                                     std::span<const Token> tokens,
                                     const PostProcessConfig& config) {
  std::erase_if(spans, [&](const Span& s) { return s.article_id != article.id; });
  spans = merge_spans(std::move(spans));
  for (std::size_t pass = 0; pass < config.max_passes; ++pass) {
    auto current = spans;
    for (const auto& step : config.order) {
      if (step == "merge_gaps") {
        current = merge_gaps(std::move(current), tokens, config.max_gap_words,
                             config.within_sentence);
      } else if (step == "trim") {
        current = trim_boundaries(current, article, config);
      } else if (step == "loaded_language") {
        current = add_loaded_language(std::move(current), article, tokens,
                                      config.loaded_language);
      } else if (step == "merge") {
        current = merge_spans(std::move(current));
      } else {
        throw UsageError("unknown post-processing step '" + step + "'");
      }
    }
    current = merge_spans(std::move(current));
    if (current == spans) break;
    spans = std::move(current);
  }
  return spans;
}

inline std::vector<Span> postprocess_corpus(std::span<const Span> predicted,
                                            std::span<const Article> articles,
                                            const PostProcessConfig& config) {
  std::map<std::string, std::vector<Span>> by_article;
  for (const auto& sp : predicted) by_article[sp.article_id].push_back(sp);
  std::vector<Span> out;
  for (const auto& article : articles) {
    auto it = by_article.find(article.id);
    if (it == by_article.end()) continue;
    const auto tokens = tokenize(article);
    auto spans = postprocess(std::move(it->second), article, tokens, config);
    out.insert(out.end(), spans.begin(), spans.end());
    by_article.erase(it);
  }
  if (!by_article.empty()) {
    throw DataError("prediction references missing article '" + by_article.begin()->first + "'");
  }
  sort_spans(out);
  return out;
}

/// Words whose training occurrences fall inside spans at least `min_ratio`
/// of the time, with at least `min_count` in-span occurrences.
inline std::set<std::string> derive_loaded_language(const SalienceTable& table,
                                                    std::size_t min_count, double min_ratio) {
  std::set<std::string> out;
  for (const auto& [word, c] : table.counts()) {
    const auto total = c.inside + c.outside;
    if (c.inside >= min_count && total > 0 &&
        static_cast<double>(c.inside) / static_cast<double>(total) >= min_ratio) {
      bool has_word_char = false;
      for (char32_t ch : utf8::decode(word)) has_word_char = has_word_char || utf8::is_word_char(ch);
      if (has_word_char) out.insert(word);
    }
  }
  return out;
}

/// Majority vote over several prediction sets, article by article.
inline std::vector<Span> ensemble_vote(std::span<const std::vector<Span>> members,
                                       std::span<const Article> articles,
                                       std::optional<std::size_t> quorum = {}) {
  std::vector<Span> out;
  for (const auto& article : articles) {
    std::vector<CharMask> masks;
    masks.reserve(members.size());
    for (const auto& m : members) masks.push_back(to_mask(m, article));
    const auto voted = from_mask(majority_vote(masks, quorum));
    out.insert(out.end(), voted.begin(), voted.end());
  }
  return out;
}

}  // namespace propspan
