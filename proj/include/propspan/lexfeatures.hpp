#pragma once

// Word, sentence and document feature vectors built from pluggable
// lexicons, a span-salience table and optional POS / parse-path sidecars.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/io.hpp"
#include "propspan/nn/tensor.hpp"
#include "propspan/utf8.hpp"

namespace propspan {

struct Lexicon {
  std::string name;
  std::size_t dimension = 0;
  std::unordered_map<std::string, std::vector<double>> entries;
  std::size_t duplicates = 0;  // rows that overwrote an earlier entry

  const std::vector<double>* find(const std::string& lowered_word) const {
    auto it = entries.find(lowered_word);
    return it == entries.end() ? nullptr : &it->second;
  }
};

/// Rows are `word\tv1\t...\tvk`. Blank lines are skipped; a leading
/// `# dimension=k` comment fixes k for files that may be empty. Words are
/// lowercased; a repeated word keeps the last row.
inline Lexicon parse_lexicon(std::string_view contents, std::string name,
                             std::optional<std::size_t> dimension = {},
                             const std::string& source = "<lexicon>") {
  Lexicon lex;
  lex.name = std::move(name);
  std::optional<std::size_t> dim = dimension;
  const auto rows = io::lines(contents);
  for (std::size_t ln = 0; ln < rows.size(); ++ln) {
    const auto line = rows[ln];
    const auto where = source + ":" + std::to_string(ln + 1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view kKey = "dimension=";
      const auto pos = line.find(kKey);
      if (pos != std::string_view::npos) {
        std::size_t k = 0;
        if (!io::parse_int(line.substr(pos + kKey.size()), k) || k == 0) {
          throw DataError(where + ": bad dimension header");
        }
        if (dim && *dim != k) throw DataError(where + ": dimension header disagrees with caller");
        dim = k;
      }
      continue;
    }
    const auto fields = io::split(line, '\t');
    if (fields.size() < 2 || fields[0].empty()) {
      throw DataError(where + ": expected a word followed by at least one score");
    }
    const auto k = fields.size() - 1;
    if (!dim) dim = k;
    if (k != *dim) {
      throw DataError(where + ": ragged row with " + std::to_string(k) + " values, expected " +
                      std::to_string(*dim));
    }
    std::vector<double> values(k);
    for (std::size_t i = 0; i < k; ++i) {
      if (!io::parse_double(fields[i + 1], values[i]) || !std::isfinite(values[i])) {
        throw DataError(where + ": non-numeric score '" + std::string(fields[i + 1]) + "'");
      }
    }
    auto word = utf8::lower(fields[0]);
    auto [it, inserted] = lex.entries.insert_or_assign(std::move(word), std::move(values));
    if (!inserted) ++lex.duplicates;
  }
  if (!dim || *dim == 0) {
    throw DataError(source + ": empty lexicon needs a dimension (header '# dimension=k')");
  }
  lex.dimension = *dim;
  return lex;
}

inline Lexicon load_lexicon(const std::filesystem::path& path,
                            std::optional<std::size_t> dimension = {}) {
  return parse_lexicon(io::read_file(path), path.stem().string(), dimension, path.string());
}

/// Per-word in-span frequency ratio with add-one smoothing on both counts:
/// score(w) = (in + 1) / (in + out + 2); unseen words score 0.5.
class SalienceTable {
 public:
  struct Counts {
    std::size_t inside = 0;
    std::size_t outside = 0;
  };

  void add(const std::string& lowered_word, bool inside) {
    auto& c = counts_[lowered_word];
    (inside ? c.inside : c.outside) += 1;
  }

  double score(const std::string& lowered_word) const {
    auto it = counts_.find(lowered_word);
    const Counts c = it == counts_.end() ? Counts{} : it->second;
    return (static_cast<double>(c.inside) + 1.0) /
           (static_cast<double>(c.inside + c.outside) + 2.0);
  }

  const std::map<std::string, Counts>& counts() const { return counts_; }
  std::size_t size() const { return counts_.size(); }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [w, c] : counts_) j[w] = {c.inside, c.outside};
    return j;
  }

  static SalienceTable from_json(const nlohmann::json& j) {
    SalienceTable t;
    for (const auto& [w, c] : j.items()) {
      t.counts_[w] = Counts{c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>()};
    }
    return t;
  }

 private:
  std::map<std::string, Counts> counts_;
};

/// Built from the training split only.
inline SalienceTable build_salience(const Corpus& train) {
  SalienceTable table;
  for (const auto& article : train.articles()) {
    const auto tokens = tokenize(article);
    const auto spans = train.spans_for(article.id);
    const auto labels = project_spans(article, tokens, spans);
    std::size_t k = 0;
    for (const auto& seq : labels) {
      for (auto label : seq.labels) {
        table.add(utf8::lower(tokens[k].surface), label == Label::kProp);
        ++k;
      }
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Token annotation sidecars: `<article_id>\t<sent_idx>\t<tok_idx>\t<value>`

class AnnotationTable {
 public:
  static AnnotationTable parse(std::string_view contents, const std::string& source) {
    AnnotationTable t;
    const auto rows = io::lines(contents);
    for (std::size_t ln = 0; ln < rows.size(); ++ln) {
      const auto line = rows[ln];
      if (line.empty()) continue;
      const auto where = source + ":" + std::to_string(ln + 1);
      const auto f = io::split(line, '\t');
      std::size_t sent = 0;
      std::size_t tok = 0;
      if (f.size() != 4 || !io::parse_int(f[1], sent) || !io::parse_int(f[2], tok)) {
        throw DataError(where + ": expected <article_id>\\t<sent_idx>\\t<tok_idx>\\t<value>");
      }
      t.rows_[{std::string(f[0]), sent}][tok] = std::string(f[3]);
    }
    return t;
  }

  static AnnotationTable load(const std::filesystem::path& path) {
    return parse(io::read_file(path), path.string());
  }

  bool empty() const { return rows_.empty(); }

  /// Values for one sentence of n tokens; missing rows give empty strings.
  std::optional<std::vector<std::string>> sentence(const std::string& article_id,
                                                   std::size_t sent_idx,
                                                   std::size_t n_tokens) const {
    auto it = rows_.find({article_id, sent_idx});
    if (it == rows_.end()) return std::nullopt;
    std::vector<std::string> out(n_tokens);
    for (const auto& [tok, value] : it->second) {
      if (tok >= n_tokens) {
        throw DataError("annotation length mismatch: article '" + article_id + "' sentence " +
                        std::to_string(sent_idx) + " has " + std::to_string(n_tokens) +
                        " tokens but an annotation for token " + std::to_string(tok));
      }
      out[tok] = value;
    }
    return out;
  }

 private:
  std::map<std::pair<std::string, std::size_t>, std::map<std::size_t, std::string>> rows_;
};

inline std::vector<std::string> split_parse_path(std::string_view joined) {
  std::vector<std::string> out;
  if (joined.empty()) return out;
  for (auto part : io::split(joined, '/')) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

/// Hashes a word-to-root label path into [0, vocab). Id 0 is reserved for
/// tokens without a parse.
inline std::size_t parse_path_id(std::span<const std::string> labels, std::size_t vocab) {
  if (vocab < 2) throw DataError("parse-path vocabulary must be at least 2");
  if (labels.empty()) return 0;
  std::string joined;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) joined += '/';
    joined += labels[i];
  }
  return 1 + static_cast<std::size_t>(io::fnv1a64(joined) % (vocab - 1));
}

// Penn Treebank tags as emitted by CoreNLP.
inline const std::vector<std::string>& default_pos_tagset() {
  static const std::vector<std::string> tags = {
      "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN",
      "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM",
      "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
      ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$"};
  return tags;
}

struct LookupStats {
  std::size_t lookups = 0;
  std::size_t misses = 0;

  double miss_rate() const {
    return lookups == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(lookups);
  }
  LookupStats& operator+=(const LookupStats& o) {
    lookups += o.lookups;
    misses += o.misses;
    return *this;
  }
};

struct WordFeatures {
  nn::Tensor f_word;                   // [n_tokens x d_w]
  std::vector<std::size_t> parse_ids;  // one per token
};

/// Per token: [lexicon vectors in order (zeros when absent); salience;
/// POS one-hot over `pos_tagset`]. The parse path is returned separately as
/// an embedding id. Sections whose input is absent (no salience table, empty
/// tagset) contribute no columns.
inline WordFeatures word_features(std::span<const Token> tokens,
                                  std::span<const Lexicon* const> lexicons,
                                  const SalienceTable* salience,
                                  const std::vector<std::vector<std::string>>* parse_paths,
                                  const std::vector<std::string>* pos_tags,
                                  std::span<const std::string> pos_tagset,
                                  std::size_t parse_vocab = 4096,
                                  LookupStats* stats = nullptr) {
  const auto n = tokens.size();
  if (parse_paths && parse_paths->size() != n) {
    throw DataError("annotation length mismatch: " + std::to_string(parse_paths->size()) +
                    " parse paths for " + std::to_string(n) + " tokens");
  }
  if (pos_tags && pos_tags->size() != n) {
    throw DataError("annotation length mismatch: " + std::to_string(pos_tags->size()) +
                    " POS tags for " + std::to_string(n) + " tokens");
  }
  std::size_t width = 0;
  for (const auto* lex : lexicons) width += lex->dimension;
  if (salience) width += 1;
  width += pos_tagset.size();

  WordFeatures out;
  out.f_word = nn::Tensor::matrix(n, width);
  out.parse_ids.assign(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto word = utf8::lower(tokens[t].surface);
    auto row = out.f_word.row(t);
    std::size_t col = 0;
    for (const auto* lex : lexicons) {
      const auto* v = lex->find(word);
      if (stats) {
        ++stats->lookups;
        if (!v) ++stats->misses;
      }
      if (v) std::copy(v->begin(), v->end(), row.begin() + static_cast<std::ptrdiff_t>(col));
      col += lex->dimension;
    }
    if (salience) row[col++] = salience->score(word);
    if (pos_tags && !pos_tagset.empty()) {
      const auto& tag = (*pos_tags)[t];
      for (std::size_t k = 0; k < pos_tagset.size(); ++k) {
        if (pos_tagset[k] == tag) {
          row[col + k] = 1.0;
          break;
        }
      }
    }
    if (parse_paths) out.parse_ids[t] = parse_path_id((*parse_paths)[t], parse_vocab);
  }
  return out;
}

inline constexpr std::size_t kSurfaceStats = 3;

/// Mean of f_word rows followed by [token count, capitalized fraction,
/// punctuation fraction]. An empty sentence yields zeros.
inline std::vector<double> sentence_features(std::span<const Token> tokens,
                                             const nn::Tensor& f_word) {
  const auto d = f_word.cols();
  std::vector<double> out(d + kSurfaceStats, 0.0);
  const auto n = tokens.size();
  if (n == 0) return out;
  for (std::size_t t = 0; t < n; ++t) {
    const auto row = f_word.row(t);
    for (std::size_t c = 0; c < d; ++c) out[c] += row[c];
  }
  std::size_t caps = 0;
  std::size_t punct = 0;
  for (const auto& tok : tokens) {
    const auto cps = utf8::decode(tok.surface);
    if (!cps.empty() && utf8::is_upper(cps.front())) ++caps;
    bool all_punct = !cps.empty();
    for (char32_t c : cps) all_punct = all_punct && utf8::is_punct(c);
    if (all_punct) ++punct;
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < d; ++c) out[c] *= inv;
  out[d] = static_cast<double>(n);
  out[d + 1] = static_cast<double>(caps) * inv;
  out[d + 2] = static_cast<double>(punct) * inv;
  return out;
}

inline std::vector<double> document_features(std::span<const std::vector<double>> sentence_vectors) {
  if (sentence_vectors.empty()) throw DataError("document_features: article has no sentences");
  const auto d = sentence_vectors.front().size();
  std::vector<double> out(d, 0.0);
  for (const auto& v : sentence_vectors) {
    if (v.size() != d) throw DataError("document_features: inconsistent sentence dimensions");
    for (std::size_t c = 0; c < d; ++c) out[c] += v[c];
  }
  for (auto& v : out) v /= static_cast<double>(sentence_vectors.size());
  return out;
}

// ---------------------------------------------------------------------------
// Run-level feature configuration

/// Feature families, named after the ablation letters: A (affect
/// lexicons), X (syntax: POS + parse path), N (semantic-class lexicons),
/// S (sentence vector), D (document vector), plus the salience scalar.
struct FeatureToggles {
  bool affect = true;
  bool syntax = true;
  bool semantic = true;
  bool sentence = true;
  bool document = true;
  bool salience = true;

  std::string code() const {
    std::string s;
    if (affect) s += 'A';
    if (syntax) s += 'X';
    if (semantic) s += 'N';
    if (sentence) s += 'S';
    if (document) s += 'D';
    if (salience) s += 'W';
    return s;
  }

  bool operator==(const FeatureToggles&) const = default;
};

inline void to_json(nlohmann::json& j, const FeatureToggles& t) {
  j = {{"affect", t.affect},     {"syntax", t.syntax},     {"semantic", t.semantic},
       {"sentence", t.sentence}, {"document", t.document}, {"salience", t.salience}};
}

inline void from_json(const nlohmann::json& j, FeatureToggles& t) {
  t.affect = j.value("affect", t.affect);
  t.syntax = j.value("syntax", t.syntax);
  t.semantic = j.value("semantic", t.semantic);
  t.sentence = j.value("sentence", t.sentence);
  t.document = j.value("document", t.document);
  t.salience = j.value("salience", t.salience);
}

struct FeatureResources {
  std::vector<Lexicon> affect;    // A
  std::vector<Lexicon> semantic;  // N
  AnnotationTable parse;
  AnnotationTable pos;
  std::vector<std::string> pos_tagset = default_pos_tagset();
  std::size_t parse_vocab = 4096;
};

struct SentenceFeatureBundle {
  nn::Tensor f_word;
  std::vector<std::size_t> parse_ids;
  std::vector<double> f_sent;  // empty when S is off
};

struct ArticleFeatures {
  std::vector<SentenceFeatureBundle> sentences;
  std::vector<double> f_doc;  // empty when D is off
  LookupStats stats;
};

class FeatureExtractor {
 public:
  FeatureExtractor(FeatureToggles toggles, const FeatureResources& resources,
                   SalienceTable salience)
      : toggles_(toggles), resources_(&resources), salience_(std::move(salience)) {
    if (toggles_.affect) {
      for (const auto& lex : resources.affect) lexicons_.push_back(&lex);
    }
    if (toggles_.semantic) {
      for (const auto& lex : resources.semantic) lexicons_.push_back(&lex);
    }
  }

  const FeatureToggles& toggles() const { return toggles_; }
  const SalienceTable& salience() const { return salience_; }

  std::size_t word_dim() const {
    std::size_t d = 0;
    for (const auto* lex : lexicons_) d += lex->dimension;
    if (toggles_.salience) d += 1;
    if (toggles_.syntax) d += resources_->pos_tagset.size();
    return d;
  }
  std::size_t sentence_dim() const { return toggles_.sentence ? word_dim() + kSurfaceStats : 0; }
  std::size_t document_dim() const { return toggles_.document ? word_dim() + kSurfaceStats : 0; }
  std::size_t parse_vocab() const { return resources_->parse_vocab; }

  ArticleFeatures extract(const Article& article, std::span<const Token> tokens) const {
    ArticleFeatures out;
    const auto ranges = sentence_token_ranges(tokens, article.sentences.size());
    std::vector<std::vector<double>> raw_sent;
    raw_sent.reserve(ranges.size());
    const std::span<const std::string> tagset =
        toggles_.syntax ? std::span<const std::string>(resources_->pos_tagset)
                        : std::span<const std::string>();
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      const auto sent_tokens = tokens.subspan(ranges[s].begin, ranges[s].size());
      const auto n = sent_tokens.size();
      std::optional<std::vector<std::vector<std::string>>> paths;
      std::optional<std::vector<std::string>> tags;
      if (toggles_.syntax) {
        if (auto raw = resources_->parse.sentence(article.id, s, n)) {
          paths.emplace();
          for (const auto& p : *raw) paths->push_back(split_parse_path(p));
        }
        tags = resources_->pos.sentence(article.id, s, n);
      }
      SentenceFeatureBundle bundle;
      auto wf = word_features(sent_tokens, lexicons_, toggles_.salience ? &salience_ : nullptr,
                              paths ? &*paths : nullptr, tags ? &*tags : nullptr, tagset,
                              resources_->parse_vocab, &out.stats);
      bundle.f_word = std::move(wf.f_word);
      bundle.parse_ids = std::move(wf.parse_ids);
      raw_sent.push_back(sentence_features(sent_tokens, bundle.f_word));
      if (toggles_.sentence) bundle.f_sent = raw_sent.back();
      out.sentences.push_back(std::move(bundle));
    }
    if (toggles_.document && !raw_sent.empty()) out.f_doc = document_features(raw_sent);
    if (toggles_.document && raw_sent.empty()) out.f_doc.assign(document_dim(), 0.0);
    return out;
  }

 private:
  FeatureToggles toggles_;
  const FeatureResources* resources_;
  SalienceTable salience_;
  std::vector<const Lexicon*> lexicons_;
};

}  // namespace propspan
