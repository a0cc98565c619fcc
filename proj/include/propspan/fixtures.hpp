#pragma once

// Synthetic, separable corpus: sentences of neutral newswire-like words, a
// fraction of which contain phrases of "loaded" marker words. Gold spans
// wrap each marker phrase exactly (never the surrounding quotes or
// punctuation). Lexicons and POS / parse-path sidecars are generated to
// match.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/io.hpp"
#include "propspan/lexfeatures.hpp"
#include "propspan/nn/rng.hpp"
#include "propspan/spanops.hpp"
#include "propspan/utf8.hpp"

namespace propspan::fixtures {

struct FixtureConfig {
  std::size_t articles = 100;
  std::size_t sentences_per_article = 20;
  double prop_sentence_rate = 0.5;
  double quote_rate = 0.25;
  std::uint64_t seed = 1;
  std::uint64_t first_id = 700001;
};

struct WordInfo {
  const char* word;
  const char* pos;
  const char* path;
};

inline const std::vector<WordInfo>& neutral_words() {
  static const std::vector<WordInfo> words = {
      {"the", "DT", "NP/S"},         {"a", "DT", "NP/S"},
      {"of", "IN", "PP/NP/S"},       {"in", "IN", "PP/VP/S"},
      {"on", "IN", "PP/VP/S"},       {"to", "TO", "PP/VP/S"},
      {"and", "CC", "NP/S"},         {"with", "IN", "PP/VP/S"},
      {"for", "IN", "PP/VP/S"},      {"was", "VBD", "VP/S"},
      {"is", "VBZ", "VP/S"},         {"has", "VBZ", "VP/S"},
      {"city", "NN", "NP/PP/VP/S"},  {"council", "NN", "NP/S"},
      {"report", "NN", "NP/VP/S"},   {"minister", "NN", "NP/S"},
      {"plan", "NN", "NP/VP/S"},     {"budget", "NN", "NP/VP/S"},
      {"school", "NN", "NP/PP/VP/S"}, {"road", "NN", "NP/PP/VP/S"},
      {"river", "NN", "NP/PP/VP/S"}, {"market", "NN", "NP/VP/S"},
      {"week", "NN", "NP/PP/VP/S"},  {"year", "NN", "NP/PP/VP/S"},
      {"people", "NNS", "NP/S"},     {"officials", "NNS", "NP/S"},
      {"residents", "NNS", "NP/S"},  {"workers", "NNS", "NP/VP/S"},
      {"said", "VBD", "VP/S"},       {"announced", "VBD", "VP/S"},
      {"met", "VBD", "VP/S"},        {"visited", "VBD", "VP/S"},
      {"discussed", "VBD", "VP/S"},  {"opened", "VBD", "VP/S"},
      {"approved", "VBD", "VP/S"},   {"reviewed", "VBD", "VP/S"},
      {"new", "JJ", "ADJP/NP/S"},    {"local", "JJ", "ADJP/NP/S"},
      {"annual", "JJ", "ADJP/NP/S"}, {"public", "JJ", "ADJP/NP/S"},
      {"small", "JJ", "ADJP/NP/S"},  {"regional", "JJ", "ADJP/NP/S"},
      {"morning", "NN", "NP/PP/VP/S"}, {"committee", "NN", "NP/S"},
      {"meeting", "NN", "NP/VP/S"},  {"project", "NN", "NP/VP/S"},
      {"station", "NN", "NP/PP/VP/S"}, {"data", "NNS", "NP/VP/S"},
  };
  return words;
}

inline const std::vector<WordInfo>& marker_words() {
  static const std::vector<WordInfo> words = {
      {"invader", "NN", "NP/PP/VP/S/LOADED"},     {"traitors", "NNS", "NP/VP/S/LOADED"},
      {"disgraceful", "JJ", "ADJP/NP/S/LOADED"},  {"catastrophic", "JJ", "ADJP/NP/S/LOADED"},
      {"evil", "JJ", "ADJP/NP/S/LOADED"},         {"corrupt", "JJ", "ADJP/NP/S/LOADED"},
      {"vile", "JJ", "ADJP/NP/S/LOADED"},         {"shameful", "JJ", "ADJP/NP/S/LOADED"},
      {"tyrant", "NN", "NP/VP/S/LOADED"},         {"thugs", "NNS", "NP/VP/S/LOADED"},
      {"outrageous", "JJ", "ADJP/NP/S/LOADED"},   {"scum", "NN", "NP/VP/S/LOADED"},
      {"treacherous", "JJ", "ADJP/NP/S/LOADED"},  {"sinister", "JJ", "ADJP/NP/S/LOADED"},
      {"despicable", "JJ", "ADJP/NP/S/LOADED"},   {"hateful", "JJ", "ADJP/NP/S/LOADED"},
      {"lunatic", "NN", "NP/VP/S/LOADED"},        {"crooked", "JJ", "ADJP/NP/S/LOADED"},
      {"monstrous", "JJ", "ADJP/NP/S/LOADED"},    {"parasites", "NNS", "NP/VP/S/LOADED"},
  };
  return words;
}

struct FixtureSet {
  std::vector<Article> articles;
  std::vector<Span> spans;
  std::string affect_lexicon;    // 10-dim TSV
  std::string semclass_lexicon;  // 6-dim one-hot TSV
  std::string parse_sidecar;
  std::string pos_sidecar;
  std::string stopwords;
  std::string loaded_language;
};

namespace detail {

inline std::u32string capitalize(std::u32string w) {
  if (!w.empty() && w[0] >= U'a' && w[0] <= U'z') w[0] = static_cast<char32_t>(w[0] - 32);
  return w;
}

inline std::string format_row(const std::string& word, const std::vector<double>& v) {
  std::ostringstream os;
  os << word;
  os.precision(4);
  for (double x : v) os << '\t' << std::fixed << x;
  os << '\n';
  return os.str();
}

}  // namespace detail

inline FixtureSet generate(const FixtureConfig& config) {
  nn::Rng root(config.seed, 0xF1C7);
  nn::Rng text_rng = root.split(1);
  nn::Rng lex_rng = root.split(2);
  const auto& neutral = neutral_words();
  const auto& markers = marker_words();

  FixtureSet out;
  for (std::size_t a = 0; a < config.articles; ++a) {
    std::u32string text;
    const std::string id = std::to_string(config.first_id + a);
    for (std::size_t s = 0; s < config.sentences_per_article; ++s) {
      if (s > 0) text += (s % 5 == 0) ? U"\n" : U" ";
      const auto n_words = 6 + static_cast<std::size_t>(text_rng.below(9));
      std::vector<std::u32string> words;
      for (std::size_t k = 0; k < n_words; ++k) {
        words.push_back(utf8::decode(neutral[text_rng.below(neutral.size())].word));
      }
      // Marker phrase slots: insert before word index `pos` (pos >= 1) so a
      // sentence never opens with a marker; slots are at least 3 apart.
      std::vector<std::pair<std::size_t, std::size_t>> phrases;  // (insert position, length)
      const bool prop = text_rng.bernoulli(config.prop_sentence_rate);
      if (prop) {
        const std::size_t n_phrases = text_rng.bernoulli(0.3) ? 2 : 1;
        std::size_t pos = 1 + static_cast<std::size_t>(text_rng.below(n_words / 2));
        for (std::size_t p = 0; p < n_phrases && pos < n_words; ++p) {
          phrases.emplace_back(pos, 1 + static_cast<std::size_t>(text_rng.below(3)));
          pos += 3 + static_cast<std::size_t>(text_rng.below(3));
        }
      }
      std::size_t next_phrase = 0;
      for (std::size_t k = 0; k < n_words; ++k) {
        if (next_phrase < phrases.size() && phrases[next_phrase].first == k) {
          const bool quoted = text_rng.bernoulli(config.quote_rate);
          text += U" ";
          if (quoted) text += U"\"";
          const auto start = text.size();
          for (std::size_t m = 0; m < phrases[next_phrase].second; ++m) {
            if (m) text += U" ";
            text += utf8::decode(markers[text_rng.below(markers.size())].word);
          }
          out.spans.push_back({id, start, text.size()});
          if (quoted) text += U"\"";
          ++next_phrase;
        }
        if (k > 0) text += U" ";
        text += k == 0 ? detail::capitalize(words[k]) : words[k];
        if (k + 1 < n_words && k > 0 && text_rng.bernoulli(0.06)) text += U",";
      }
      text += (prop && text_rng.bernoulli(0.3)) ? U"!" : U".";
    }
    text += U"\n";
    out.articles.push_back(make_article(id, utf8::encode(text)));
  }

  // Self-check: projecting and decoding the gold spans reproduces them.
  {
    Corpus corpus(out.articles, out.spans);
    corpus.validate();
    for (const auto& art : corpus.articles()) {
      const auto tokens = tokenize(art);
      const auto gold = corpus.spans_for(art.id);
      const auto decoded = decode_spans(art, tokens, project_spans(art, tokens, gold));
      if (decoded != merge_spans(gold)) {
        throw InternalError("fixture round trip failed for article " + art.id);
      }
    }
  }

  // Lexicons.
  std::map<std::string, std::vector<double>> affect;
  for (const auto& m : markers) {
    std::vector<double> v(10);
    for (std::size_t d = 0; d < 10; ++d) v[d] = d < 5 ? lex_rng.uniform(0.6, 1.0) : lex_rng.uniform(0.0, 0.2);
    affect[m.word] = v;
  }
  for (std::size_t k = 12; k < neutral.size(); k += 2) {
    std::vector<double> v(10);
    for (auto& x : v) x = lex_rng.uniform(0.0, 0.3);
    affect[neutral[k].word] = v;
  }
  out.affect_lexicon = "# dimension=10\n";
  for (const auto& [w, v] : affect) out.affect_lexicon += detail::format_row(w, v);

  const std::map<std::string, std::size_t> classes = {
      {"minister", 0}, {"officials", 0}, {"residents", 0}, {"workers", 0}, {"people", 0},
      {"city", 1},     {"river", 1},     {"road", 1},      {"station", 1}, {"market", 1},
      {"week", 2},     {"year", 2},      {"morning", 2},   {"council", 3}, {"budget", 3},
      {"committee", 3}, {"invader", 4},  {"traitors", 4},  {"tyrant", 4},  {"thugs", 5},
      {"scum", 5},     {"parasites", 5}, {"monstrous", 5}};
  out.semclass_lexicon = "# dimension=6\n";
  for (const auto& [w, c] : classes) {
    std::vector<double> v(6, 0.0);
    v[c] = 1.0;
    out.semclass_lexicon += detail::format_row(w, v);
  }

  // Sidecars, keyed on the tokenizer output.
  std::map<std::string, std::pair<std::string, std::string>> info;
  for (const auto& w : neutral) info[w.word] = {w.pos, w.path};
  for (const auto& w : markers) info[w.word] = {w.pos, w.path};
  for (const auto& art : out.articles) {
    const auto tokens = tokenize(art);
    const auto ranges = sentence_token_ranges(tokens, art.sentences.size());
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      for (std::size_t k = ranges[s].begin; k < ranges[s].end; ++k) {
        const auto& surface = tokens[k].surface;
        std::string pos = "SYM";
        std::string path = "S";
        if (auto it = info.find(utf8::lower(surface)); it != info.end()) {
          pos = it->second.first;
          path = it->second.second;
        } else if (surface == "." || surface == "!") {
          pos = ".";
        } else if (surface == ",") {
          pos = ",";
        } else if (surface == "\"") {
          pos = "``";
          path = "NP/S";
        }
        const auto prefix = art.id + "\t" + std::to_string(s) + "\t" + std::to_string(k - ranges[s].begin) + "\t";
        out.pos_sidecar += prefix + pos + "\n";
        out.parse_sidecar += prefix + path + "\n";
      }
    }
  }

  for (const auto& w : default_stopwords()) out.stopwords += w + "\n";
  for (std::size_t k = 0; k < markers.size(); k += 2) {
    out.loaded_language += std::string(markers[k].word) + "\n";
  }
  return out;
}

inline Corpus to_corpus(const FixtureSet& set) {
  Corpus c(set.articles, set.spans);
  c.validate();
  return c;
}

/// In-memory equivalent of loading the written lexicons and sidecars.
inline FeatureResources to_resources(const FixtureSet& set) {
  FeatureResources r;
  r.affect.push_back(parse_lexicon(set.affect_lexicon, "affect"));
  r.semantic.push_back(parse_lexicon(set.semclass_lexicon, "semclass"));
  r.parse = AnnotationTable::parse(set.parse_sidecar, "parse.tsv");
  r.pos = AnnotationTable::parse(set.pos_sidecar, "pos.tsv");
  return r;
}

/// Example run configuration pointing at a fixture directory layout.
inline nlohmann::json example_config(std::uint64_t seed) {
  return {
      {"data",
       {{"articles", "articles"},
        {"labels", "labels.tsv"},
        {"dev_fraction", 0.2},
        {"parse_sidecar", "parse.tsv"},
        {"pos_sidecar", "pos.tsv"}}},
      {"lexicons", {{"affect", {"lexicons/affect.tsv"}}, {"semantic", {"lexicons/semclass.tsv"}}}},
      {"features",
       {{"affect", true},
        {"syntax", true},
        {"semantic", true},
        {"sentence", true},
        {"document", true},
        {"salience", true}}},
      {"model", {{"embed_dim", 32}, {"hidden_dim", 32}, {"parse_dim", 30}, {"parse_vocab", 4096}}},
      {"train",
       {{"batch_size", 8},
        {"epochs", 20},
        {"lr", 1e-3},
        {"alpha", 0.9},
        {"l2_beta", 1e-4},
        {"patience", 9},
        {"seed", seed},
        {"weighted_loss", true}}}};
}

inline void write(const FixtureSet& set, const std::filesystem::path& dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "articles");
  fs::create_directories(dir / "lexicons");
  for (const auto& a : set.articles) {
    io::write_file_atomic(dir / "articles" / ("article" + a.id + ".txt"), utf8::encode(a.text));
  }
  io::write_file_atomic(dir / "labels.tsv", format_span_tsv(set.spans));
  io::write_file_atomic(dir / "lexicons" / "affect.tsv", set.affect_lexicon);
  io::write_file_atomic(dir / "lexicons" / "semclass.tsv", set.semclass_lexicon);
  io::write_file_atomic(dir / "parse.tsv", set.parse_sidecar);
  io::write_file_atomic(dir / "pos.tsv", set.pos_sidecar);
  io::write_file_atomic(dir / "stopwords.txt", set.stopwords);
  io::write_file_atomic(dir / "loaded_language.txt", set.loaded_language);
  io::write_file_atomic(dir / "config.json", example_config(seed).dump(2) + "\n");
}

}  // namespace propspan::fixtures
