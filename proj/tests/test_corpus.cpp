#include <gtest/gtest.h>

#include <set>

#include "propspan/corpus.hpp"
#include "propspan/spanops.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace propspan;
using testing_support::TempDir;

namespace {

std::vector<std::tuple<std::string, std::size_t, std::size_t>> triples(const std::vector<Token>& ts) {
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
  for (const auto& t : ts) out.emplace_back(t.surface, t.start, t.end);
  return out;
}

std::string expect_data_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected DataError";
  return {};
}

}  // namespace

TEST(Tokenize, SimpleSentence) {
  const auto a = make_article("a", "He won.");
  using T = std::tuple<std::string, std::size_t, std::size_t>;
  EXPECT_EQ(triples(tokenize(a)), (std::vector<T>{{"He", 0, 2}, {"won", 3, 6}, {".", 6, 7}}));
}

TEST(Tokenize, DoubleSpaceOffsets) {
  const auto a = make_article("a", "a  b");
  using T = std::tuple<std::string, std::size_t, std::size_t>;
  EXPECT_EQ(triples(tokenize(a)), (std::vector<T>{{"a", 0, 1}, {"b", 3, 4}}));
}

TEST(Tokenize, ApostropheSplits) {
  const auto a = make_article("a", "don't");
  using T = std::tuple<std::string, std::size_t, std::size_t>;
  EXPECT_EQ(triples(tokenize(a)), (std::vector<T>{{"don", 0, 3}, {"'", 3, 4}, {"t", 4, 5}}));
}

TEST(Tokenize, OffsetsAreCodePoints) {
  const auto a = make_article("a", "Ça va, naïve café.");
  const auto toks = tokenize(a);
  ASSERT_EQ(toks.size(), 6u);
  EXPECT_EQ(toks[0].surface, "Ça");
  EXPECT_EQ(toks[0].end, 2u);
  EXPECT_EQ(toks[3].surface, "naïve");
  EXPECT_EQ(toks[3].start, 7u);
  EXPECT_EQ(toks[3].end, 12u);
}

TEST(Tokenize, FuzzOffsetExact) {
  const std::u32string alphabet = U"ab Z9.,!?'\"\n\t-éßЖ漢😀  “”";
  propspan::nn::Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::u32string text;
    const auto len = 1 + rng.below(60);
    for (std::size_t i = 0; i < len; ++i) text += alphabet[rng.below(alphabet.size())];
    const auto a = make_article("f", utf8::encode(text));
    ASSERT_EQ(a.text, text);
    const auto toks = tokenize(a);
    std::size_t cursor = 0;
    for (const auto& t : toks) {
      ASSERT_EQ(t.surface, a.slice(t.start, t.end));
      ASSERT_GE(t.start, cursor);
      for (auto c = cursor; c < t.start; ++c) ASSERT_TRUE(utf8::is_space(text[c]));
      const auto& s = a.sentences.at(t.sentence);
      ASSERT_GE(t.start, s.start);
      ASSERT_LE(t.end, s.end);
      cursor = t.end;
    }
    for (auto c = cursor; c < text.size(); ++c) ASSERT_TRUE(utf8::is_space(text[c]));
  }
}

TEST(Sentences, SplitOnTerminatorsAndNewlines) {
  const auto a = make_article("a", "One two. Three!  \"Four?\" five\nsix 3.5 seven");
  ASSERT_EQ(a.sentences.size(), 5u);
  EXPECT_EQ(a.slice(a.sentences[0].start, a.sentences[0].end), "One two.");
  EXPECT_EQ(a.slice(a.sentences[1].start, a.sentences[1].end), "Three!");
  EXPECT_EQ(a.slice(a.sentences[2].start, a.sentences[2].end), "\"Four?\"");
  EXPECT_EQ(a.slice(a.sentences[3].start, a.sentences[3].end), "five");
  EXPECT_EQ(a.slice(a.sentences[4].start, a.sentences[4].end), "six 3.5 seven");
}

TEST(Sentences, BoundsAreSortedAndDisjoint) {
  propspan::nn::Rng rng(5);
  const std::u32string alphabet = U"ab .!?\n\"";
  for (int trial = 0; trial < 200; ++trial) {
    std::u32string text;
    for (std::size_t i = 0; i < 1 + rng.below(50); ++i) text += alphabet[rng.below(alphabet.size())];
    const auto s = split_sentences(text);
    for (std::size_t k = 0; k < s.size(); ++k) {
      ASSERT_LT(s[k].start, s[k].end);
      ASSERT_LE(s[k].end, text.size());
      if (k) {
        ASSERT_LE(s[k - 1].end, s[k].start);
      }
    }
  }
}

TEST(Sentences, SidecarValidation) {
  auto a = make_article("a", "abc def");
  set_sentence_bounds(a, {{4, 7}, {0, 3}});
  EXPECT_EQ(a.sentences.front(), (CharRange{0, 3}));
  EXPECT_THROW(set_sentence_bounds(a, {{0, 4}, {3, 7}}), DataError);
  EXPECT_THROW(set_sentence_bounds(a, {{0, 9}}), DataError);
}

TEST(SpanTsv, ParsesRow) {
  const auto spans = parse_span_tsv("a1\t0\t3\n", "t");
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0], (Span{"a1", 0, 3}));
}

TEST(SpanTsv, EmptySpanRejected) {
  const auto msg = expect_data_error([] { parse_span_tsv("a1\t3\t3\n", "t"); });
  EXPECT_NE(msg.find("empty span"), std::string::npos);
}

TEST(SpanTsv, WrongFieldCount) {
  const auto msg = expect_data_error([] { parse_span_tsv("a1\t3\n", "t"); });
  EXPECT_NE(msg.find("expected 3 tab-separated fields"), std::string::npos);
  EXPECT_THROW(parse_span_tsv("a1\tx\t4\n", "t"), DataError);
}

TEST(SpanTsv, FormatIsSortedAndRoundTrips) {
  std::vector<Span> spans{{"b", 1, 2}, {"a", 5, 9}, {"a", 0, 3}};
  const auto text = format_span_tsv(spans);
  EXPECT_EQ(text, "a\t0\t3\na\t5\t9\nb\t1\t2\n");
  auto back = parse_span_tsv(text, "t");
  sort_spans(spans);
  EXPECT_EQ(back, spans);
}

TEST(LoadCorpus, ValidSpan) {
  TempDir dir;
  dir.write("articles/articlea1.txt", "abc def");
  dir.write("labels.tsv", "a1\t0\t3\n");
  const auto c = load_corpus(dir / "articles", dir / "labels.tsv");
  ASSERT_EQ(c.articles().size(), 1u);
  EXPECT_EQ(c.articles()[0].id, "a1");
  EXPECT_EQ(c.spans(), (std::vector<Span>{{"a1", 0, 3}}));
}

TEST(LoadCorpus, OutOfBounds) {
  TempDir dir;
  dir.write("articles/articlea1.txt", "abc def");
  dir.write("labels.tsv", "a1\t5\t99\n");
  const auto msg = expect_data_error([&] { load_corpus(dir / "articles", dir / "labels.tsv"); });
  EXPECT_NE(msg.find("span out of bounds"), std::string::npos);
  EXPECT_NE(msg.find("99"), std::string::npos);
}

TEST(LoadCorpus, MissingArticle) {
  TempDir dir;
  dir.write("articles/articlea1.txt", "abc def");
  dir.write("labels.tsv", "zz\t0\t1\n");
  const auto msg = expect_data_error([&] { load_corpus(dir / "articles", dir / "labels.tsv"); });
  EXPECT_NE(msg.find("span references missing article"), std::string::npos);
  EXPECT_NE(msg.find("zz"), std::string::npos);
}

TEST(LoadCorpus, SentenceSidecarOverrides) {
  TempDir dir;
  dir.write("articles/article7.txt", "one two three");
  dir.write("sent.tsv", "7\t0\t7\n7\t8\t13\n");
  const auto c = load_corpus(dir / "articles", std::nullopt, dir / "sent.tsv");
  EXPECT_EQ(c.articles()[0].sentences, (std::vector<CharRange>{{0, 7}, {8, 13}}));
}

TEST(LoadCorpus, MissingDirectoryIsIoError) {
  EXPECT_THROW(load_corpus("/nonexistent/propspan", std::nullopt), IoError);
}

TEST(LoadCorpus, InvalidUtf8IsDataError) {
  TempDir dir;
  dir.write("articles/articlex.txt", std::string("ab\xff", 3));
  EXPECT_THROW(load_corpus(dir / "articles", std::nullopt), DataError);
}

TEST(Project, FullContainment) {
  const auto a = make_article("a", "He won");
  const auto toks = tokenize(a);
  const std::vector<Span> spans{{"a", 0, 6}};
  const auto l = project_spans(a, toks, spans);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l[0].labels, (std::vector<Label>{Label::kProp, Label::kProp}));
  EXPECT_EQ(l[0].sentence_label, Label::kProp);
}

TEST(Project, PartialOverlapCounts) {
  const auto a = make_article("a", "He");
  const std::vector<Span> spans{{"a", 1, 2}};
  const auto l = project_spans(a, tokenize(a), spans);
  EXPECT_EQ(l[0].labels, (std::vector<Label>{Label::kProp}));
}

TEST(Project, NoSpans) {
  const auto a = make_article("a", "He won. It rained.");
  const auto l = project_spans(a, tokenize(a), {});
  ASSERT_EQ(l.size(), 2u);
  for (const auto& s : l) {
    EXPECT_EQ(s.sentence_label, Label::kNonProp);
    for (auto x : s.labels) EXPECT_EQ(x, Label::kNonProp);
  }
}

TEST(Project, MatchesBruteForceCharacterCheck) {
  propspan::nn::Rng rng(3);
  const auto a = make_article("a", "The quick, brown fox! It jumped over \"lazy\" dogs today.");
  const auto toks = tokenize(a);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Span> spans;
    for (std::size_t k = 0; k < rng.below(4); ++k) {
      const auto s = rng.below(a.length() - 1);
      spans.push_back({"a", s, s + 1 + rng.below(std::min<std::size_t>(8, a.length() - s))});
    }
    const auto l = project_spans(a, toks, spans);
    std::size_t k = 0;
    for (const auto& seq : l) {
      bool any = false;
      for (auto lab : seq.labels) {
        bool covered = false;
        for (const auto& sp : spans) {
          for (auto c = toks[k].start; c < toks[k].end; ++c) covered |= c >= sp.start && c < sp.end;
        }
        ASSERT_EQ(lab == Label::kProp, covered);
        any |= covered;
        ++k;
      }
      ASSERT_EQ(seq.sentence_label == Label::kProp, any);
    }
  }
}

TEST(Project, Monotone) {
  propspan::nn::Rng rng(8);
  const auto a = make_article("a", "Alpha beta gamma. Delta, epsilon zeta eta! Theta iota.");
  const auto toks = tokenize(a);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Span> spans;
    for (std::size_t k = 0; k < 1 + rng.below(3); ++k) {
      const auto s = rng.below(a.length() - 1);
      spans.push_back({"a", s, s + 1 + rng.below(a.length() - s)});
    }
    auto more = spans;
    const auto s = rng.below(a.length() - 1);
    more.push_back({"a", s, s + 1 + rng.below(a.length() - s)});
    const auto before = project_spans(a, toks, spans);
    const auto after = project_spans(a, toks, more);
    for (std::size_t i = 0; i < before.size(); ++i) {
      for (std::size_t j = 0; j < before[i].labels.size(); ++j) {
        if (before[i].labels[j] == Label::kProp) {
          ASSERT_EQ(after[i].labels[j], Label::kProp);
        }
      }
    }
  }
}

TEST(Decode, RunIncludesGapCharacters) {
  const auto a = make_article("a", "He won.");
  const auto toks = tokenize(a);
  std::vector<TokenLabelSeq> l(1);
  l[0].labels = {Label::kProp, Label::kProp, Label::kNonProp};
  EXPECT_EQ(decode_spans(a, toks, l), (std::vector<Span>{{"a", 0, 6}}));
}

TEST(Decode, AllNonProp) {
  const auto a = make_article("a", "He won.");
  std::vector<TokenLabelSeq> l(1);
  l[0].labels.assign(3, Label::kNonProp);
  EXPECT_TRUE(decode_spans(a, tokenize(a), l).empty());
}

TEST(Decode, RunsDoNotCrossSentences) {
  const auto a = make_article("a", "Bad men. Bad dogs.");
  const auto toks = tokenize(a);
  std::vector<TokenLabelSeq> l(2);
  l[0].labels = {Label::kNonProp, Label::kProp, Label::kProp};
  l[1].labels = {Label::kProp, Label::kProp, Label::kNonProp};
  EXPECT_EQ(decode_spans(a, toks, l), (std::vector<Span>{{"a", 4, 8}, {"a", 9, 17}}));
}

// Round trip over random token-aligned spans inside sentences.
TEST(RoundTrip, TokenAlignedSpans) {
  propspan::nn::Rng rng(21);
  const std::vector<std::string> words{"alpha", "beta", "gamma", "delta", ",", "\"", "eps"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const auto n_sent = 1 + rng.below(4);
    for (std::size_t s = 0; s < n_sent; ++s) {
      const auto n_words = 1 + rng.below(8);
      for (std::size_t w = 0; w < n_words; ++w) text += words[rng.below(words.size())] + " ";
      text += s % 2 ? "!\n" : ". ";
    }
    const auto a = make_article("r", text);
    const auto toks = tokenize(a);
    std::vector<Span> spans;
    const auto ranges = sentence_token_ranges(toks, a.sentences.size());
    for (const auto& r : ranges) {
      std::size_t k = r.begin;
      while (k < r.end) {
        if (rng.bernoulli(0.4)) {
          const auto len = 1 + rng.below(r.end - k);
          spans.push_back({"r", toks[k].start, toks[k + len - 1].end});
          k += len + 1;  // at least one unlabeled token between spans
        } else {
          ++k;
        }
      }
    }
    const auto decoded = decode_spans(a, toks, project_spans(a, toks, spans));
    ASSERT_EQ(decoded, merge_spans(spans)) << text;
  }
}

TEST(CrossSentence, SplitAndCounted) {
  const auto a = make_article("a", "Bad men. Bad dogs.");
  const std::vector<Span> spans{{"a", 4, 12}};
  EXPECT_EQ(count_cross_sentence_spans(a, spans), 1u);
  const auto toks = tokenize(a);
  EXPECT_EQ(decode_spans(a, toks, project_spans(a, toks, spans)),
            (std::vector<Span>{{"a", 4, 8}, {"a", 9, 12}}));
}

TEST(Corpus, DuplicateIdsRejected) {
  EXPECT_THROW(Corpus({make_article("x", "a"), make_article("x", "b")}, {}), DataError);
}

TEST(Corpus, SubsetKeepsOnlyItsSpans) {
  Corpus c({make_article("x", "abc"), make_article("y", "def")}, {{"x", 0, 1}, {"y", 1, 2}});
  const std::vector<std::string> ids{"y"};
  const auto s = c.subset(ids);
  ASSERT_EQ(s.articles().size(), 1u);
  EXPECT_EQ(s.spans(), (std::vector<Span>{{"y", 1, 2}}));
}
