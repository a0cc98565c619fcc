#include <gtest/gtest.h>

#include "propspan/scorer.hpp"
#include "support/oracles.hpp"

using namespace propspan;
using propspan::nn::Rng;

namespace {

Span sp(std::size_t s, std::size_t e, std::string id = "a") { return {std::move(id), s, e}; }

std::vector<Label> random_labels(Rng& rng, std::size_t n, double p) {
  std::vector<Label> out(n);
  for (auto& l : out) l = rng.bernoulli(p) ? Label::kProp : Label::kNonProp;
  return out;
}

}  // namespace

TEST(SpanF1, ExactMatch) {
  const std::vector<Span> s{sp(3, 9)};
  const auto r = span_f1(s, s);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(SpanF1, HalfOverlap) {
  const std::vector<Span> p{sp(0, 10)}, g{sp(5, 15)};
  const auto r = span_f1(p, g);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.5);
}

TEST(SpanF1, EmptyConventions) {
  const std::vector<Span> g{sp(0, 4)};
  const auto none = span_f1({}, g);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_EQ(span_f1({}, {}).f1, 1.0);
  const auto no_gold = span_f1(g, {});
  EXPECT_EQ(no_gold.f1, 0.0);
}

TEST(SpanF1, DifferentArticlesContributeNothing) {
  const std::vector<Span> p{sp(0, 5, "x")}, g{sp(0, 5, "y")};
  EXPECT_EQ(span_f1(p, g).f1, 0.0);
}

TEST(SpanF1, OneLongPredictionOverTwoGold) {
  // P = (4/10 + 4/10) / 1, R = (4/4 + 4/4) / 2
  const std::vector<Span> p{sp(0, 10)}, g{sp(0, 4), sp(6, 10)};
  const auto r = span_f1(p, g);
  EXPECT_DOUBLE_EQ(r.precision, 0.8);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.f1, 2 * 0.8 / 1.8);
}

TEST(SpanF1, MatchesBruteForce) {
  Rng rng(1234);
  for (int t = 0; t < 2000; ++t) {
    const auto mc = oracle::random_metric_case(rng);
    const auto got = span_f1(mc.pred, mc.gold);
    const auto want = oracle::brute_span_f1(mc.pred, mc.gold);
    ASSERT_NEAR(got.precision, want.precision, 1e-12) << "trial " << t;
    ASSERT_NEAR(got.recall, want.recall, 1e-12) << "trial " << t;
    ASSERT_NEAR(got.f1, want.f1, 1e-12) << "trial " << t;
  }
}

TEST(SpanF1, BoundedForDisjointGold) {
  Rng rng(77);
  for (int t = 0; t < 1000; ++t) {
    const auto mc = oracle::random_metric_case(rng, 2, 40, 3, true);
    const auto r = span_f1(mc.pred, mc.gold);
    for (double v : {r.precision, r.recall, r.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
  }
}

TEST(SpanF1, PrecisionRecallDuality) {
  Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    const auto mc = oracle::random_metric_case(rng);
    const auto s = merge_spans(mc.pred);
    const auto g = merge_spans(mc.gold);
    EXPECT_NEAR(span_f1(s, g).precision, span_f1(g, s).recall, 1e-12);
    EXPECT_NEAR(span_f1(s, g).recall, span_f1(g, s).precision, 1e-12);
  }
}

TEST(SpanF1, InvariantUnderMaskRoundTrip) {
  Rng rng(9);
  for (int t = 0; t < 500; ++t) {
    const auto mc = oracle::random_metric_case(rng, 1, 40, 4);
    const auto normalized = from_mask(to_mask(mc.pred, "a0", 40));
    EXPECT_EQ(span_f1(normalized, mc.gold).f1, span_f1(mc.pred, mc.gold).f1);
  }
}

TEST(SpanF1, OverlappingGoldIsCountedAndNoted) {
  const std::vector<Span> g{sp(0, 6), sp(3, 9)};
  const auto r = span_f1(g, g);
  EXPECT_EQ(r.gold_overlaps, 1u);
  EXPECT_NE(format_report(r).find("overlapping gold"), std::string::npos);
}

TEST(SpanF1, PerArticleAndCsv) {
  const std::vector<Span> p{sp(0, 4, "x"), sp(0, 2, "y")}, g{sp(0, 4, "x"), sp(2, 4, "y")};
  const auto r = span_f1(p, g);
  ASSERT_EQ(r.per_article.size(), 2u);
  EXPECT_EQ(r.per_article[0].precision(), 1.0);
  EXPECT_EQ(r.per_article[1].precision(), 0.0);
  const auto csv = format_csv(r);
  EXPECT_EQ(csv.rfind("scope,article_id,n_pred,n_gold,precision,recall,f1\ntotal,,2,2,", 0), 0u);
  EXPECT_NE(csv.find("article,y,1,1,0,0,0"), std::string::npos);
}

TEST(TokenF1, Identical) {
  const std::vector<Label> l{Label::kProp, Label::kNonProp, Label::kProp};
  const auto r = token_f1(l, l);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(TokenF1, AllNonPropHasZeroRecall) {
  const std::vector<Label> p(3, Label::kNonProp);
  const std::vector<Label> g{Label::kProp, Label::kNonProp, Label::kNonProp};
  EXPECT_EQ(token_f1(p, g).recall, 0.0);
}

TEST(TokenF1, MatchesConfusionOracle) {
  Rng rng(66);
  for (int t = 0; t < 500; ++t) {
    const auto n = 1 + rng.below(30);
    const auto p = random_labels(rng, n, 0.4);
    const auto g = random_labels(rng, n, 0.3);
    const auto c = oracle::confusion(p, g);
    const auto r = token_f1(p, g);
    if (c.tp + c.fp + c.fn == 0) {
      EXPECT_EQ(r.f1, 1.0);
      continue;
    }
    const double prec = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
    const double rec = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
    const double f = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    EXPECT_NEAR(r.precision, prec, 1e-12);
    EXPECT_NEAR(r.recall, rec, 1e-12);
    EXPECT_NEAR(r.f1, f, 1e-12);
  }
}

TEST(TokenF1, LengthMismatch) {
  const std::vector<Label> p(2, Label::kProp), g(3, Label::kProp);
  EXPECT_THROW(token_f1(p, g), DataError);
  const std::vector<TokenLabelSeq> a{{p, Label::kProp}}, b{{g, Label::kProp}};
  EXPECT_THROW(token_f1(a, b), DataError);
}
