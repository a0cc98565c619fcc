#pragma once

// Span-level normalized precision/recall/F1. With
// C(s, t, h) = |chars(s) ∩ chars(t)| / h over predicted spans S and gold
// spans T (pairs from different articles contribute 0):
//
//   P = 1/|S| * sum_{s,t} C(s, t, |s|)
//   R = 1/|T| * sum_{s,t} C(s, t, |t|)
//   F1 = 2PR / (P + R), or 0 when P + R = 0
//
// Empty S scores P = 0 unless T is empty too, in which case P = R = F1 = 1.
// Predicted spans are merged to a disjoint set first; gold spans are used
// as given.

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/spanops.hpp"

namespace propspan {

struct ArticleScore {
  std::string article_id;
  double precision_sum = 0.0;
  double recall_sum = 0.0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;

  double precision() const { return n_pred ? precision_sum / static_cast<double>(n_pred) : 0.0; }
  double recall() const { return n_gold ? recall_sum / static_cast<double>(n_gold) : 0.0; }
};

struct ScoreReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
  std::size_t gold_overlaps = 0;  // overlapping gold pairs, kept as-is
  std::vector<ArticleScore> per_article;
};

inline double harmonic_f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

inline ScoreReport span_f1(std::span<const Span> predicted, std::span<const Span> gold) {
  std::map<std::string, std::pair<std::vector<Span>, std::vector<Span>>> by_article;
  for (const auto& s : merge_spans({predicted.begin(), predicted.end()})) {
    by_article[s.article_id].first.push_back(s);
  }
  for (const auto& t : gold) by_article[t.article_id].second.push_back(t);

  ScoreReport report;
  double p_sum = 0.0;
  double r_sum = 0.0;
  for (auto& [id, pair] : by_article) {
    auto& [pred, gld] = pair;
    for (std::size_t k = 1; k < pred.size(); ++k) {
      if (pred[k].start < pred[k - 1].end) {
        throw InternalError("overlapping predicted spans after normalization in '" + id + "'");
      }
    }
    std::sort(gld.begin(), gld.end());
    std::size_t reach = 0;
    for (std::size_t k = 0; k < gld.size(); ++k) {
      if (k > 0 && gld[k].start < reach) ++report.gold_overlaps;
      reach = std::max(reach, gld[k].end);
    }
    ArticleScore a;
    a.article_id = id;
    a.n_pred = pred.size();
    a.n_gold = gld.size();
    for (const auto& s : pred) {
      for (const auto& t : gld) {
        const auto lo = std::max(s.start, t.start);
        const auto hi = std::min(s.end, t.end);
        if (hi <= lo) continue;
        const auto inter = static_cast<double>(hi - lo);
        a.precision_sum += inter / static_cast<double>(s.size());
        a.recall_sum += inter / static_cast<double>(t.size());
      }
    }
    p_sum += a.precision_sum;
    r_sum += a.recall_sum;
    report.n_pred += a.n_pred;
    report.n_gold += a.n_gold;
    report.per_article.push_back(std::move(a));
  }
  if (report.n_pred == 0 && report.n_gold == 0) {
    report.precision = report.recall = report.f1 = 1.0;
    return report;
  }
  report.precision = report.n_pred ? p_sum / static_cast<double>(report.n_pred) : 0.0;
  report.recall = report.n_gold ? r_sum / static_cast<double>(report.n_gold) : 0.0;
  report.f1 = harmonic_f1(report.precision, report.recall);
  return report;
}

/// Binary precision/recall/F1 on the Prop class. Two sequences without any
/// Prop label score 1.
inline ScoreReport token_f1(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) {
    throw DataError("token_f1: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(gold.size()) + " gold labels");
  }
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == Label::kProp;
    const bool g = gold[i] == Label::kProp;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  ScoreReport r;
  r.n_pred = tp + fp;
  r.n_gold = tp + fn;
  if (r.n_pred == 0 && r.n_gold == 0) {
    r.precision = r.recall = r.f1 = 1.0;
    return r;
  }
  r.precision = r.n_pred ? static_cast<double>(tp) / static_cast<double>(r.n_pred) : 0.0;
  r.recall = r.n_gold ? static_cast<double>(tp) / static_cast<double>(r.n_gold) : 0.0;
  r.f1 = harmonic_f1(r.precision, r.recall);
  return r;
}

inline ScoreReport token_f1(std::span<const TokenLabelSeq> predicted,
                            std::span<const TokenLabelSeq> gold) {
  if (predicted.size() != gold.size()) throw DataError("token_f1: sentence count mismatch");
  std::vector<Label> p;
  std::vector<Label> g;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (predicted[s].labels.size() != gold[s].labels.size()) {
      throw DataError("token_f1: length mismatch in sentence " + std::to_string(s));
    }
    p.insert(p.end(), predicted[s].labels.begin(), predicted[s].labels.end());
    g.insert(g.end(), gold[s].labels.begin(), gold[s].labels.end());
  }
  return token_f1(p, g);
}

inline std::string format_report(const ScoreReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "span-level normalized scores\n";
  os << "  predicted spans: " << r.n_pred << "\n";
  os << "  gold spans:      " << r.n_gold << "\n";
  os << "  precision: " << r.precision << "\n";
  os << "  recall:    " << r.recall << "\n";
  os << "  F1:        " << r.f1 << "\n";
  if (r.gold_overlaps > 0) {
    os << "  note: " << r.gold_overlaps << " overlapping gold span pair(s) scored as given\n";
  }
  return os.str();
}

/// `scope,article_id,n_pred,n_gold,precision,recall,f1`, totals first.
inline std::string format_csv(const ScoreReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "scope,article_id,n_pred,n_gold,precision,recall,f1\n";
  os << "total,," << r.n_pred << "," << r.n_gold << "," << r.precision << "," << r.recall << ","
     << r.f1 << "\n";
  for (const auto& a : r.per_article) {
    const double p = a.precision();
    const double rc = a.recall();
    os << "article," << a.article_id << "," << a.n_pred << "," << a.n_gold << "," << p << ","
       << rc << "," << harmonic_f1(p, rc) << "\n";
  }
  return os.str();
}

}  // namespace propspan
