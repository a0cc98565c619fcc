#pragma once

// Independent reference implementations used by the unit and acceptance
// tests: central finite differences, a character-set span metric and a
// confusion-matrix token metric.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "propspan/corpus.hpp"
#include "propspan/mgmodel.hpp"
#include "propspan/neuralcore.hpp"

namespace oracle {

using propspan::nn::Rng;
using propspan::nn::Tensor;

inline double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / scale;
}

/// Central difference of f with respect to every entry of `x`, compared with
/// `analytic`. Returns the worst relative error.
inline double check_tensor(Tensor& x, const Tensor& analytic, const std::function<double()>& f,
                           double eps = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f();
    x[i] = saved - eps;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2 * eps)));
  }
  return worst;
}

inline Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  auto t = Tensor::matrix(r, c);
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

inline Tensor random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  auto t = Tensor::vector(n);
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Each op check draws random shapes and inputs, reduces the op output with a
// random projection and compares every analytic partial with finite
// differences.

inline double check_fc(Rng& rng) {
  const auto n = dim(rng, 1, 4), d = dim(rng, 1, 5), k = dim(rng, 1, 4);
  auto x = random_matrix(n, d, rng), w = random_matrix(d, k, rng);
  auto b = random_vector(k, rng);
  const auto proj = random_matrix(n, k, rng);
  const auto f = [&] { return dot(propspan::nn::fc_forward(x, w, b), proj); };
  Tensor dx;
  auto dw = Tensor::matrix(d, k);
  auto db = Tensor::vector(k);
  propspan::nn::fc_backward(x, w, proj, &dx, dw, db);
  return std::max({check_tensor(x, dx, f), check_tensor(w, dw, f), check_tensor(b, db, f)});
}

inline double check_lstm(Rng& rng, bool bidirectional) {
  namespace nn = propspan::nn;
  const auto n = dim(rng, 1, 4), d = dim(rng, 1, 4), h = dim(rng, 1, 3);
  auto x = random_matrix(n, d, rng);
  auto wx_f = random_matrix(d, 4 * h, rng, 0.8), wh_f = random_matrix(h, 4 * h, rng, 0.8);
  auto b_f = random_vector(4 * h, rng, 0.5);
  auto wx_b = random_matrix(d, 4 * h, rng, 0.8), wh_b = random_matrix(h, 4 * h, rng, 0.8);
  auto b_b = random_vector(4 * h, rng, 0.5);
  const auto proj = random_matrix(n, bidirectional ? 2 * h : h, rng);
  const nn::LstmWeights fw{wx_f, wh_f, b_f};
  const nn::LstmWeights bw{wx_b, wh_b, b_b};
  const bool reverse = !bidirectional && rng.bernoulli(0.5);
  const auto f = [&] {
    if (bidirectional) {
      nn::BiLstmCache c;
      return dot(nn::bilstm_forward(x, fw, bw, c), proj);
    }
    nn::LstmCache c;
    return dot(nn::lstm_forward(x, fw, reverse, c), proj);
  };
  auto g_wx_f = Tensor::matrix(d, 4 * h), g_wh_f = Tensor::matrix(h, 4 * h);
  auto g_b_f = Tensor::vector(4 * h);
  auto g_wx_b = Tensor::matrix(d, 4 * h), g_wh_b = Tensor::matrix(h, 4 * h);
  auto g_b_b = Tensor::vector(4 * h);
  nn::LstmGrads gf{g_wx_f, g_wh_f, g_b_f};
  nn::LstmGrads gb{g_wx_b, g_wh_b, g_b_b};
  Tensor dx;
  if (bidirectional) {
    nn::BiLstmCache c;
    nn::bilstm_forward(x, fw, bw, c);
    dx = nn::bilstm_backward(c, proj, fw, bw, gf, gb);
  } else {
    nn::LstmCache c;
    nn::lstm_forward(x, fw, reverse, c);
    dx = nn::lstm_backward(c, proj, fw, gf);
  }
  double worst = std::max({check_tensor(x, dx, f), check_tensor(wx_f, g_wx_f, f),
                           check_tensor(wh_f, g_wh_f, f), check_tensor(b_f, g_b_f, f)});
  if (bidirectional) {
    worst = std::max({worst, check_tensor(wx_b, g_wx_b, f), check_tensor(wh_b, g_wh_b, f),
                      check_tensor(b_b, g_b_b, f)});
  }
  return worst;
}

inline double check_embedding_pool(Rng& rng) {
  namespace nn = propspan::nn;
  const auto v = dim(rng, 1, 4), d = dim(rng, 1, 4), n = dim(rng, 1, 6);
  auto table = random_matrix(v, d, rng);
  std::vector<std::size_t> ids(n);
  for (auto& id : ids) id = static_cast<std::size_t>(rng.below(v));
  const auto proj_rows = random_matrix(n, d, rng);
  const auto proj_pool = random_vector(d, rng);
  const auto f = [&] {
    const auto e = nn::embedding_lookup(ids, table);
    return dot(e, proj_rows) + dot(nn::mean_pool(e), proj_pool);
  };
  auto grad = Tensor::matrix(v, d);
  auto dy = proj_rows;
  const auto dpool = nn::mean_pool_backward(proj_pool, n);
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += dpool[i];
  nn::embedding_backward(ids, dy, grad);
  return check_tensor(table, grad, f);
}

inline double check_losses(Rng& rng) {
  namespace nn = propspan::nn;
  auto logit = Tensor::vector(std::vector<double>{rng.uniform(-4, 4)});
  const int target = static_cast<int>(rng.below(2));
  const double w = rng.uniform(0.1, 3.0);
  auto g1 = Tensor::vector(std::vector<double>{nn::sigmoid_bce(logit[0], target, w).grad});
  const double e1 = check_tensor(logit, g1, [&] { return nn::sigmoid_bce(logit[0], target, w).loss; });

  const auto k = dim(rng, 2, 5);
  auto logits = random_vector(k, rng, 4.0);
  std::vector<double> weights(k);
  for (auto& x : weights) x = rng.uniform(0.1, 3.0);
  const auto t = static_cast<std::size_t>(rng.below(k));
  const auto ce = nn::softmax_ce(logits.values(), t, weights);
  auto g2 = Tensor::vector(ce.grad);
  const double e2 =
      check_tensor(logits, g2, [&] { return nn::softmax_ce(logits.values(), t, weights).loss; });
  return std::max(e1, e2);
}

/// Small random model and sentence for end-to-end checks.
struct ModelCase {
  propspan::ModelConfig config;
  propspan::SentenceBatch batch;
};

inline ModelCase random_model_case(Rng& rng, std::size_t n_tokens = 0) {
  ModelCase mc;
  auto& c = mc.config;
  c.vocab_size = dim(rng, 2, 6);
  c.embed_dim = dim(rng, 1, 4);
  c.hidden_dim = dim(rng, 1, 3);
  c.parse_dim = dim(rng, 1, 3);
  c.parse_vocab = dim(rng, 2, 5);
  c.use_parse_path = rng.bernoulli(0.7);
  c.word_feature_dim = dim(rng, 0, 3);
  c.sent_feature_dim = dim(rng, 0, 3);
  c.doc_feature_dim = dim(rng, 0, 2);
  const auto n = n_tokens ? n_tokens : dim(rng, 1, 5);
  auto& b = mc.batch;
  for (std::size_t i = 0; i < n; ++i) {
    b.token_ids.push_back(static_cast<std::size_t>(rng.below(c.vocab_size)));
    b.parse_ids.push_back(static_cast<std::size_t>(rng.below(c.parse_vocab)));
    b.gold.labels.push_back(rng.bernoulli(0.5) ? propspan::Label::kProp : propspan::Label::kNonProp);
  }
  if (!c.use_parse_path) b.parse_ids.clear();
  b.gold.sentence_label = propspan::Label::kNonProp;
  for (auto l : b.gold.labels) {
    if (l == propspan::Label::kProp) b.gold.sentence_label = propspan::Label::kProp;
  }
  b.f_word = random_matrix(n, c.word_feature_dim, rng);
  for (std::size_t i = 0; i < c.sent_feature_dim; ++i) b.f_sent.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < c.doc_feature_dim; ++i) b.f_doc.push_back(rng.uniform(-1, 1));
  return mc;
}

/// Every parameter of a random model against finite differences of the
/// joint loss.
inline double check_model(Rng& rng, std::size_t n_tokens = 0) {
  auto mc = random_model_case(rng, n_tokens);
  propspan::MgModel model(mc.config, rng.split(99));
  // Spread the initial weights so the gate and heads are far from trivial.
  for (auto& [name, p] : model.params()) {
    (void)name;
    for (auto& v : p.value.values()) v = rng.uniform(-0.8, 0.8);
  }
  propspan::JointLossConfig lc;
  lc.alpha = rng.uniform(0.0, 1.0);
  lc.sent_weights = {rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)};
  lc.tok_weights = {rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)};
  model.params().zero_grad();
  model.backward(mc.batch, model.forward(mc.batch), lc);
  const auto f = [&] {
    return propspan::joint_loss(model.forward(mc.batch), mc.batch.gold, lc).total;
  };
  double worst = 0.0;
  for (auto& [name, p] : model.params()) {
    (void)name;
    const Tensor analytic = p.grad;
    worst = std::max(worst, check_tensor(p.value, analytic, f));
  }
  return worst;
}

enum class GradOp { kFc, kLstm, kBiLstm, kEmbeddingPool, kLosses, kModel };

inline const char* grad_op_name(GradOp op) {
  switch (op) {
    case GradOp::kFc: return "fc";
    case GradOp::kLstm: return "lstm";
    case GradOp::kBiLstm: return "bilstm";
    case GradOp::kEmbeddingPool: return "embedding+mean_pool";
    case GradOp::kLosses: return "losses";
    case GradOp::kModel: return "mgmodel";
  }
  return "?";
}

inline double check_op(GradOp op, Rng& rng) {
  switch (op) {
    case GradOp::kFc: return check_fc(rng);
    case GradOp::kLstm: return check_lstm(rng, false);
    case GradOp::kBiLstm: return check_lstm(rng, true);
    case GradOp::kEmbeddingPool: return check_embedding_pool(rng);
    case GradOp::kLosses: return check_losses(rng);
    case GradOp::kModel: return check_model(rng);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Span metric straight from the definition, over explicit character sets.

struct BruteScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline BruteScore brute_span_f1(const std::vector<propspan::Span>& pred,
                                const std::vector<propspan::Span>& gold) {
  using Key = std::pair<std::string, std::size_t>;
  // Predicted spans: union of characters, cut into maximal runs.
  std::set<Key> marked;
  for (const auto& s : pred) {
    for (auto c = s.start; c < s.end; ++c) marked.insert({s.article_id, c});
  }
  std::vector<std::set<Key>> S;
  for (const auto& k : marked) {
    const bool extends = !S.empty() && S.back().rbegin()->first == k.first &&
                         S.back().rbegin()->second + 1 == k.second;
    if (!extends) S.emplace_back();
    S.back().insert(k);
  }
  std::vector<std::set<Key>> T;
  for (const auto& t : gold) {
    std::set<Key> chars;
    for (auto c = t.start; c < t.end; ++c) chars.insert({t.article_id, c});
    T.push_back(chars);
  }
  if (S.empty() && T.empty()) return {1.0, 1.0, 1.0};
  double p = 0.0, r = 0.0;
  for (const auto& s : S) {
    for (const auto& t : T) {
      std::size_t inter = 0;
      for (const auto& k : s) inter += t.count(k);
      p += static_cast<double>(inter) / static_cast<double>(s.size());
      r += static_cast<double>(inter) / static_cast<double>(t.size());
    }
  }
  BruteScore out;
  out.precision = S.empty() ? 0.0 : p / static_cast<double>(S.size());
  out.recall = T.empty() ? 0.0 : r / static_cast<double>(T.size());
  out.f1 = out.precision + out.recall > 0
               ? 2 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

/// Random articles of at most `max_len` characters with up to `max_spans`
/// spans per side.
struct MetricCase {
  std::vector<propspan::Span> pred;
  std::vector<propspan::Span> gold;
};

inline MetricCase random_metric_case(Rng& rng, std::size_t n_articles = 2, std::size_t max_len = 40,
                                     std::size_t max_spans = 3, bool disjoint_gold = false) {
  MetricCase mc;
  for (std::size_t a = 0; a < n_articles; ++a) {
    const std::string id = "a" + std::to_string(a);
    const auto len = dim(rng, 2, max_len);
    const auto draw = [&](std::vector<propspan::Span>& out, bool disjoint) {
      const auto k = static_cast<std::size_t>(rng.below(max_spans + 1));
      std::vector<propspan::Span> local;
      for (std::size_t i = 0; i < k; ++i) {
        const auto s = static_cast<std::size_t>(rng.below(len - 1));
        const auto e = s + 1 + static_cast<std::size_t>(rng.below(len - s));
        propspan::Span sp{id, s, std::min(e, len)};
        bool clash = false;
        for (const auto& o : local) clash = clash || (sp.start < o.end && o.start < sp.end);
        if (disjoint && clash) continue;
        local.push_back(sp);
      }
      out.insert(out.end(), local.begin(), local.end());
    };
    draw(mc.pred, false);
    draw(mc.gold, disjoint_gold);
  }
  return mc;
}

// ---------------------------------------------------------------------------

struct Confusion {
  double tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion(const std::vector<propspan::Label>& p,
                           const std::vector<propspan::Label>& g) {
  Confusion c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int pi = p[i] == propspan::Label::kProp;
    const int gi = g[i] == propspan::Label::kProp;
    if (pi && gi) c.tp += 1;
    if (pi && !gi) c.fp += 1;
    if (!pi && gi) c.fn += 1;
    if (!pi && !gi) c.tn += 1;
  }
  return c;
}

}  // namespace oracle
