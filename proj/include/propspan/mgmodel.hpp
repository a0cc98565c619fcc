#pragma once

// Multi-granular gated tagger.
//
//   E        = Embed(tokens)                        [n x d_e]
//   H*_tok   = [E ; F_word ; ParseEmbed(paths)]     [n x (d_e + d_w + d_c)]
//   H_tok    = BiLSTM(H*_tok)                       [n x 2h]
//   H_sent   = [MeanPool(E) ; F_sent ; F_doc]
//   p_sent   = FC_sent(H_sent)                      [2]
//   g_sent   = sigmoid(W_g p_sent + b_g)            scalar
//   G_tok^i  = g_sent * H_tok^i
//   p_tok^i  = FC_tok(G_tok^i)                      [2]
//   L        = alpha L_sent + (1 - alpha) L_tok
//
// The token encoder is a trainable embedding table and the sentence vector
// pools over real tokens only (there are no [CLS]/[SEP] positions). The
// gate is applied at inference as well as in training.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/neuralcore.hpp"

namespace propspan {

struct ModelConfig {
  std::size_t vocab_size = 1;
  std::size_t embed_dim = 32;  // d_e
  std::size_t hidden_dim = 32;  // h, per direction
  std::size_t parse_dim = 30;  // d_c
  std::size_t parse_vocab = 4096;
  bool use_parse_path = true;
  std::size_t word_feature_dim = 0;  // d_w
  std::size_t sent_feature_dim = 0;  // d_s
  std::size_t doc_feature_dim = 0;   // d_d
  double embed_init = 0.1;

  std::size_t token_input_dim() const {
    return embed_dim + word_feature_dim + (use_parse_path ? parse_dim : 0);
  }
  std::size_t sentence_input_dim() const {
    return embed_dim + sent_feature_dim + doc_feature_dim;
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"vocab_size", c.vocab_size},
       {"embed_dim", c.embed_dim},
       {"hidden_dim", c.hidden_dim},
       {"parse_dim", c.parse_dim},
       {"parse_vocab", c.parse_vocab},
       {"use_parse_path", c.use_parse_path},
       {"word_feature_dim", c.word_feature_dim},
       {"sent_feature_dim", c.sent_feature_dim},
       {"doc_feature_dim", c.doc_feature_dim},
       {"embed_init", c.embed_init},
       {"encoder", "embedding"}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.parse_dim = j.value("parse_dim", c.parse_dim);
  c.parse_vocab = j.value("parse_vocab", c.parse_vocab);
  c.use_parse_path = j.value("use_parse_path", c.use_parse_path);
  c.word_feature_dim = j.value("word_feature_dim", c.word_feature_dim);
  c.sent_feature_dim = j.value("sent_feature_dim", c.sent_feature_dim);
  c.doc_feature_dim = j.value("doc_feature_dim", c.doc_feature_dim);
  c.embed_init = j.value("embed_init", c.embed_init);
}

struct SentenceBatch {
  std::vector<std::size_t> token_ids;
  nn::Tensor f_word;  // [n x d_w]
  std::vector<std::size_t> parse_ids;
  std::vector<double> f_sent;
  std::vector<double> f_doc;
  TokenLabelSeq gold;

  std::size_t size() const { return token_ids.size(); }
};

struct JointLossConfig {
  double alpha = 0.9;
  std::array<double, 2> sent_weights{1.0, 1.0};
  std::array<double, 2> tok_weights{1.0, 1.0};
};

struct LossBreakdown {
  double sent = 0.0;
  double tok = 0.0;
  double total = 0.0;
};

struct ForwardOptions {
  /// Replaces sigmoid(W_g p_sent + b_g) with a fixed value.
  std::optional<double> gate_override;
};

struct ForwardResult {
  nn::Tensor emb;     // E
  nn::Tensor parse;   // parse-path embeddings (empty when unused)
  nn::Tensor h_star;  // H*_tok
  nn::BiLstmCache lstm;
  nn::Tensor h_tok;   // H_tok
  nn::Tensor h_sent;  // [1 x sentence_input_dim]
  nn::Tensor p_sent;  // [1 x 2]
  double gate_logit = 0.0;
  double g_sent = 0.0;
  bool gate_overridden = false;
  nn::Tensor gated;   // G_tok
  nn::Tensor p_tok;   // [n x 2]
};

/// Prop iff P(Prop) > prop_threshold; the default 0.5 is argmax with ties
/// going to NonProp.
struct DecisionPolicy {
  double prop_threshold = 0.5;
};

namespace param_names {
inline constexpr const char* kTokenEmbedding = "token_embedding";
inline constexpr const char* kParseEmbedding = "parse_embedding";
inline constexpr const char* kFwWx = "lstm_fw.wx";
inline constexpr const char* kFwWh = "lstm_fw.wh";
inline constexpr const char* kFwB = "lstm_fw.b";
inline constexpr const char* kBwWx = "lstm_bw.wx";
inline constexpr const char* kBwWh = "lstm_bw.wh";
inline constexpr const char* kBwB = "lstm_bw.b";
inline constexpr const char* kSentW = "sent_fc.w";
inline constexpr const char* kSentB = "sent_fc.b";
inline constexpr const char* kGateW = "gate.w";
inline constexpr const char* kGateB = "gate.b";
inline constexpr const char* kTokW = "tok_fc.w";
inline constexpr const char* kTokB = "tok_fc.b";
}  // namespace param_names

inline LossBreakdown joint_loss(const ForwardResult& out, const TokenLabelSeq& gold,
                                const JointLossConfig& config);

class MgModel {
 public:
  /// Random initialization: uniform(-embed_init, embed_init) embeddings,
  /// Xavier-uniform matrices, zero biases with forget-gate bias 1.
  MgModel(ModelConfig config, nn::Rng rng) : config_(config) {
    using namespace param_names;
    const auto h = config_.hidden_dim;
    std::uint64_t stream = 0;
    auto next = [&]() { return rng.split(++stream); };
    {
      auto r = next();
      params_.add(kTokenEmbedding,
                  nn::uniform_init(config_.vocab_size, config_.embed_dim, config_.embed_init, r));
    }
    if (config_.use_parse_path) {
      auto r = next();
      params_.add(kParseEmbedding,
                  nn::uniform_init(config_.parse_vocab, config_.parse_dim, config_.embed_init, r));
    }
    for (const auto* dir : {"fw", "bw"}) {
      const std::string prefix = std::string("lstm_") + dir;
      auto r1 = next();
      params_.add(prefix + ".wx", nn::xavier_uniform(config_.token_input_dim(), 4 * h, r1));
      auto r2 = next();
      params_.add(prefix + ".wh", nn::xavier_uniform(h, 4 * h, r2));
      auto b = nn::Tensor::vector(4 * h);
      for (std::size_t k = h; k < 2 * h; ++k) b[k] = 1.0;
      params_.add(prefix + ".b", std::move(b));
    }
    {
      auto r = next();
      params_.add(kSentW, nn::xavier_uniform(config_.sentence_input_dim(), 2, r));
      params_.add(kSentB, nn::Tensor::vector(2));
    }
    {
      auto r = next();
      params_.add(kGateW, nn::xavier_uniform(2, 1, r));
      params_.add(kGateB, nn::Tensor::vector(1));
    }
    {
      auto r = next();
      params_.add(kTokW, nn::xavier_uniform(2 * h, 2, r));
      params_.add(kTokB, nn::Tensor::vector(2));
    }
  }

  MgModel(ModelConfig config, nn::ParamStore params)
      : config_(config), params_(std::move(params)) {
    check_param_shapes();
  }

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  ForwardResult forward(const SentenceBatch& batch, const ForwardOptions& options = {}) const {
    using namespace param_names;
    validate(batch);
    ForwardResult r;
    r.emb = nn::embedding_lookup(batch.token_ids, params_.value(kTokenEmbedding));
    std::vector<const nn::Tensor*> parts{&r.emb, &batch.f_word};
    if (config_.use_parse_path) {
      r.parse = nn::embedding_lookup(batch.parse_ids, params_.value(kParseEmbedding));
      parts.push_back(&r.parse);
    }
    r.h_star = nn::concat_cols(parts);
    r.h_tok = nn::bilstm_forward(r.h_star, fw(), bw(), r.lstm);

    const auto pooled = nn::mean_pool(r.emb);
    r.h_sent = nn::Tensor::matrix(1, config_.sentence_input_dim());
    {
      auto row = r.h_sent.row(0);
      std::size_t c = 0;
      for (double v : pooled.values()) row[c++] = v;
      for (double v : batch.f_sent) row[c++] = v;
      for (double v : batch.f_doc) row[c++] = v;
    }
    r.p_sent = nn::fc_forward(r.h_sent, params_.value(kSentW), params_.value(kSentB));
    const auto z = nn::fc_forward(r.p_sent, params_.value(kGateW), params_.value(kGateB));
    r.gate_logit = z[0];
    r.gate_overridden = options.gate_override.has_value();
    r.g_sent = r.gate_overridden ? *options.gate_override : nn::sigmoid(r.gate_logit);

    r.gated = r.h_tok;
    for (auto& v : r.gated.values()) v *= r.g_sent;
    r.p_tok = nn::fc_forward(r.gated, params_.value(kTokW), params_.value(kTokB));
    return r;
  }

  /// Accumulates d(joint loss)/d(params) into the store's gradients.
  LossBreakdown backward(const SentenceBatch& batch, const ForwardResult& r,
                         const JointLossConfig& config) {
    using namespace param_names;
    const auto n = batch.size();
    const auto h2 = 2 * config_.hidden_dim;
    const double alpha = config.alpha;

    const auto loss = joint_loss(r, batch.gold, config);

    // Token head.
    auto dp_tok = nn::Tensor::matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<std::size_t>(batch.gold.labels[i]);
      const auto ce = nn::softmax_ce(r.p_tok.row(i), label, config.tok_weights);
      const double scale = (1.0 - alpha) / static_cast<double>(n);
      dp_tok(i, 0) = scale * ce.grad[0];
      dp_tok(i, 1) = scale * ce.grad[1];
    }
    nn::Tensor d_gated;
    nn::fc_backward(r.gated, params_.value(kTokW), dp_tok, &d_gated, params_.grad(kTokW),
                    params_.grad(kTokB));

    // Gate.
    auto dh_tok = nn::Tensor::matrix(n, h2);
    double dg = 0.0;
    for (std::size_t k = 0; k < d_gated.size(); ++k) {
      dh_tok[k] = r.g_sent * d_gated[k];
      dg += d_gated[k] * r.h_tok[k];
    }

    // Sentence head.
    auto dp_sent = nn::Tensor::matrix(1, 2);
    {
      const auto label = static_cast<std::size_t>(batch.gold.sentence_label);
      const auto ce = nn::softmax_ce(r.p_sent.row(0), label, config.sent_weights);
      dp_sent[0] = alpha * ce.grad[0];
      dp_sent[1] = alpha * ce.grad[1];
    }
    if (!r.gate_overridden) {
      auto dz = nn::Tensor::matrix(1, 1);
      dz[0] = dg * r.g_sent * (1.0 - r.g_sent);
      nn::Tensor dp_from_gate;
      nn::fc_backward(r.p_sent, params_.value(kGateW), dz, &dp_from_gate, params_.grad(kGateW),
                      params_.grad(kGateB));
      dp_sent[0] += dp_from_gate[0];
      dp_sent[1] += dp_from_gate[1];
    }
    nn::Tensor dh_sent;
    nn::fc_backward(r.h_sent, params_.value(kSentW), dp_sent, &dh_sent, params_.grad(kSentW),
                    params_.grad(kSentB));
    auto dpooled = nn::Tensor::vector(config_.embed_dim);
    for (std::size_t c = 0; c < config_.embed_dim; ++c) dpooled[c] = dh_sent[c];
    auto d_emb = nn::mean_pool_backward(dpooled, n);

    // BiLSTM and token inputs.
    nn::LstmGrads gfw{params_.grad(kFwWx), params_.grad(kFwWh), params_.grad(kFwB)};
    nn::LstmGrads gbw{params_.grad(kBwWx), params_.grad(kBwWh), params_.grad(kBwB)};
    const auto dh_star = nn::bilstm_backward(r.lstm, dh_tok, fw(), bw(), gfw, gbw);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < config_.embed_dim; ++c) d_emb(i, c) += dh_star(i, c);
    }
    if (config_.use_parse_path) {
      const auto off = config_.embed_dim + config_.word_feature_dim;
      const auto d_parse = nn::slice_cols(dh_star, off, config_.parse_dim);
      nn::embedding_backward(batch.parse_ids, d_parse, params_.grad(kParseEmbedding));
    }
    nn::embedding_backward(batch.token_ids, d_emb, params_.grad(kTokenEmbedding));
    return loss;
  }

  TokenLabelSeq predict(const ForwardResult& r, const DecisionPolicy& policy = {}) const {
    TokenLabelSeq out;
    const double margin = std::log(policy.prop_threshold / (1.0 - policy.prop_threshold));
    for (std::size_t i = 0; i < r.p_tok.rows(); ++i) {
      const bool prop = r.p_tok(i, 1) - r.p_tok(i, 0) > margin;
      out.labels.push_back(prop ? Label::kProp : Label::kNonProp);
    }
    out.sentence_label = r.p_sent[1] > r.p_sent[0] ? Label::kProp : Label::kNonProp;
    return out;
  }

  TokenLabelSeq predict_tokens(const SentenceBatch& batch,
                               const DecisionPolicy& policy = {}) const {
    return predict(forward(batch), policy);
  }

 private:
  nn::LstmWeights fw() const {
    using namespace param_names;
    return {params_.value(kFwWx), params_.value(kFwWh), params_.value(kFwB)};
  }
  nn::LstmWeights bw() const {
    using namespace param_names;
    return {params_.value(kBwWx), params_.value(kBwWh), params_.value(kBwB)};
  }

  void validate(const SentenceBatch& b) const {
    const auto n = b.size();
    const auto fail = [](const std::string& stage, const std::string& what) {
      throw DataError("mgmodel " + stage + ": " + what);
    };
    if (n == 0) fail("encoder", "sentence has no tokens");
    if (b.f_word.rows() != n || b.f_word.cols() != config_.word_feature_dim) {
      fail("word features", "F_word is " + nn::shape_string(b.f_word) + ", expected [" +
                                std::to_string(n) + "x" +
                                std::to_string(config_.word_feature_dim) + "]");
    }
    if (config_.use_parse_path && b.parse_ids.size() != n) {
      fail("parse path", std::to_string(b.parse_ids.size()) + " ids for " + std::to_string(n) +
                             " tokens");
    }
    if (b.f_sent.size() != config_.sent_feature_dim) {
      fail("sentence features", "F_sent has " + std::to_string(b.f_sent.size()) +
                                    " values, expected " +
                                    std::to_string(config_.sent_feature_dim));
    }
    if (b.f_doc.size() != config_.doc_feature_dim) {
      fail("document features", "F_doc has " + std::to_string(b.f_doc.size()) +
                                    " values, expected " +
                                    std::to_string(config_.doc_feature_dim));
    }
    if (!b.gold.labels.empty() && b.gold.labels.size() != n) {
      fail("labels", std::to_string(b.gold.labels.size()) + " labels for " + std::to_string(n) +
                         " tokens");
    }
    for (double v : b.f_word.values()) {
      if (!std::isfinite(v)) fail("word features", "non-finite value");
    }
    for (double v : b.f_sent) {
      if (!std::isfinite(v)) fail("sentence features", "non-finite value");
    }
    for (double v : b.f_doc) {
      if (!std::isfinite(v)) fail("document features", "non-finite value");
    }
  }

  void check_param_shapes() const {
    using namespace param_names;
    const auto h = config_.hidden_dim;
    const auto expect = [&](const char* name, std::vector<std::size_t> shape) {
      if (!params_.contains(name)) throw DataError(std::string("missing parameter '") + name + "'");
      if (params_.value(name).shape() != shape) {
        throw DataError(std::string("parameter '") + name + "' has shape " +
                        nn::shape_string(params_.value(name)) + " inconsistent with config");
      }
    };
    expect(kTokenEmbedding, {config_.vocab_size, config_.embed_dim});
    if (config_.use_parse_path) expect(kParseEmbedding, {config_.parse_vocab, config_.parse_dim});
    for (const auto* dir : {"fw", "bw"}) {
      const std::string p = std::string("lstm_") + dir;
      expect((p + ".wx").c_str(), {config_.token_input_dim(), 4 * h});
      expect((p + ".wh").c_str(), {h, 4 * h});
      expect((p + ".b").c_str(), {4 * h});
    }
    expect(kSentW, {config_.sentence_input_dim(), 2});
    expect(kSentB, {2});
    expect(kGateW, {2, 1});
    expect(kGateB, {1});
    expect(kTokW, {2 * h, 2});
    expect(kTokB, {2});
  }

  ModelConfig config_;
  nn::ParamStore params_;
};

/// L_sent: weighted 2-class softmax CE on p_sent. L_tok: mean over tokens of
/// weighted softmax CE on p_tok. Total = alpha L_sent + (1 - alpha) L_tok.
inline LossBreakdown joint_loss(const ForwardResult& out, const TokenLabelSeq& gold,
                                const JointLossConfig& config) {
  if (config.alpha < 0.0 || config.alpha > 1.0) throw DataError("alpha must lie in [0, 1]");
  const auto n = out.p_tok.rows();
  if (gold.labels.size() != n) throw DataError("joint_loss: label count mismatch");
  LossBreakdown l;
  l.sent = nn::softmax_ce(out.p_sent.row(0), static_cast<std::size_t>(gold.sentence_label),
                          config.sent_weights)
               .loss;
  for (std::size_t i = 0; i < n; ++i) {
    l.tok += nn::softmax_ce(out.p_tok.row(i), static_cast<std::size_t>(gold.labels[i]),
                            config.tok_weights)
                 .loss;
  }
  l.tok /= static_cast<double>(n);
  l.total = config.alpha * l.sent + (1.0 - config.alpha) * l.tok;
  nn::require_finite(l.total, "joint_loss");
  return l;
}

}  // namespace propspan
