#pragma once

// Class weighting, the epoch loop with span-F1 early stopping, model
// bundles (checkpoints) and run manifests.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/io.hpp"
#include "propspan/lexfeatures.hpp"
#include "propspan/mgmodel.hpp"
#include "propspan/neuralcore.hpp"
#include "propspan/scorer.hpp"

namespace propspan {

inline constexpr const char* kToolVersion = "propspan 0.3.0";

/// Inverse normalized frequency, rescaled so the weights sum to the number
/// of classes. `smoothing` adds one to every count first; without it a zero
/// count is an error.
inline std::vector<double> compute_class_weights(std::span<const std::size_t> counts,
                                                 bool smoothing = false) {
  if (counts.empty()) throw DataError("compute_class_weights: no classes");
  std::vector<double> c(counts.size());
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    c[k] = static_cast<double>(counts[k]) + (smoothing ? 1.0 : 0.0);
    if (c[k] <= 0.0) {
      throw DataError("class " + std::to_string(k) +
                      " has zero samples; enable class-weight smoothing (adds 1 to every class)");
    }
    total += c[k];
  }
  std::vector<double> w(c.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    w[k] = total / c[k];  // 1 / (c_k / total)
    sum += w[k];
  }
  const double scale = static_cast<double>(c.size()) / sum;
  for (auto& v : w) v *= scale;
  return w;
}

struct ClassWeights {
  std::array<double, 2> sentence{1.0, 1.0};
  std::array<double, 2> token{1.0, 1.0};
};

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 20;
  double lr = 1e-3;
  double finetune_lr = 3e-5;  // fine-tuning rate for a pre-trained encoder; recorded only
  double alpha = 0.9;
  double l2_beta = 1e-4;
  std::size_t patience = 9;
  std::uint64_t seed = 1;
  std::string optimizer = "adam";  // or "sgd" (momentum 0.9)
  bool weighted_loss = true;
  bool class_weight_smoothing = false;
  double prop_threshold = 0.5;
  /// Optional early exit once dev span F1 reaches this value.
  std::optional<double> target_f1;

  void validate() const {
    if (batch_size == 0 || epochs == 0) throw UsageError("batch_size and epochs must be positive");
    if (!(lr > 0)) throw UsageError("lr must be positive");
    if (alpha < 0 || alpha > 1) throw UsageError("alpha must lie in [0, 1]");
    if (l2_beta < 0) throw UsageError("l2_beta must be non-negative");
    if (patience >= epochs) throw UsageError("patience must be smaller than epochs");
    if (optimizer != "adam" && optimizer != "sgd") {
      throw UsageError("optimizer must be 'adam' or 'sgd', got '" + optimizer + "'");
    }
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"lr", c.lr},
       {"finetune_lr", c.finetune_lr},
       {"alpha", c.alpha},
       {"l2_beta", c.l2_beta},
       {"patience", c.patience},
       {"seed", c.seed},
       {"optimizer", c.optimizer},
       {"weighted_loss", c.weighted_loss},
       {"class_weight_smoothing", c.class_weight_smoothing},
       {"prop_threshold", c.prop_threshold},
       {"target_f1", c.target_f1 ? nlohmann::json(*c.target_f1) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.finetune_lr = j.value("finetune_lr", c.finetune_lr);
  c.alpha = j.value("alpha", c.alpha);
  c.l2_beta = j.value("l2_beta", c.l2_beta);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.optimizer = j.value("optimizer", c.optimizer);
  c.weighted_loss = j.value("weighted_loss", c.weighted_loss);
  c.class_weight_smoothing = j.value("class_weight_smoothing", c.class_weight_smoothing);
  c.prop_threshold = j.value("prop_threshold", c.prop_threshold);
  if (j.contains("target_f1") && !j["target_f1"].is_null()) c.target_f1 = j["target_f1"].get<double>();
}

/// Case-sensitive token vocabulary; id 0 is the unknown word.
class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;

  Vocabulary() : words_{"<unk>"} {}

  static Vocabulary build(const Corpus& corpus) {
    std::set<std::string> seen;
    for (const auto& a : corpus.articles()) {
      for (const auto& t : tokenize(a)) seen.insert(t.surface);
    }
    Vocabulary v;
    for (const auto& w : seen) v.add(w);
    return v;
  }

  std::size_t id(const std::string& surface) const {
    auto it = index_.find(surface);
    return it == index_.end() ? kUnknown : it->second;
  }
  std::size_t size() const { return words_.size(); }

  nlohmann::json to_json() const { return words_; }
  static Vocabulary from_json(const nlohmann::json& j) {
    Vocabulary v;
    const auto words = j.get<std::vector<std::string>>();
    for (std::size_t i = 1; i < words.size(); ++i) v.add(words[i]);
    return v;
  }

 private:
  void add(const std::string& w) {
    index_.emplace(w, words_.size());
    words_.push_back(w);
  }

  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

struct PreparedArticle {
  const Article* article = nullptr;
  std::vector<Token> tokens;
  std::vector<SentenceBatch> sentences;  // one per sentence, possibly empty
};

inline std::vector<PreparedArticle> prepare_articles(const Corpus& corpus,
                                                     const FeatureExtractor& features,
                                                     const Vocabulary& vocab,
                                                     LookupStats* stats = nullptr) {
  std::vector<PreparedArticle> out;
  out.reserve(corpus.articles().size());
  for (const auto& article : corpus.articles()) {
    PreparedArticle p;
    p.article = &article;
    p.tokens = tokenize(article);
    const auto spans = corpus.spans_for(article.id);
    auto labels = project_spans(article, p.tokens, spans);
    auto feats = features.extract(article, p.tokens);
    if (stats) *stats += feats.stats;
    const auto ranges = sentence_token_ranges(p.tokens, article.sentences.size());
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      SentenceBatch b;
      for (std::size_t k = ranges[s].begin; k < ranges[s].end; ++k) {
        b.token_ids.push_back(vocab.id(p.tokens[k].surface));
      }
      b.f_word = std::move(feats.sentences[s].f_word);
      b.parse_ids = std::move(feats.sentences[s].parse_ids);
      b.f_sent = std::move(feats.sentences[s].f_sent);
      b.f_doc = feats.f_doc;
      b.gold = std::move(labels[s]);
      p.sentences.push_back(std::move(b));
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Everything needed to run a trained model on new articles, given the
/// same lexicon and sidecar resources.
struct ModelBundle {
  ModelConfig model;
  FeatureToggles toggles;
  Vocabulary vocab;
  SalienceTable salience;
  nn::ParamStore params;
  std::vector<std::pair<std::string, std::size_t>> lexicons;  // name, dimension
  std::size_t pos_tagset_size = 0;

  nlohmann::json to_json() const {
    nlohmann::json lex = nlohmann::json::array();
    for (const auto& [name, dim] : lexicons) lex.push_back({{"name", name}, {"dimension", dim}});
    return {{"format", "propspan-model"},
            {"version", 1},
            {"model", model},
            {"features", toggles},
            {"lexicons", lex},
            {"pos_tagset_size", pos_tagset_size},
            {"vocab", vocab.to_json()},
            {"salience", salience.to_json()},
            {"params", nn::params_to_json(params)}};
  }

  static ModelBundle from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "propspan-model") throw DataError("not a propspan model checkpoint");
    if (j.value("version", 0) != 1) throw DataError("unsupported checkpoint version");
    ModelBundle b;
    b.model = j.at("model").get<ModelConfig>();
    b.toggles = j.at("features").get<FeatureToggles>();
    for (const auto& l : j.at("lexicons")) {
      b.lexicons.emplace_back(l.at("name").get<std::string>(), l.at("dimension").get<std::size_t>());
    }
    b.pos_tagset_size = j.value("pos_tagset_size", std::size_t{0});
    b.vocab = Vocabulary::from_json(j.at("vocab"));
    b.salience = SalienceTable::from_json(j.at("salience"));
    b.params = nn::params_from_json(j.at("params"));
    return b;
  }

  std::string serialize() const { return to_json().dump() + "\n"; }

  static ModelBundle load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(io::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": malformed checkpoint: " + e.what());
    }
  }
};

inline std::vector<std::pair<std::string, std::size_t>> lexicon_signature(
    const FeatureToggles& toggles, const FeatureResources& res) {
  std::vector<std::pair<std::string, std::size_t>> sig;
  if (toggles.affect) {
    for (const auto& l : res.affect) sig.emplace_back(l.name, l.dimension);
  }
  if (toggles.semantic) {
    for (const auto& l : res.semantic) sig.emplace_back(l.name, l.dimension);
  }
  return sig;
}

/// Predicted spans for every article of `corpus`.
class Predictor {
 public:
  Predictor(const ModelBundle& bundle, const FeatureResources& resources)
      : bundle_(&bundle),
        features_(bundle.toggles, resources, bundle.salience),
        model_(bundle.model, bundle.params) {
    if (lexicon_signature(bundle.toggles, resources) != bundle.lexicons) {
      throw DataError("lexicon set differs from the one the model was trained with");
    }
    if (features_.word_dim() != bundle.model.word_feature_dim) {
      throw DataError("feature dimension " + std::to_string(features_.word_dim()) +
                      " does not match model (" + std::to_string(bundle.model.word_feature_dim) +
                      ")");
    }
  }

  std::vector<Span> predict(const Corpus& corpus, const DecisionPolicy& policy = {}) const {
    const auto prepared = prepare_articles(corpus, features_, bundle_->vocab);
    return predict(prepared, policy);
  }

  std::vector<Span> predict(std::span<const PreparedArticle> prepared,
                            const DecisionPolicy& policy = {}) const {
    return predict_with(model_, prepared, policy);
  }

  static std::vector<Span> predict_with(const MgModel& model,
                                        std::span<const PreparedArticle> prepared,
                                        const DecisionPolicy& policy) {
    std::vector<Span> out;
    for (const auto& p : prepared) {
      std::vector<TokenLabelSeq> labels;
      labels.reserve(p.sentences.size());
      for (const auto& b : p.sentences) {
        if (b.size() == 0) {
          labels.emplace_back();
          continue;
        }
        labels.push_back(model.predict(model.forward(b), policy));
      }
      auto spans = decode_spans(*p.article, p.tokens, labels);
      out.insert(out.end(), spans.begin(), spans.end());
    }
    sort_spans(out);
    return out;
  }

 private:
  const ModelBundle* bundle_;
  FeatureExtractor features_;
  MgModel model_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss_sent = 0.0;
  double loss_tok = 0.0;
  double dev_span_f1 = 0.0;
};

struct TrainResult {
  ModelBundle best;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_f1 = -1.0;
  bool stopped_early = false;
  nlohmann::json manifest;

  /// First epoch whose dev F1 reached `threshold`, if any.
  std::optional<std::size_t> epochs_to_reach(double threshold) const {
    for (const auto& m : history) {
      if (m.dev_span_f1 >= threshold) return m.epoch;
    }
    return std::nullopt;
  }

  std::string metrics_csv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "epoch,loss_sent,loss_tok,dev_span_f1\n";
    for (const auto& m : history) {
      os << m.epoch << "," << m.loss_sent << "," << m.loss_tok << "," << m.dev_span_f1 << "\n";
    }
    return os.str();
  }
};

inline std::vector<std::string> article_ids(const Corpus& c) {
  std::vector<std::string> ids;
  for (const auto& a : c.articles()) ids.push_back(a.id);
  return ids;
}

inline void check_no_leak(const Corpus& train, const Corpus& dev) {
  for (const auto& a : dev.articles()) {
    if (train.find(a.id)) {
      throw DataError("article '" + a.id + "' appears in both train and dev splits");
    }
  }
}

/// Deterministic article-level split: ids are shuffled with the seed and
/// the first round(fraction * n) (at least one) go to dev.
inline std::pair<Corpus, Corpus> split_train_dev(const Corpus& corpus, double dev_fraction,
                                                 std::uint64_t seed) {
  auto ids = article_ids(corpus);
  if (ids.size() < 2) throw DataError("need at least two articles to split train/dev");
  nn::Rng rng(seed, 0x5EED);
  rng.shuffle(std::span<std::string>(ids));
  auto n_dev = static_cast<std::size_t>(dev_fraction * static_cast<double>(ids.size()) + 0.5);
  n_dev = std::clamp<std::size_t>(n_dev, 1, ids.size() - 1);
  std::vector<std::string> dev(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_dev));
  std::vector<std::string> train(ids.begin() + static_cast<std::ptrdiff_t>(n_dev), ids.end());
  std::sort(dev.begin(), dev.end());
  std::sort(train.begin(), train.end());
  return {corpus.subset(train), corpus.subset(dev)};
}

inline std::string ids_fingerprint(const Corpus& c) {
  std::string joined;
  for (const auto& a : c.articles()) {
    joined += a.id;
    joined += '\n';
  }
  return io::hex64(io::fnv1a64(joined));
}

struct EpochCallback {
  virtual ~EpochCallback() = default;
  virtual void on_epoch(const EpochMetrics&) {}
};

/// Trains on `train`, selects the checkpoint with the best dev span F1 and
/// stops after more than `patience` consecutive non-improving epochs.
inline TrainResult train_model(const Corpus& train, const Corpus& dev,
                               const FeatureResources& resources, const FeatureToggles& toggles,
                               ModelConfig model_template, const TrainConfig& config,
                               EpochCallback* callback = nullptr) {
  config.validate();
  check_no_leak(train, dev);
  if (train.articles().empty() || dev.articles().empty()) {
    throw DataError("train and dev splits must both be non-empty");
  }

  auto salience = build_salience(train);
  FeatureExtractor features(toggles, resources, salience);
  const auto vocab = Vocabulary::build(train);

  ModelConfig mc = model_template;
  mc.vocab_size = vocab.size();
  mc.word_feature_dim = features.word_dim();
  mc.sent_feature_dim = features.sentence_dim();
  mc.doc_feature_dim = features.document_dim();
  mc.use_parse_path = toggles.syntax;
  mc.parse_vocab = resources.parse_vocab;

  LookupStats train_stats;
  LookupStats dev_stats;
  const auto train_data = prepare_articles(train, features, vocab, &train_stats);
  const auto dev_data = prepare_articles(dev, features, vocab, &dev_stats);

  std::array<std::size_t, 2> sent_counts{0, 0};
  std::array<std::size_t, 2> tok_counts{0, 0};
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t a = 0; a < train_data.size(); ++a) {
    for (std::size_t s = 0; s < train_data[a].sentences.size(); ++s) {
      const auto& b = train_data[a].sentences[s];
      if (b.size() == 0) continue;
      order.emplace_back(a, s);
      ++sent_counts[static_cast<std::size_t>(b.gold.sentence_label)];
      for (auto l : b.gold.labels) ++tok_counts[static_cast<std::size_t>(l)];
    }
  }
  if (order.empty()) throw DataError("training split has no tokens");

  ClassWeights weights;
  if (config.weighted_loss) {
    const auto ws = compute_class_weights(sent_counts, config.class_weight_smoothing);
    const auto wt = compute_class_weights(tok_counts, config.class_weight_smoothing);
    weights.sentence = {ws[0], ws[1]};
    weights.token = {wt[0], wt[1]};
  }
  const JointLossConfig loss_config{config.alpha, weights.sentence, weights.token};

  nn::Rng root(config.seed);
  MgModel model(mc, root.split(1));
  nn::Rng order_rng = root.split(2);
  nn::Adam adam({config.lr, 0.9, 0.999, 1e-8, config.l2_beta});
  nn::Sgd sgd({config.lr, 0.9, config.l2_beta});
  const DecisionPolicy policy{config.prop_threshold};

  TrainResult result;
  std::size_t bad_epochs = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto epoch_rng = order_rng.split(epoch);
    epoch_rng.shuffle(std::span<std::pair<std::size_t, std::size_t>>(order));
    double sum_sent = 0.0;
    double sum_tok = 0.0;
    std::size_t in_batch = 0;
    const auto flush = [&]() {
      if (in_batch == 0) return;
      model.params().scale_grad(1.0 / static_cast<double>(in_batch));
      if (config.optimizer == "sgd") {
        sgd.step(model.params());
      } else {
        adam.step(model.params());
      }
      in_batch = 0;
    };
    for (std::size_t step = 0; step < order.size(); ++step) {
      const auto& b = train_data[order[step].first].sentences[order[step].second];
      try {
        const auto fwd = model.forward(b);
        const auto loss = model.backward(b, fwd, loss_config);
        sum_sent += loss.sent;
        sum_tok += loss.tok;
        if (++in_batch == config.batch_size) flush();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                           ": " + e.what());
      }
    }
    flush();

    const auto predicted = Predictor::predict_with(model, dev_data, policy);
    const auto score = span_f1(predicted, dev.spans());
    EpochMetrics m{epoch, sum_sent / static_cast<double>(order.size()),
                   sum_tok / static_cast<double>(order.size()), score.f1};
    result.history.push_back(m);
    if (callback) callback->on_epoch(m);

    if (m.dev_span_f1 > result.best_f1) {
      result.best_f1 = m.dev_span_f1;
      result.best_epoch = epoch;
      result.best.params = model.params();
      bad_epochs = 0;
    } else if (++bad_epochs > config.patience) {
      result.stopped_early = true;
      break;
    }
    if (config.target_f1 && m.dev_span_f1 >= *config.target_f1) break;
  }
  result.best.params.zero_grad();
  result.best.model = mc;
  result.best.toggles = toggles;
  result.best.vocab = vocab;
  result.best.salience = std::move(salience);
  result.best.lexicons = lexicon_signature(toggles, resources);
  result.best.pos_tagset_size = toggles.syntax ? resources.pos_tagset.size() : 0;

  std::size_t cross_sentence = 0;
  for (const auto& a : train.articles()) {
    const auto s = train.spans_for(a.id);
    cross_sentence += count_cross_sentence_spans(a, s);
  }
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& m : result.history) {
    epochs.push_back({{"epoch", m.epoch},
                      {"loss_sent", m.loss_sent},
                      {"loss_tok", m.loss_tok},
                      {"dev_span_f1", m.dev_span_f1}});
  }
  result.manifest = {
      {"tool_version", kToolVersion},
      {"train_config", config},
      {"model_config", mc},
      {"features", toggles},
      {"feature_code", toggles.code()},
      {"seed", config.seed},
      {"optimizer", {{"name", config.optimizer}, {"decoupled_l2", config.l2_beta}, {"lr", config.lr},
                     {"finetune_lr", config.finetune_lr}}},
      {"init", "embeddings uniform(-0.1,0.1); matrices xavier-uniform; biases 0; forget bias 1"},
      {"encoder", "embedding"},
      {"sentence_loss", "2-class softmax cross-entropy"},
      {"gate_at_inference", true},
      {"class_weights", {{"sentence", weights.sentence}, {"token", weights.token}}},
      {"label_counts", {{"sentence", sent_counts}, {"token", tok_counts}}},
      {"splits",
       {{"train_articles", train.articles().size()},
        {"dev_articles", dev.articles().size()},
        {"train_ids_fnv", ids_fingerprint(train)},
        {"dev_ids_fnv", ids_fingerprint(dev)},
        {"disjoint", true}}},
      {"salience_source", "train"},
      {"cross_sentence_gold_spans", cross_sentence},
      {"cross_sentence_policy", "split at sentence bounds"},
      {"lexicon_miss_rate", {{"train", train_stats.miss_rate()}, {"dev", dev_stats.miss_rate()}}},
      {"epochs", epochs},
      {"best_epoch", result.best_epoch},
      {"best_dev_span_f1", result.best_f1},
      {"stopped_early", result.stopped_early}};
  return result;
}

}  // namespace propspan
