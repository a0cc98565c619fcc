#pragma once

// Command-line front end. `run` is the whole program minus process exit so
// it can be driven in-process by tests.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/fixtures.hpp"
#include "propspan/io.hpp"
#include "propspan/lexfeatures.hpp"
#include "propspan/runconfig.hpp"
#include "propspan/scorer.hpp"
#include "propspan/spanops.hpp"
#include "propspan/trainer.hpp"

namespace propspan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kIo: return 2;
    case ErrorKind::kData: return 3;
    case ErrorKind::kNumeric:
    case ErrorKind::kInternal: return 4;
  }
  return 4;
}

/// Collects input hashes and output hashes for manifest.json.
class Manifest {
 public:
  Manifest(std::string subcommand, fs::path out_dir)
      : out_dir_(std::move(out_dir)) {
    body_["subcommand"] = std::move(subcommand);
    body_["tool_version"] = kToolVersion;
    body_["inputs"] = json::object();
    body_["outputs"] = json::object();
  }

  void input(const std::string& role, const fs::path& p) {
    body_["inputs"][role] = {{"path", p.generic_string()}, {"fnv1a64", io::hash_path(p)}};
  }
  void input(const std::string& role, const std::optional<fs::path>& p) {
    if (p) input(role, *p);
  }

  json& operator[](const std::string& key) { return body_[key]; }

  void output(const std::string& name, std::string_view contents) {
    io::write_file_atomic(out_dir_ / name, contents);
    body_["outputs"][name] = io::hex64(io::fnv1a64(contents));
  }

  void write() {
    io::write_file_atomic(out_dir_ / "manifest.json", body_.dump(2) + "\n");
  }

 private:
  fs::path out_dir_;
  json body_;
};

inline void prepare_out_dir(const fs::path& out) {
  if (out.empty()) throw UsageError("--out is required");
  if (fs::exists(out) && !fs::is_directory(out)) {
    throw UsageError("--out exists and is not a directory: " + out.string());
  }
  fs::create_directories(out);
}

inline std::vector<Span> read_spans_checked(const fs::path& path, const Corpus& articles) {
  auto spans = read_span_tsv(path);
  Corpus check(articles.articles(), spans);
  check.validate();
  return spans;
}

inline std::set<std::string> read_word_list(const fs::path& path) {
  std::set<std::string> out;
  const auto contents = io::read_file(path);
  for (auto line : io::lines(contents)) {
    std::string w(line);
    while (!w.empty() && (w.back() == ' ' || w.back() == '\t')) w.pop_back();
    if (w.empty() || w.front() == '#') continue;
    out.insert(utf8::lower(w));
  }
  return out;
}

inline FeatureToggles parse_feature_code(const std::string& code) {
  FeatureToggles t{false, false, false, false, false, false};
  for (char c : code) {
    switch (c) {
      case 'A': t.affect = true; break;
      case 'X': t.syntax = true; break;
      case 'N': t.semantic = true; break;
      case 'S': t.sentence = true; break;
      case 'D': t.document = true; break;
      case 'W': t.salience = true; break;
      case '-': break;
      default: throw UsageError(std::string("unknown feature letter '") + c + "' (use A X N S D W)");
    }
  }
  return t;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (auto part : io::split(text, ',')) {
    std::uint64_t v = 0;
    if (!io::parse_int(part, v)) throw UsageError("bad seed '" + std::string(part) + "' in --seeds");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--seeds is empty");
  return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  fs::path articles;
  std::optional<fs::path> labels;
  std::optional<fs::path> sentences;
  fs::path out;
};

inline int cmd_ingest(const IngestArgs& a, std::ostream& os) {
  prepare_out_dir(a.out);
  auto corpus = load_corpus(a.articles, a.labels, a.sentences);
  Manifest m("ingest", a.out);
  m.input("articles", a.articles);
  m.input("labels", a.labels);
  m.input("sentences", a.sentences);

  std::string sentences;
  std::string tokens = "article_id\tsent_idx\ttok_idx\tstart\tend\tlabel\tsurface\n";
  std::size_t n_sent = 0;
  std::size_t n_tok = 0;
  std::size_t n_prop = 0;
  std::size_t cross = 0;
  for (const auto& art : corpus.articles()) {
    for (const auto& r : art.sentences) {
      sentences += art.id + "\t" + std::to_string(r.start) + "\t" + std::to_string(r.end) + "\n";
    }
    const auto toks = tokenize(art);
    const auto spans = corpus.spans_for(art.id);
    cross += count_cross_sentence_spans(art, spans);
    const auto labels = project_spans(art, toks, spans);
    const auto ranges = sentence_token_ranges(toks, art.sentences.size());
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      for (std::size_t k = ranges[s].begin; k < ranges[s].end; ++k) {
        const bool prop = labels[s].labels[k - ranges[s].begin] == Label::kProp;
        n_prop += prop;
        tokens += art.id + "\t" + std::to_string(s) + "\t" + std::to_string(k - ranges[s].begin) +
                  "\t" + std::to_string(toks[k].start) + "\t" + std::to_string(toks[k].end) +
                  "\t" + (prop ? "P" : "O") + "\t" + toks[k].surface + "\n";
      }
    }
    n_sent += art.sentences.size();
    n_tok += toks.size();
  }
  m.output("labels.tsv", format_span_tsv(corpus.spans()));
  m.output("sentences.tsv", sentences);
  m.output("tokens.tsv", tokens);
  m["stats"] = {{"articles", corpus.articles().size()},
                {"sentences", n_sent},
                {"tokens", n_tok},
                {"prop_tokens", n_prop},
                {"spans", corpus.spans().size()},
                {"cross_sentence_spans", cross}};
  m.write();
  os << "ingested " << corpus.articles().size() << " articles, " << n_sent << " sentences, "
     << n_tok << " tokens, " << corpus.spans().size() << " spans\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FeaturizeArgs {
  fs::path config;
  std::optional<fs::path> articles;
  std::optional<std::string> features;
  fs::path out;
};

inline std::string format_values(std::span<const double> v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (double x : v) os << '\t' << x;
  return os.str();
}

inline int cmd_featurize(const FeaturizeArgs& a, std::ostream& os) {
  prepare_out_dir(a.out);
  auto cfg = load_run_config(a.config);
  if (a.articles) cfg.data.articles = *a.articles;
  if (a.features) cfg.features = parse_feature_code(*a.features);
  const auto labels = a.articles ? std::nullopt : cfg.data.labels;
  const auto corpus = load_corpus(cfg.data.articles, labels, cfg.data.sentences);
  const auto resources = load_resources(cfg);
  FeatureExtractor fx(cfg.features, resources, build_salience(corpus));

  std::string words;
  std::string sents;
  std::string docs;
  LookupStats stats;
  for (const auto& art : corpus.articles()) {
    const auto toks = tokenize(art);
    const auto f = fx.extract(art, toks);
    stats += f.stats;
    const auto ranges = sentence_token_ranges(toks, art.sentences.size());
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      const auto& b = f.sentences[s];
      for (std::size_t k = 0; k < ranges[s].size(); ++k) {
        words += art.id + "\t" + std::to_string(s) + "\t" + std::to_string(k) + "\t" +
                 toks[ranges[s].begin + k].surface + "\t" + std::to_string(b.parse_ids[k]) +
                 format_values(b.f_word.row(k)) + "\n";
      }
      if (!b.f_sent.empty()) sents += art.id + "\t" + std::to_string(s) + format_values(b.f_sent) + "\n";
    }
    if (!f.f_doc.empty()) docs += art.id + format_values(f.f_doc) + "\n";
  }
  Manifest m("featurize", a.out);
  m["config"] = cfg.to_json();
  m.input("config", a.config);
  m.input("articles", cfg.data.articles);
  m.input("labels", labels);
  m["dims"] = {{"word", fx.word_dim()}, {"sentence", fx.sentence_dim()}, {"document", fx.document_dim()}};
  m["feature_code"] = cfg.features.code();
  m["lexicon_miss_rate"] = stats.miss_rate();
  m.output("word_features.tsv", words);
  m.output("sentence_features.tsv", sents);
  m.output("document_features.tsv", docs);
  m.output("salience.json", fx.salience().to_json().dump() + "\n");
  m.write();
  os << "featurized " << corpus.articles().size() << " articles (word dim " << fx.word_dim()
     << ", lexicon miss rate " << stats.miss_rate() << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> alpha;
  std::optional<double> l2;
  std::optional<std::size_t> patience;
  std::optional<std::string> features;
  std::optional<std::string> optimizer;
  std::optional<double> target_f1;
  bool unweighted = false;
  bool quiet = false;
  fs::path out;
};

inline std::pair<Corpus, Corpus> load_train_dev(const RunConfig& cfg, std::uint64_t seed) {
  if (!cfg.data.labels) throw UsageError("config: data.labels is required for training");
  auto corpus = load_corpus(cfg.data.articles, cfg.data.labels, cfg.data.sentences);
  if (cfg.data.dev_articles) {
    if (!cfg.data.dev_labels) throw UsageError("config: data.dev_labels is required with data.dev_articles");
    auto dev = load_corpus(*cfg.data.dev_articles, cfg.data.dev_labels, cfg.data.sentences);
    return {std::move(corpus), std::move(dev)};
  }
  return split_train_dev(corpus, cfg.data.dev_fraction, seed);
}

struct ProgressPrinter : EpochCallback {
  std::ostream* os = nullptr;
  std::uint64_t seed = 0;
  void on_epoch(const EpochMetrics& m) override {
    if (!os) return;
    *os << "seed " << seed << " epoch " << m.epoch << ": loss_sent " << m.loss_sent << " loss_tok "
        << m.loss_tok << " dev_span_f1 " << m.dev_span_f1 << "\n";
  }
};

inline TrainResult train_one(const RunConfig& cfg, const fs::path& config_path,
                             const fs::path& out, std::ostream* progress) {
  auto [train, dev] = load_train_dev(cfg, cfg.train.seed);
  const auto resources = load_resources(cfg);
  ProgressPrinter printer;
  printer.os = progress;
  printer.seed = cfg.train.seed;
  auto result = train_model(train, dev, resources, cfg.features, cfg.model, cfg.train, &printer);
  if (result.best.params.size() == 0) throw NumericError("training produced no checkpoint");

  Manifest m("train", out);
  m["config"] = cfg.to_json();
  m["seed"] = cfg.train.seed;
  m["run"] = result.manifest;
  m.input("config", config_path);
  m.input("articles", cfg.data.articles);
  m.input("labels", cfg.data.labels);
  m.input("dev_articles", cfg.data.dev_articles);
  m.input("dev_labels", cfg.data.dev_labels);
  m.input("sentences", cfg.data.sentences);
  m.input("parse_sidecar", cfg.data.parse_sidecar);
  m.input("pos_sidecar", cfg.data.pos_sidecar);
  for (std::size_t k = 0; k < cfg.affect_lexicons.size(); ++k) {
    m.input("affect_lexicon_" + std::to_string(k), cfg.affect_lexicons[k]);
  }
  for (std::size_t k = 0; k < cfg.semantic_lexicons.size(); ++k) {
    m.input("semantic_lexicon_" + std::to_string(k), cfg.semantic_lexicons[k]);
  }
  m.output("checkpoint.json", result.best.serialize());
  m.output("metrics.csv", result.metrics_csv());
  Predictor predictor(result.best, resources);
  m.output("dev_predictions.tsv",
           format_span_tsv(predictor.predict(dev, DecisionPolicy{cfg.train.prop_threshold})));
  m.write();
  return result;
}

inline int cmd_train(const TrainArgs& a, std::ostream& os) {
  prepare_out_dir(a.out);
  auto cfg = load_run_config(a.config);
  if (a.seed && a.seeds) throw UsageError("use either --seed or --seeds");
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.alpha) cfg.train.alpha = *a.alpha;
  if (a.l2) cfg.train.l2_beta = *a.l2;
  if (a.patience) cfg.train.patience = *a.patience;
  if (a.optimizer) cfg.train.optimizer = *a.optimizer;
  if (a.target_f1) cfg.train.target_f1 = *a.target_f1;
  if (a.unweighted) cfg.train.weighted_loss = false;
  if (a.features) cfg.features = parse_feature_code(*a.features);
  if (a.seed) cfg.train.seed = *a.seed;
  if (cfg.train.patience >= cfg.train.epochs && !a.patience) {
    cfg.train.patience = cfg.train.epochs - 1;
  }
  cfg.train.validate();
  std::ostream* progress = a.quiet ? nullptr : &os;

  if (!a.seeds) {
    const auto r = train_one(cfg, a.config, a.out, progress);
    os << "best dev span F1 " << r.best_f1 << " at epoch " << r.best_epoch << "\n";
    return 0;
  }
  const auto seeds = parse_seed_list(*a.seeds);
  std::ostringstream summary;
  summary << std::setprecision(17) << "seed,best_epoch,best_dev_span_f1\n";
  double total = 0.0;
  for (auto s : seeds) {
    auto c = cfg;
    c.train.seed = s;
    const auto r = train_one(c, a.config, a.out / ("seed-" + std::to_string(s)), progress);
    summary << s << "," << r.best_epoch << "," << r.best_f1 << "\n";
    total += r.best_f1;
  }
  const double mean = total / static_cast<double>(seeds.size());
  Manifest m("train", a.out);
  m["config"] = cfg.to_json();
  m["seeds"] = seeds;
  m["mean_best_dev_span_f1"] = mean;
  m.output("seeds.csv", summary.str());
  m.write();
  os << "mean best dev span F1 over " << seeds.size() << " seeds: " << mean << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  fs::path model;
  fs::path config;
  std::optional<fs::path> articles;
  std::optional<fs::path> sentences;
  std::optional<double> threshold;
  fs::path out;
};

inline int cmd_predict(const PredictArgs& a, std::ostream& os) {
  prepare_out_dir(a.out);
  auto cfg = load_run_config(a.config);
  if (a.articles) cfg.data.articles = *a.articles;
  if (a.sentences) cfg.data.sentences = *a.sentences;
  const auto corpus = load_corpus(cfg.data.articles, std::nullopt, cfg.data.sentences);
  const auto resources = load_resources(cfg);
  const auto bundle = ModelBundle::load(a.model);
  Predictor predictor(bundle, resources);
  const DecisionPolicy policy{a.threshold.value_or(cfg.train.prop_threshold)};
  const auto spans = predictor.predict(corpus, policy);

  Manifest m("predict", a.out);
  m["config"] = cfg.to_json();
  m["prop_threshold"] = policy.prop_threshold;
  m.input("model", a.model);
  m.input("config", a.config);
  m.input("articles", cfg.data.articles);
  m.input("sentences", cfg.data.sentences);
  m.output("predictions.tsv", format_span_tsv(spans));
  m.write();
  os << "predicted " << spans.size() << " spans over " << corpus.articles().size() << " articles\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EnsembleArgs {
  std::vector<fs::path> preds;
  fs::path articles;
  std::optional<std::size_t> quorum;
  fs::path out;
};

inline int cmd_ensemble(const EnsembleArgs& a, std::ostream& os) {
  prepare_out_dir(a.out);
  if (a.preds.empty()) throw UsageError("ensemble needs at least one --pred");
  if (a.quorum && (*a.quorum == 0 || *a.quorum > a.preds.size())) {
    throw UsageError("--quorum must lie in [1, number of --pred files]");
  }
  const auto corpus = load_corpus(a.articles, std::nullopt);
  std::vector<std::vector<Span>> members;
  Manifest m("ensemble", a.out);
  for (std::size_t k = 0; k < a.preds.size(); ++k) {
    members.push_back(read_spans_checked(a.preds[k], corpus));
    m.input("pred_" + std::to_string(k), a.preds[k]);
  }
  m.input("articles", a.articles);
  const auto voted = ensemble_vote(members, corpus.articles(), a.quorum);
  m["members"] = a.preds.size();
  m["quorum"] = a.quorum ? json(*a.quorum) : json("majority");
  m.output("ensemble.tsv", format_span_tsv(voted));
  m.write();
  os << "voted " << a.preds.size() << " predictions into " << voted.size() << " spans\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PostprocessArgs {
  fs::path pred;
  fs::path articles;
  std::optional<fs::path> sentences;
  std::size_t max_gap = 2;
  std::optional<fs::path> stopwords;
  std::optional<fs::path> loaded_lexicon;
  bool no_trim_stopwords = false;
  bool cross_sentence = false;
  fs::path out;
};

inline int cmd_postprocess(const PostprocessArgs& a, std::ostream& os) {
  prepare_out_dir(a.out);
  const auto corpus = load_corpus(a.articles, std::nullopt, a.sentences);
  const auto spans = read_spans_checked(a.pred, corpus);
  PostProcessConfig pc;
  pc.max_gap_words = a.max_gap;
  pc.within_sentence = !a.cross_sentence;
  pc.trim_stopwords = !a.no_trim_stopwords;
  if (a.stopwords) pc.stopwords = read_word_list(*a.stopwords);
  if (a.loaded_lexicon) pc.loaded_language = read_word_list(*a.loaded_lexicon);
  const auto out = postprocess_corpus(spans, corpus.articles(), pc);

  Manifest m("postprocess", a.out);
  m["postprocess"] = pc;
  m.input("pred", a.pred);
  m.input("articles", a.articles);
  m.input("sentences", a.sentences);
  m.input("stopwords", a.stopwords);
  m.input("loaded_lexicon", a.loaded_lexicon);
  m.output("postprocessed.tsv", format_span_tsv(out));
  m.write();
  os << "post-processed " << spans.size() << " spans into " << out.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
  fs::path pred;
  fs::path gold;
  fs::path articles;
  std::optional<fs::path> out;
};

inline int cmd_score(const ScoreArgs& a, std::ostream& os) {
  const auto corpus = load_corpus(a.articles, std::nullopt);
  const auto pred = read_spans_checked(a.pred, corpus);
  const auto gold = read_spans_checked(a.gold, corpus);
  const auto report = span_f1(pred, gold);
  os << format_report(report);
  if (a.out) {
    prepare_out_dir(*a.out);
    Manifest m("score", *a.out);
    m.input("pred", a.pred);
    m.input("gold", a.gold);
    m.input("articles", a.articles);
    m["precision"] = report.precision;
    m["recall"] = report.recall;
    m["f1"] = report.f1;
    m["gold_overlaps"] = report.gold_overlaps;
    m.output("score.csv", format_csv(report));
    m.output("report.txt", format_report(report));
    m.write();
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct FixturesArgs {
  fs::path out;
  std::uint64_t seed = 1;
  fixtures::FixtureConfig config;
};

inline int cmd_make_fixtures(FixturesArgs a, std::ostream& os) {
  prepare_out_dir(a.out);
  a.config.seed = a.seed;
  const auto set = fixtures::generate(a.config);
  fixtures::write(set, a.out, a.seed);
  Manifest m("make-fixtures", a.out);
  m["seed"] = a.seed;
  m["fixture_config"] = {{"articles", a.config.articles},
                         {"sentences_per_article", a.config.sentences_per_article},
                         {"prop_sentence_rate", a.config.prop_sentence_rate},
                         {"quote_rate", a.config.quote_rate},
                         {"first_id", a.config.first_id}};
  m["spans"] = set.spans.size();
  for (const auto* f : {"labels.tsv", "parse.tsv", "pos.tsv", "config.json", "stopwords.txt",
                        "loaded_language.txt"}) {
    m["outputs"][f] = io::hash_file(a.out / f);
  }
  m["outputs"]["articles"] = io::hash_path(a.out / "articles");
  m["outputs"]["lexicons"] = io::hash_path(a.out / "lexicons");
  m.write();
  os << "wrote " << set.articles.size() << " articles and " << set.spans.size() << " spans to "
     << a.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& os, std::ostream& es) {
  CLI::App app{"Multi-granular propaganda span tagger", "propspan"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  app.option_defaults()->always_capture_default();

  std::function<int()> action;

  IngestArgs ingest;
  {
    auto* c = app.add_subcommand("ingest", "Validate a corpus and write normalized labels, sentences and tokens");
    c->add_option("--articles", ingest.articles, "Directory of article<ID>.txt files")->required();
    c->add_option("--labels", ingest.labels, "Span TSV: article_id, start, end");
    c->add_option("--sentences", ingest.sentences, "Sentence bounds TSV overriding the splitter");
    c->add_option("--out", ingest.out, "Output directory")->required();
    c->callback([&] { action = [&] { return cmd_ingest(ingest, os); }; });
  }

  FeaturizeArgs featurize;
  {
    auto* c = app.add_subcommand("featurize", "Write word, sentence and document feature tables");
    c->add_option("--config", featurize.config, "Run configuration JSON")->required();
    c->add_option("--articles", featurize.articles, "Articles directory overriding the config");
    c->add_option("--features", featurize.features, "Feature letters from A X N S D W");
    c->add_option("--out", featurize.out, "Output directory")->required();
    c->callback([&] { action = [&] { return cmd_featurize(featurize, os); }; });
  }

  TrainArgs train;
  {
    auto* c = app.add_subcommand("train", "Train a model; writes checkpoint.json, metrics.csv, manifest.json");
    c->add_option("--config", train.config, "Run configuration JSON")->required();
    c->add_option("--seed", train.seed, "Seed for initialization, batch order and the dev split [1]");
    c->add_option("--seeds", train.seeds,
                  "Comma-separated seeds, one run each under <out>/seed-<s> (e.g. 1,2,3,12,123,1234,12345)");
    c->add_option("--epochs", train.epochs, "Maximum epochs [20]");
    c->add_option("--batch-size", train.batch_size, "Sentences per optimizer step [8]");
    c->add_option("--lr", train.lr, "Learning rate [0.001; 3e-5 suits a pre-trained encoder]");
    c->add_option("--alpha", train.alpha, "Sentence loss weight in the joint loss [0.9]");
    c->add_option("--l2", train.l2, "Decoupled L2 coefficient [0.0001]");
    c->add_option("--patience", train.patience, "Early-stopping patience in epochs [9]");
    c->add_option("--features", train.features, "Feature letters from A X N S D W [AXNSDW]");
    c->add_option("--optimizer", train.optimizer, "adam or sgd [adam]");
    c->add_option("--target-f1", train.target_f1, "Stop once dev span F1 reaches this value");
    c->add_flag("--unweighted", train.unweighted, "Disable class-weighted losses");
    c->add_flag("--quiet", train.quiet, "Suppress per-epoch progress");
    c->add_option("--out", train.out, "Output directory")->required();
    c->callback([&] { action = [&] { return cmd_train(train, os); }; });
  }

  PredictArgs predict;
  {
    auto* c = app.add_subcommand("predict", "Tag articles with a trained model");
    c->add_option("--model", predict.model, "checkpoint.json from train")->required();
    c->add_option("--config", predict.config, "Run configuration JSON naming lexicons and sidecars")->required();
    c->add_option("--articles", predict.articles, "Articles directory overriding the config");
    c->add_option("--sentences", predict.sentences, "Sentence bounds TSV");
    c->add_option("--threshold", predict.threshold, "Prop probability threshold [0.5]");
    c->add_option("--out", predict.out, "Output directory")->required();
    c->callback([&] { action = [&] { return cmd_predict(predict, os); }; });
  }

  EnsembleArgs ensemble;
  {
    auto* c = app.add_subcommand("ensemble", "Character-level majority vote over prediction files");
    c->add_option("--pred", ensemble.preds, "Prediction TSV (repeat per model)")->required();
    c->add_option("--articles", ensemble.articles, "Articles directory")->required();
    c->add_option("--quorum", ensemble.quorum, "Votes needed per character [more than half]");
    c->add_option("--out", ensemble.out, "Output directory")->required();
    c->callback([&] { action = [&] { return cmd_ensemble(ensemble, os); }; });
  }

  PostprocessArgs post;
  {
    auto* c = app.add_subcommand("postprocess", "Merge gaps, trim boundaries and add loaded-language spans");
    c->add_option("--pred", post.pred, "Prediction TSV")->required();
    c->add_option("--articles", post.articles, "Articles directory")->required();
    c->add_option("--sentences", post.sentences, "Sentence bounds TSV");
    c->add_option("--max-gap", post.max_gap, "Merge spans separated by at most this many words");
    c->add_option("--stopwords", post.stopwords, "Stopword list, one per line [built-in list]");
    c->add_option("--loaded-lexicon", post.loaded_lexicon, "Loaded-language words, one per line");
    c->add_flag("--no-trim-stopwords", post.no_trim_stopwords, "Keep boundary stopwords");
    c->add_flag("--cross-sentence", post.cross_sentence, "Allow gap merges across sentences");
    c->add_option("--out", post.out, "Output directory")->required();
    c->callback([&] { action = [&] { return cmd_postprocess(post, os); }; });
  }

  ScoreArgs score;
  {
    auto* c = app.add_subcommand("score", "Span-level normalized precision, recall and F1");
    c->add_option("--pred", score.pred, "Prediction TSV")->required();
    c->add_option("--gold", score.gold, "Gold TSV")->required();
    c->add_option("--articles", score.articles, "Articles directory")->required();
    c->add_option("--out", score.out, "Write score.csv, report.txt and manifest.json here");
    c->callback([&] { action = [&] { return cmd_score(score, os); }; });
  }

  FixturesArgs fix;
  {
    auto* c = app.add_subcommand("make-fixtures", "Generate the synthetic marker-word corpus");
    c->add_option("--out", fix.out, "Output directory")->required();
    c->add_option("--seed", fix.seed, "Generator seed");
    c->add_option("--articles", fix.config.articles, "Number of articles");
    c->add_option("--sentences-per-article", fix.config.sentences_per_article, "Sentences per article");
    c->add_option("--prop-rate", fix.config.prop_sentence_rate, "Fraction of sentences with markers")
        ->check(CLI::Range(0.0, 1.0));
    c->add_option("--quote-rate", fix.config.quote_rate, "Fraction of marker phrases in quotes")
        ->check(CLI::Range(0.0, 1.0));
    c->callback([&] { action = [&] { return cmd_make_fixtures(fix, os); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    os << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    os << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    os << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    es << "error[usage]: " << e.what() << "\n";
    es << "run 'propspan --help' for usage\n";
    return 2;
  }

  try {
    return action ? action() : 0;
  } catch (const Error& e) {
    es << "error[" << error_kind_name(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    es << "error[data]: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    es << "error[io]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    es << "error[internal]: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace propspan::cli
