#pragma once

// Run configuration file: data locations, lexicons, feature toggles and
// model / training hyper-parameters. Relative paths resolve against the
// directory holding the config file.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "propspan/corpus.hpp"
#include "propspan/error.hpp"
#include "propspan/io.hpp"
#include "propspan/lexfeatures.hpp"
#include "propspan/mgmodel.hpp"
#include "propspan/trainer.hpp"

namespace propspan {

struct DataConfig {
  std::filesystem::path articles;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> sentences;
  std::optional<std::filesystem::path> dev_articles;  // explicit dev set
  std::optional<std::filesystem::path> dev_labels;
  double dev_fraction = 0.2;
  std::optional<std::filesystem::path> parse_sidecar;
  std::optional<std::filesystem::path> pos_sidecar;
};

struct RunConfig {
  DataConfig data;
  std::vector<std::filesystem::path> affect_lexicons;
  std::vector<std::filesystem::path> semantic_lexicons;
  std::size_t parse_vocab = 4096;
  FeatureToggles features;
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path base_dir;

  nlohmann::json to_json() const {
    const auto p = [](const std::optional<std::filesystem::path>& x) {
      return x ? nlohmann::json(x->string()) : nlohmann::json(nullptr);
    };
    nlohmann::json affect = nlohmann::json::array();
    for (const auto& l : affect_lexicons) affect.push_back(l.string());
    nlohmann::json semantic = nlohmann::json::array();
    for (const auto& l : semantic_lexicons) semantic.push_back(l.string());
    return {{"data",
             {{"articles", data.articles.string()},
              {"labels", p(data.labels)},
              {"sentences", p(data.sentences)},
              {"dev_articles", p(data.dev_articles)},
              {"dev_labels", p(data.dev_labels)},
              {"dev_fraction", data.dev_fraction},
              {"parse_sidecar", p(data.parse_sidecar)},
              {"pos_sidecar", p(data.pos_sidecar)}}},
            {"lexicons", {{"affect", affect}, {"semantic", semantic}, {"parse_vocab", parse_vocab}}},
            {"features", features},
            {"model",
             {{"embed_dim", model.embed_dim},
              {"hidden_dim", model.hidden_dim},
              {"parse_dim", model.parse_dim},
              {"embed_init", model.embed_init}}},
            {"train", train}};
  }
};

namespace detail {

inline std::optional<std::filesystem::path> opt_path(const nlohmann::json& j, const char* key,
                                                     const std::filesystem::path& base) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  std::filesystem::path p = j[key].get<std::string>();
  return p.is_absolute() ? p : base / p;
}

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto* a : allowed) ok = ok || key == a;
    if (!ok) throw UsageError("config: unknown key '" + where + "." + key + "'");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base) {
  RunConfig c;
  c.base_dir = base;
  try {
    detail::check_keys(j, "<root>", {"data", "lexicons", "features", "model", "train"});
    const auto& d = j.at("data");
    detail::check_keys(d, "data",
                       {"articles", "labels", "sentences", "dev_articles", "dev_labels",
                        "dev_fraction", "parse_sidecar", "pos_sidecar"});
    c.data.articles = *detail::opt_path(d, "articles", base);
    c.data.labels = detail::opt_path(d, "labels", base);
    c.data.sentences = detail::opt_path(d, "sentences", base);
    c.data.dev_articles = detail::opt_path(d, "dev_articles", base);
    c.data.dev_labels = detail::opt_path(d, "dev_labels", base);
    c.data.dev_fraction = d.value("dev_fraction", c.data.dev_fraction);
    c.data.parse_sidecar = detail::opt_path(d, "parse_sidecar", base);
    c.data.pos_sidecar = detail::opt_path(d, "pos_sidecar", base);
    if (!(c.data.dev_fraction > 0 && c.data.dev_fraction < 1)) {
      throw UsageError("config: data.dev_fraction must lie in (0, 1)");
    }

    if (j.contains("lexicons")) {
      const auto& l = j["lexicons"];
      detail::check_keys(l, "lexicons", {"affect", "semantic", "parse_vocab"});
      const auto resolve = [&](const nlohmann::json& arr) {
        std::vector<std::filesystem::path> out;
        for (const auto& x : arr) {
          std::filesystem::path p = x.get<std::string>();
          out.push_back(p.is_absolute() ? p : base / p);
        }
        return out;
      };
      if (l.contains("affect")) c.affect_lexicons = resolve(l["affect"]);
      if (l.contains("semantic")) c.semantic_lexicons = resolve(l["semantic"]);
      c.parse_vocab = l.value("parse_vocab", c.parse_vocab);
      if (c.parse_vocab < 2) throw UsageError("config: lexicons.parse_vocab must be at least 2");
    }
    if (j.contains("features")) {
      detail::check_keys(j["features"], "features",
                         {"affect", "syntax", "semantic", "sentence", "document", "salience"});
      c.features = j["features"].get<FeatureToggles>();
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      detail::check_keys(m, "model", {"embed_dim", "hidden_dim", "parse_dim", "parse_vocab", "embed_init"});
      c.model.embed_dim = m.value("embed_dim", c.model.embed_dim);
      c.model.hidden_dim = m.value("hidden_dim", c.model.hidden_dim);
      c.model.parse_dim = m.value("parse_dim", c.model.parse_dim);
      c.model.embed_init = m.value("embed_init", c.model.embed_init);
      if (m.contains("parse_vocab")) c.parse_vocab = m["parse_vocab"].get<std::size_t>();
      if (c.model.embed_dim == 0 || c.model.hidden_dim == 0 || c.model.parse_dim == 0) {
        throw UsageError("config: model dimensions must be positive");
      }
    }
    if (j.contains("train")) {
      detail::check_keys(j["train"], "train",
                         {"batch_size", "epochs", "lr", "finetune_lr", "alpha", "l2_beta", "patience",
                          "seed", "optimizer", "weighted_loss", "class_weight_smoothing",
                          "prop_threshold", "target_f1"});
      c.train = j["train"].get<TrainConfig>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.model.parse_vocab = c.parse_vocab;
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

/// Lexicons and sidecars named by the config, loaded regardless of toggles
/// so that a checkpoint can be checked against them.
inline FeatureResources load_resources(const RunConfig& c) {
  FeatureResources r;
  for (const auto& p : c.affect_lexicons) r.affect.push_back(load_lexicon(p));
  for (const auto& p : c.semantic_lexicons) r.semantic.push_back(load_lexicon(p));
  if (c.data.parse_sidecar) r.parse = AnnotationTable::load(*c.data.parse_sidecar);
  if (c.data.pos_sidecar) r.pos = AnnotationTable::load(*c.data.pos_sidecar);
  r.parse_vocab = c.parse_vocab;
  return r;
}

}  // namespace propspan
