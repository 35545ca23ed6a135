#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotids/error.hpp"
#include "iotids/featsel.hpp"
#include "iotids/ingest.hpp"
#include "iotids/nn/train.hpp"

namespace iotids {

using ordered_json = nlohmann::ordered_json;

enum class SelectionMethod { none, chi2, ablation, chi2_then_ablation };

inline const char* to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::none: return "none";
    case SelectionMethod::chi2: return "chi2";
    case SelectionMethod::ablation: return "ablation";
    case SelectionMethod::chi2_then_ablation: return "chi2-then-ablation";
  }
  return "?";
}

inline SelectionMethod selection_method_from_string(const std::string& s) {
  if (s == "none") return SelectionMethod::none;
  if (s == "chi2") return SelectionMethod::chi2;
  if (s == "ablation") return SelectionMethod::ablation;
  if (s == "chi2-then-ablation") return SelectionMethod::chi2_then_ablation;
  throw ConfigError("unknown selection method '" + s + "'");
}

struct DatasetConfig {
  std::vector<std::string> paths;  // concatenated in order
  std::string preset = "unsw-nb15";
  std::optional<DatasetSchema> schema;  // overrides the preset when set
  std::size_t sample_rows = 0;          // 0 = use every row

  DatasetSchema resolved_schema() const { return schema ? *schema : schema_preset(preset); }
};

struct SvdStage {
  bool enabled = true;
  std::size_t rank = 20;
  std::size_t oversampling = 10;
  std::size_t power_iterations = 2;
};

struct SelectionStage {
  SelectionMethod method = SelectionMethod::ablation;
  double max_drop = 0.005;
  std::optional<std::size_t> max_removals;
  bool retrain = false;
  std::size_t top_m = 10;            // chi2 keep count
  std::size_t bins = 10;             // chi2 quantile bins
  std::size_t validation_folds = 5;  // ablation holds out 1/validation_folds of the training part
  std::optional<std::size_t> epochs;   // selection-network schedule; unset = use `train`
  std::optional<double> learning_rate;

  SelectionConfig ablation_config() const { return {max_drop, max_removals, retrain}; }
};

struct Baseline {
  std::string name;
  double accuracy = 0.0;
};

inline std::vector<Baseline> default_baselines() { return {{"method21", 0.934}, {"method19", 0.945}}; }

struct ExperimentConfig {
  DatasetConfig dataset;
  std::size_t k_folds = 10;
  std::size_t repetitions = 5;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  SvdStage svd;
  SelectionStage selection;
  nn::TrainConfig train;  // seed is derived per fold
  std::size_t hidden_size = 64;
  std::vector<Baseline> baselines = default_baselines();
  std::size_t threads = 1;  // execution only, not part of the echoed config
  std::filesystem::path base_dir;  // relative dataset paths resolve against this

  void validate() const {
    if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");
    if (svd.enabled && svd.rank < 1) throw ConfigError("svd.rank must be >= 1");
    if (selection.bins < 2) throw ConfigError("selection.bins must be >= 2");
    if (selection.top_m < 1) throw ConfigError("selection.top_m must be >= 1");
    if (selection.validation_folds < 2) throw ConfigError("selection.validation_folds must be >= 2");
    if (!(selection.max_drop >= 0.0)) throw ConfigError("selection.max_drop must be >= 0");
    if (hidden_size < 1) throw ConfigError("train.hidden_size must be >= 1");
    if (selection.epochs && *selection.epochs < 1) throw ConfigError("selection.epochs must be >= 1");
    if (selection.learning_rate && !(*selection.learning_rate > 0.0))
      throw ConfigError("selection.learning_rate must be > 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    try {
      train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (dataset.schema) dataset.schema->validate();
    else schema_preset(dataset.preset);
  }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }
};

// ---- JSON mapping -------------------------------------------------------------

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                           const std::string& where) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline ordered_json schema_to_json(const DatasetSchema& s) {
  ordered_json features = ordered_json::array();
  for (const auto& c : s.feature_columns)
    features.push_back({{"name", c.name}, {"kind", c.kind == ColumnKind::numeric ? "numeric" : "categorical"}});
  return {{"name", s.name},
          {"features", features},
          {"label_column", s.label_column},
          {"positive_label_values", s.positive_label_values},
          {"delimiter", std::string(1, s.delimiter)}};
}

inline DatasetSchema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("schema must be an object or a preset name");
  detail::reject_unknown(j, {"name", "features", "label_column", "positive_label_values", "delimiter"}, "schema");
  DatasetSchema s;
  detail::read(j, "name", s.name);
  detail::read(j, "label_column", s.label_column);
  std::vector<std::string> positives;
  detail::read(j, "positive_label_values", positives);
  s.positive_label_values = {positives.begin(), positives.end()};
  std::string delim = ",";
  detail::read(j, "delimiter", delim);
  if (delim.size() != 1) throw ConfigError("schema.delimiter must be a single character");
  s.delimiter = delim[0];
  if (!j.contains("features") || !j.at("features").is_array()) throw ConfigError("schema.features must be an array");
  for (const auto& f : j.at("features")) {
    ColumnSpec c;
    std::string kind = "numeric";
    if (f.is_string()) {
      c.name = f.get<std::string>();
    } else {
      detail::reject_unknown(f, {"name", "kind"}, "schema.features[]");
      detail::read(f, "name", c.name);
      detail::read(f, "kind", kind);
    }
    if (kind == "numeric") c.kind = ColumnKind::numeric;
    else if (kind == "categorical") c.kind = ColumnKind::categorical;
    else throw ConfigError("schema: unknown column kind '" + kind + "'");
    s.feature_columns.push_back(std::move(c));
  }
  s.validate();
  return s;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(j, {"dataset", "k_folds", "repetitions", "seed", "threshold", "threads", "svd",
                             "selection", "train", "baselines"},
                         "config");
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  detail::read(j, "k_folds", c.k_folds);
  detail::read(j, "repetitions", c.repetitions);
  detail::read(j, "seed", c.seed);
  detail::read(j, "threshold", c.threshold);
  detail::read(j, "threads", c.threads);

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::reject_unknown(d, {"path", "paths", "schema", "sample_rows"}, "dataset");
    if (d.contains("path")) {
      if (d.at("path").is_string()) c.dataset.paths = {d.at("path").get<std::string>()};
      else detail::read(d, "path", c.dataset.paths);
    }
    if (d.contains("paths")) detail::read(d, "paths", c.dataset.paths);
    if (d.contains("schema")) {
      if (d.at("schema").is_string()) c.dataset.preset = d.at("schema").get<std::string>();
      else c.dataset.schema = schema_from_json(d.at("schema"));
    }
    detail::read(d, "sample_rows", c.dataset.sample_rows);
  }
  if (j.contains("svd")) {
    const auto& s = j.at("svd");
    detail::reject_unknown(s, {"enabled", "rank", "oversampling", "power_iterations"}, "svd");
    detail::read(s, "enabled", c.svd.enabled);
    detail::read(s, "rank", c.svd.rank);
    detail::read(s, "oversampling", c.svd.oversampling);
    detail::read(s, "power_iterations", c.svd.power_iterations);
  }
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    detail::reject_unknown(s, {"method", "max_drop", "max_removals", "retrain", "top_m", "bins", "validation_folds",
                               "epochs", "learning_rate"},
                           "selection");
    std::string method = to_string(c.selection.method);
    detail::read(s, "method", method);
    c.selection.method = selection_method_from_string(method);
    detail::read(s, "max_drop", c.selection.max_drop);
    if (s.contains("max_removals") && !s.at("max_removals").is_null()) {
      std::size_t m = 0;
      detail::read(s, "max_removals", m);
      c.selection.max_removals = m;
    }
    detail::read(s, "retrain", c.selection.retrain);
    detail::read(s, "top_m", c.selection.top_m);
    detail::read(s, "bins", c.selection.bins);
    detail::read(s, "validation_folds", c.selection.validation_folds);
    if (s.contains("epochs") && !s.at("epochs").is_null()) {
      std::size_t e = 0;
      detail::read(s, "epochs", e);
      c.selection.epochs = e;
    }
    if (s.contains("learning_rate") && !s.at("learning_rate").is_null()) {
      double lr = 0.0;
      detail::read(s, "learning_rate", lr);
      c.selection.learning_rate = lr;
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t, {"epochs", "batch_size", "learning_rate", "rmsprop_decay", "rmsprop_epsilon",
                               "hidden_size"},
                           "train");
    detail::read(t, "epochs", c.train.epochs);
    detail::read(t, "batch_size", c.train.batch_size);
    detail::read(t, "learning_rate", c.train.learning_rate);
    detail::read(t, "rmsprop_decay", c.train.rmsprop_decay);
    detail::read(t, "rmsprop_epsilon", c.train.rmsprop_epsilon);
    detail::read(t, "hidden_size", c.hidden_size);
  }
  if (j.contains("baselines")) {
    if (!j.at("baselines").is_array()) throw ConfigError("baselines must be an array");
    c.baselines.clear();
    for (const auto& b : j.at("baselines")) {
      detail::reject_unknown(b, {"name", "accuracy"}, "baselines[]");
      Baseline row;
      detail::read(b, "name", row.name);
      detail::read(b, "accuracy", row.accuracy);
      c.baselines.push_back(row);
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path());
}

// Fully resolved configuration, every default spelled out. `threads` is left
// out because it never changes results.
inline ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json dataset;
  dataset["paths"] = c.dataset.paths;
  dataset["schema"] = schema_to_json(c.dataset.resolved_schema());
  dataset["sample_rows"] = c.dataset.sample_rows;
  ordered_json baselines = ordered_json::array();
  for (const auto& b : c.baselines) baselines.push_back({{"name", b.name}, {"accuracy", b.accuracy}});
  return {{"dataset", dataset},
          {"k_folds", c.k_folds},
          {"repetitions", c.repetitions},
          {"seed", c.seed},
          {"threshold", c.threshold},
          {"svd",
           {{"enabled", c.svd.enabled},
            {"rank", c.svd.rank},
            {"oversampling", c.svd.oversampling},
            {"power_iterations", c.svd.power_iterations}}},
          {"selection",
           {{"method", to_string(c.selection.method)},
            {"max_drop", c.selection.max_drop},
            {"max_removals", c.selection.max_removals ? ordered_json(*c.selection.max_removals) : ordered_json(nullptr)},
            {"retrain", c.selection.retrain},
            {"top_m", c.selection.top_m},
            {"bins", c.selection.bins},
            {"validation_folds", c.selection.validation_folds},
            {"epochs", c.selection.epochs ? ordered_json(*c.selection.epochs) : ordered_json(nullptr)},
            {"learning_rate",
             c.selection.learning_rate ? ordered_json(*c.selection.learning_rate) : ordered_json(nullptr)}}},
          {"train",
           {{"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"learning_rate", c.train.learning_rate},
            {"rmsprop_decay", c.train.rmsprop_decay},
            {"rmsprop_epsilon", c.train.rmsprop_epsilon},
            {"hidden_size", c.hidden_size}}},
          {"baselines", baselines}};
}

}  // namespace iotids
