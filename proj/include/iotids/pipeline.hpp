#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotids/config.hpp"
#include "iotids/error.hpp"
#include "iotids/eval.hpp"
#include "iotids/featsel.hpp"
#include "iotids/format.hpp"
#include "iotids/ingest.hpp"
#include "iotids/linalg.hpp"
#include "iotids/nn.hpp"
#include "iotids/random.hpp"

namespace iotids {

inline constexpr const char* kSoftwareName = "iotids";
inline constexpr const char* kSoftwareVersion = "1.0.0";

// ---- dataset loading ------------------------------------------------------------

struct LoadedDataset {
  DatasetSchema schema;
  EncodeResult encoded;
  std::size_t source_rows = 0;  // before --sample-rows

  const DatasetTable& table() const { return encoded.table; }

  ordered_json summary() const {
    const auto& t = encoded.table;
    return {{"schema", schema.name},
            {"source_rows", source_rows},
            {"rows", t.rows()},
            {"positives", t.positives()},
            {"negatives", t.rows() - t.positives()},
            {"features", t.cols()},
            {"parse_warnings", encoded.parse_warnings}};
  }
};

inline std::uint64_t sample_seed(std::uint64_t seed) { return derive_seed(seed, 0x5a4d); }

// Reads and concatenates the configured CSV files, encodes them with a
// vocabulary fitted on the whole table, then applies the stratified subsample.
inline LoadedDataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.paths.empty()) throw ConfigError("dataset.path is not set");
  LoadedDataset out;
  out.schema = cfg.dataset.resolved_schema();
  RawTable raw;
  for (std::size_t i = 0; i < cfg.dataset.paths.size(); ++i) {
    RawTable part = load_csv(cfg.resolve(cfg.dataset.paths[i]).string(), out.schema);
    if (i == 0) raw = std::move(part);
    else raw.append(part);
  }
  out.encoded = encode(raw, out.schema);
  out.source_rows = out.encoded.table.rows();
  if (cfg.dataset.sample_rows > 0 && cfg.dataset.sample_rows < out.source_rows) {
    const auto rows = stratified_sample(out.encoded.table.labels, cfg.dataset.sample_rows, sample_seed(cfg.seed));
    out.encoded.table = out.encoded.table.subset(rows);
  }
  out.encoded.table.validate();
  return out;
}

// ---- per-fold stages ------------------------------------------------------------

struct StageSeeds {
  std::uint64_t svd = 0;
  std::uint64_t selection = 0;
  std::uint64_t train = 0;

  static StageSeeds from(std::uint64_t fold_seed) {
    return {derive_seed(fold_seed, 1), derive_seed(fold_seed, 2), derive_seed(fold_seed, 3)};
  }
};

inline std::uint64_t repetition_seed(std::uint64_t base, std::size_t repetition) { return base + repetition; }
inline std::uint64_t fold_seed(std::uint64_t repetition_seed, std::size_t fold) {
  return derive_seed(repetition_seed, fold);
}

struct SelectionOutcome {
  std::vector<std::size_t> selected;  // ascending column indices of the stage input
  std::optional<ChiSquareReport> chi;
  std::optional<FeatureRanking> ranking;  // feature ids refer to the stage input
};

// Runs the configured selection method on a training table. Ablation scores on
// an inner stratified holdout of that table so the outer test part is never seen.
inline SelectionOutcome run_selection(const DatasetTable& train, const SelectionStage& sel,
                                      const nn::TrainConfig& train_cfg, std::uint64_t seed) {
  SelectionOutcome out;
  std::vector<std::size_t> candidates(train.cols());
  for (std::size_t j = 0; j < candidates.size(); ++j) candidates[j] = j;

  if (sel.method == SelectionMethod::chi2 || sel.method == SelectionMethod::chi2_then_ablation) {
    out.chi = chi_square_scores(train, sel.bins);
    candidates = select_top_chi(*out.chi, std::min(sel.top_m, train.cols()));
    if (sel.method == SelectionMethod::chi2 && sel.top_m > train.cols())
      throw ConfigError("selection.top_m = " + std::to_string(sel.top_m) + " exceeds the " +
                        std::to_string(train.cols()) + " available features");
  }
  if ((sel.method == SelectionMethod::ablation || sel.method == SelectionMethod::chi2_then_ablation) &&
      candidates.size() >= 2) {
    const DatasetTable sub = train.select_columns(candidates);
    const FoldPlan inner = stratified_kfold(sub.labels, sel.validation_folds, derive_seed(seed, 1));
    const DataSplit split{inner.train_rows(0), inner.test_rows(0)};
    nn::TrainConfig cfg = train_cfg;
    cfg.seed = derive_seed(seed, 2);
    if (sel.epochs) cfg.epochs = *sel.epochs;
    if (sel.learning_rate) cfg.learning_rate = *sel.learning_rate;
    AblationResult ab = ablation_select(sub, split, nn::ModelSpec::cnn_selector(sub.cols()), cfg,
                                        sel.ablation_config());
    for (auto& e : ab.ranking.entries) e.feature = candidates[e.feature];
    std::vector<std::size_t> kept;
    for (std::size_t i : ab.selected) kept.push_back(candidates[i]);
    candidates = std::move(kept);
    out.ranking = std::move(ab.ranking);
  }
  out.selected = std::move(candidates);
  return out;
}

// Everything fitted on a fold's training part before the classifier.
struct FoldArtifacts {
  NormalizationStats stats;
  std::optional<SvdFactors> svd;
  SelectionOutcome selection;

  const std::vector<std::size_t>& selected() const { return selection.selected; }
};

// normalize -> project -> select, using fitted artifacts only
inline DatasetTable transform(const DatasetTable& table, const FoldArtifacts& a) {
  DatasetTable t = apply_normalizer(table, a.stats);
  if (a.svd) t = project(t, *a.svd);
  return t.select_columns(a.selected());
}

struct StageTimings {
  double normalize = 0.0;
  double svd = 0.0;
  double selection = 0.0;
  double train = 0.0;
  double evaluate = 0.0;

  StageTimings& operator+=(const StageTimings& o) {
    normalize += o.normalize;
    svd += o.svd;
    selection += o.selection;
    train += o.train;
    evaluate += o.evaluate;
    return *this;
  }

  ordered_json to_json() const {
    return {{"normalize", normalize}, {"svd", svd}, {"selection", selection}, {"train", train}, {"evaluate", evaluate}};
  }
};

namespace detail {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// Re-throws with a location prefix, keeping the error category. Contract
// violations inside the pipeline come from config combinations.
template <typename F>
auto in_stage(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
}

inline RsvdConfig rsvd_config(const SvdStage& s, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  const std::size_t limit = std::min(rows, cols);
  if (s.rank > limit)
    throw ConfigError("svd.rank = " + std::to_string(s.rank) + " exceeds min(rows, cols) = " + std::to_string(limit));
  // oversampling is clipped so k + p fits the matrix
  return {s.rank, std::min(s.oversampling, limit - s.rank), s.power_iterations, seed};
}

}  // namespace detail

inline FoldArtifacts fit_preprocessing(const DatasetTable& table, std::span<const std::size_t> train_rows,
                                       const ExperimentConfig& cfg, std::uint64_t fold_seed,
                                       const std::string& where = "fit", StageTimings* timings = nullptr) {
  const StageSeeds seeds = StageSeeds::from(fold_seed);
  detail::Stopwatch clock;
  FoldArtifacts a;
  DatasetTable train = detail::in_stage(where + " stage 'normalize'", [&] {
    a.stats = fit_normalizer(table, train_rows);
    return apply_normalizer(table.subset(train_rows), a.stats);
  });
  if (timings) timings->normalize += clock.lap();
  if (cfg.svd.enabled) {
    detail::in_stage(where + " stage 'svd'", [&] {
      a.svd = randomized_svd(train.features, detail::rsvd_config(cfg.svd, train.rows(), train.cols(), seeds.svd));
      train = project(train, *a.svd);
    });
  }
  if (timings) timings->svd += clock.lap();
  a.selection = detail::in_stage(where + " stage 'selection'",
                                 [&] { return run_selection(train, cfg.selection, cfg.train, seeds.selection); });
  if (timings) timings->selection += clock.lap();
  return a;
}

struct FoldOutcome {
  std::size_t repetition = 0;
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<std::string> selected_names;
  std::vector<double> singular_values;
  std::vector<nn::EpochStats> history;
  MetricsReport metrics;
  StageTimings timings;

  ordered_json to_json() const {
    ordered_json j;
    j["fold"] = fold;
    j["seed"] = seed;
    j["train_rows"] = train_rows;
    j["test_rows"] = test_rows;
    j["singular_values"] = singular_values;
    j["selected_features"] = selected_names;
    j["final_train_loss"] = history.empty() ? ordered_json(nullptr) : ordered_json(history.back().loss);
    j["metrics"] = metrics.to_json();
    return j;
  }
};

inline std::vector<std::string> stage_names(const DatasetTable& table, const FoldArtifacts& a) {
  std::vector<std::string> names;
  for (std::size_t j : a.selected())
    names.push_back(a.svd ? "svd_" + std::to_string(j) : table.feature_names.at(j));
  return names;
}

inline FoldOutcome run_fold(const DatasetTable& table, std::span<const std::size_t> train_rows,
                            std::span<const std::size_t> test_rows, const ExperimentConfig& cfg,
                            std::size_t repetition, std::size_t fold, std::uint64_t seed) {
  const std::string where = "repetition " + std::to_string(repetition) + " fold " + std::to_string(fold);
  FoldOutcome out;
  out.repetition = repetition;
  out.fold = fold;
  out.seed = seed;
  out.train_rows = train_rows.size();
  out.test_rows = test_rows.size();

  const FoldArtifacts a = fit_preprocessing(table, train_rows, cfg, seed, where, &out.timings);
  detail::Stopwatch clock;
  if (a.svd) out.singular_values = a.svd->s;
  out.selected_names = stage_names(table, a);

  const nn::Model model = detail::in_stage(where + " stage 'train'", [&] {
    const DatasetTable train = transform(table.subset(train_rows), a);
    nn::TrainConfig tc = cfg.train;
    tc.seed = StageSeeds::from(seed).train;
    auto result = nn::train(nn::ModelSpec::lstm_classifier(train.cols(), cfg.hidden_size), train, tc);
    out.history = std::move(result.history);
    return std::move(result.model);
  });
  out.timings.train += clock.lap();
  out.metrics = detail::in_stage(where + " stage 'evaluate'", [&] {
    const DatasetTable test = transform(table.subset(test_rows), a);
    const auto p = model.predict(test.features);
    return evaluate(test.labels, p, cfg.threshold);
  });
  out.timings.evaluate += clock.lap();
  return out;
}

// ---- orchestration -----------------------------------------------------------------

// Runs fn(0..n-1) on `threads` workers. Tasks are claimed in index order, so
// the lowest failing index is the same error a sequential run would hit.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  const std::function<void()> worker = [&] {
    for (std::size_t i; !failed && (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t extra = std::min(threads, n) > 0 ? std::min(threads, n) - 1 : 0;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < extra; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ComparisonRow {
  std::string name;
  double accuracy = 0.0;
  double delta = 0.0;  // ours - this row

  ordered_json to_json() const { return {{"name", name}, {"accuracy", accuracy}, {"delta", delta}}; }
};

// Baseline rows in the given order followed by an "ours" row.
inline std::vector<ComparisonRow> compare_baselines(double ours, std::span<const Baseline> baselines) {
  std::vector<ComparisonRow> rows;
  for (const auto& b : baselines) rows.push_back({b.name, b.accuracy, ours - b.accuracy});
  rows.push_back({"ours", ours, 0.0});
  return rows;
}

struct RepetitionResult {
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  std::vector<FoldOutcome> folds;
  FoldSummary summary;
};

struct ReportDocument {
  ordered_json config;
  ordered_json dataset;
  std::uint64_t seed = 0;
  std::vector<RepetitionResult> repetitions;
  FoldSummary overall;
  std::vector<ComparisonRow> comparison;
  StageTimings timings;       // summed over folds
  double wall_seconds = 0.0;  // whole run

  double overall_accuracy() const { return overall.get(Metric::accuracy).mean.value_or(0.0); }

  // Deterministic content only; timings live in timings_json().
  ordered_json to_json() const {
    ordered_json j;
    j["software"] = {{"name", kSoftwareName}, {"version", kSoftwareVersion}};
    j["seed"] = seed;
    j["config"] = config;
    j["dataset"] = dataset;
    ordered_json reps = ordered_json::array();
    for (const auto& r : repetitions) {
      ordered_json folds = ordered_json::array();
      for (const auto& f : r.folds) folds.push_back(f.to_json());
      reps.push_back({{"repetition", r.repetition}, {"seed", r.seed}, {"folds", folds}, {"summary", r.summary.to_json()}});
    }
    j["repetitions"] = reps;
    j["overall"] = overall.to_json();
    ordered_json rows = ordered_json::array();
    for (const auto& c : comparison) rows.push_back(c.to_json());
    j["comparison"] = rows;
    return j;
  }

  ordered_json timings_json() const {
    ordered_json folds = ordered_json::array();
    for (const auto& r : repetitions)
      for (const auto& f : r.folds)
        folds.push_back({{"repetition", f.repetition}, {"fold", f.fold}, {"stages", f.timings.to_json()}});
    return {{"wall_seconds", wall_seconds}, {"stages", timings.to_json()}, {"folds", folds}};
  }
};

inline ReportDocument run_experiment(const ExperimentConfig& cfg, const LoadedDataset& data) {
  cfg.validate();
  detail::Stopwatch wall;
  const DatasetTable& table = data.table();

  std::vector<FoldPlan> plans;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    plans.push_back(detail::in_stage("repetition " + std::to_string(r) + " stage 'folds'", [&] {
      return stratified_kfold(table.labels, cfg.k_folds, repetition_seed(cfg.seed, r));
    }));
  }
  const std::size_t tasks = cfg.repetitions * cfg.k_folds;
  std::vector<FoldOutcome> outcomes(tasks);
  parallel_for(tasks, cfg.threads, [&](std::size_t i) {
    const std::size_t r = i / cfg.k_folds;
    const std::size_t f = i % cfg.k_folds;
    const auto train_rows = plans[r].train_rows(f);
    const auto test_rows = plans[r].test_rows(f);
    outcomes[i] = run_fold(table, train_rows, test_rows, cfg, r, f, fold_seed(repetition_seed(cfg.seed, r), f));
  });

  ReportDocument doc;
  doc.config = config_to_json(cfg);
  doc.dataset = data.summary();
  doc.seed = cfg.seed;
  std::vector<MetricsReport> pooled;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    RepetitionResult rep;
    rep.repetition = r;
    rep.seed = repetition_seed(cfg.seed, r);
    std::vector<MetricsReport> reports;
    for (std::size_t f = 0; f < cfg.k_folds; ++f) {
      auto& o = outcomes[r * cfg.k_folds + f];
      reports.push_back(o.metrics);
      doc.timings += o.timings;
      rep.folds.push_back(std::move(o));
    }
    rep.summary = aggregate(reports);
    pooled.insert(pooled.end(), reports.begin(), reports.end());
    doc.repetitions.push_back(std::move(rep));
  }
  doc.overall = aggregate(pooled);
  doc.comparison = compare_baselines(doc.overall_accuracy(), cfg.baselines);
  doc.wall_seconds = wall.lap();
  return doc;
}

inline ReportDocument run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, load_dataset(cfg)); }

// ---- report files --------------------------------------------------------------

inline std::string report_json_text(const ReportDocument& doc) { return doc.to_json().dump(2) + "\n"; }

inline std::string metrics_csv_text(const ReportDocument& doc) {
  std::ostringstream out;
  out << "repetition,fold,tp,fp,tn,fn";
  for (Metric m : kAllMetrics) out << ',' << metric_name(m);
  out << '\n';
  for (const auto& r : doc.repetitions) {
    for (const auto& f : r.folds) {
      const auto& c = f.metrics.counts;
      out << r.repetition << ',' << f.fold << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn;
      for (Metric m : kAllMetrics) out << ',' << format_optional(f.metrics.get(m));
      out << '\n';
    }
  }
  return out.str();
}

// chart1: per-run fold means of every metric; chart2: accuracy against baselines
inline std::string chart_csv_text(const ReportDocument& doc) {
  std::ostringstream out;
  out << "chart,series,metric,value\n";
  for (const auto& r : doc.repetitions)
    for (Metric m : kAllMetrics)
      out << "chart1,run_" << (r.repetition + 1) << ',' << metric_name(m) << ','
          << format_optional(r.summary.get(m).mean) << '\n';
  for (const auto& c : doc.comparison)
    out << "chart2," << csv::escape(c.name) << ",accuracy," << format_double(c.accuracy) << '\n';
  return out.str();
}

namespace detail {
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw DataError("write failed: " + path.string());
}
}  // namespace detail

inline void emit_report(const ReportDocument& doc, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  detail::write_text(out_dir / "report.json", report_json_text(doc));
  detail::write_text(out_dir / "metrics.csv", metrics_csv_text(doc));
  detail::write_text(out_dir / "chart_data.csv", chart_csv_text(doc));
  detail::write_text(out_dir / "timings.json", doc.timings_json().dump(2) + "\n");
}

// ---- fitted pipeline bundle (train / evaluate subcommands) ----------------------

struct FittedPipeline {
  DatasetSchema schema;
  Encoding encoding;
  std::vector<std::string> input_names;  // encoded feature names
  FoldArtifacts artifacts;
  nn::Model model = nn::Model::zeros(nn::ModelSpec::lstm_classifier(1, 1));
  double threshold = 0.5;

  std::vector<double> predict(const DatasetTable& encoded) const {
    return model.predict(transform(encoded, artifacts).features);
  }

  void save(const std::filesystem::path& dir) const;
  static FittedPipeline load(const std::filesystem::path& dir);
};

inline FittedPipeline fit_pipeline(const LoadedDataset& data, const ExperimentConfig& cfg) {
  cfg.validate();
  const DatasetTable& table = data.table();
  std::vector<std::size_t> rows(table.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const std::uint64_t seed = derive_seed(cfg.seed, 0x7261);
  FittedPipeline p;
  p.schema = data.schema;
  p.encoding = data.encoded.encoding;
  p.input_names = table.feature_names;
  p.threshold = cfg.threshold;
  p.artifacts = fit_preprocessing(table, rows, cfg, seed, "train");
  p.model = detail::in_stage("train stage 'train'", [&] {
    const DatasetTable t = transform(table, p.artifacts);
    nn::TrainConfig tc = cfg.train;
    tc.seed = StageSeeds::from(seed).train;
    return nn::train(nn::ModelSpec::lstm_classifier(t.cols(), cfg.hidden_size), t, tc).model;
  });
  return p;
}

namespace detail {

inline nn::NamedTensor vector_tensor(std::string name, const std::vector<double>& v) {
  return {std::move(name), {{v.size()}, v}};
}

inline nn::NamedTensor matrix_tensor(std::string name, const Matrix& m) {
  return {std::move(name), {{m.rows(), m.cols()}, {m.values().begin(), m.values().end()}}};
}

inline const nn::Tensor& find_tensor(const std::vector<nn::NamedTensor>& ts, const std::string& name) {
  for (const auto& t : ts)
    if (t.name == name) return t.tensor;
  throw DataError("model bundle: missing tensor '" + name + "'");
}

inline bool has_tensor(const std::vector<nn::NamedTensor>& ts, const std::string& name) {
  return std::any_of(ts.begin(), ts.end(), [&](const auto& t) { return t.name == name; });
}

}  // namespace detail

// model.mgnn holds every numeric array; model.json holds the schema,
// category vocabulary and network shape.
inline void FittedPipeline::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<nn::NamedTensor> tensors;
  tensors.push_back(detail::vector_tensor("preprocess.mean", artifacts.stats.mean));
  tensors.push_back(detail::vector_tensor("preprocess.std", artifacts.stats.stddev));
  if (artifacts.svd) tensors.push_back(detail::matrix_tensor("preprocess.svd_v", artifacts.svd->v));
  std::vector<double> selected(artifacts.selected().begin(), artifacts.selected().end());
  tensors.push_back(detail::vector_tensor("preprocess.selected", selected));
  for (auto& t : model.to_tensors()) tensors.push_back(std::move(t));
  nn::write_mgnn((dir / "model.mgnn").string(), tensors);

  ordered_json categories = ordered_json::array();
  for (const auto& c : encoding.categorical)
    categories.push_back({{"column", c.column}, {"categories", c.categories}, {"has_other", c.has_other}});
  std::size_t hidden = 0;
  for (const auto& layer : model.spec().layers)
    if (const auto* l = std::get_if<nn::LstmLayer>(&layer)) hidden = l->hidden_size;
  ordered_json j = {{"software", {{"name", kSoftwareName}, {"version", kSoftwareVersion}}},
                    {"schema", schema_to_json(schema)},
                    {"encoding", categories},
                    {"input_names", input_names},
                    {"threshold", threshold},
                    {"model", {{"kind", "lstm_classifier"}, {"inputs", model.spec().input_width()}, {"hidden_size", hidden}}}};
  detail::write_text(dir / "model.json", j.dump(2) + "\n");
}

inline FittedPipeline FittedPipeline::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw DataError("cannot open " + (dir / "model.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model.json: " + std::string(e.what()));
  }
  FittedPipeline p;
  try {
    p.schema = schema_from_json(j.at("schema"));
    for (const auto& c : j.at("encoding"))
      p.encoding.categorical.push_back({c.at("column").get<std::string>(),
                                        c.at("categories").get<std::vector<std::string>>(),
                                        c.at("has_other").get<bool>()});
    p.input_names = j.at("input_names").get<std::vector<std::string>>();
    p.threshold = j.at("threshold").get<double>();
    const auto spec = nn::ModelSpec::lstm_classifier(j.at("model").at("inputs").get<std::size_t>(),
                                                     j.at("model").at("hidden_size").get<std::size_t>());
    const auto tensors = nn::read_mgnn((dir / "model.mgnn").string());
    p.artifacts.stats.mean = detail::find_tensor(tensors, "preprocess.mean").values;
    p.artifacts.stats.stddev = detail::find_tensor(tensors, "preprocess.std").values;
    if (detail::has_tensor(tensors, "preprocess.svd_v")) {
      const auto& v = detail::find_tensor(tensors, "preprocess.svd_v");
      if (v.shape.size() != 2) throw DataError("model bundle: preprocess.svd_v must be rank 2");
      SvdFactors f;
      f.v = Matrix(v.shape[0], v.shape[1], v.values);
      p.artifacts.svd = std::move(f);
    }
    for (double s : detail::find_tensor(tensors, "preprocess.selected").values)
      p.artifacts.selection.selected.push_back(static_cast<std::size_t>(s));
    std::vector<nn::NamedTensor> params;
    for (const auto& t : tensors)
      if (t.name.rfind("preprocess.", 0) != 0) params.push_back(t);
    p.model = nn::Model::from_tensors(spec, params);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model.json: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw DataError("model bundle: " + std::string(e.what()));
  }
  return p;
}

}  // namespace iotids
