#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "iotids/iotids.hpp"
#include "support/synthetic.hpp"

using namespace iotids;
namespace fs = std::filesystem;

namespace {

const fs::path kData = IOTIDS_TEST_DATA_DIR;
const fs::path kGolden = IOTIDS_GOLDEN_DIR;

ExperimentConfig mini_config() { return load_config((kData / "mini_config.json").string()); }

const LoadedDataset& mini_data() {
  static const LoadedDataset data = load_dataset(mini_config());
  return data;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

LoadedDataset wrap(DatasetTable t) {
  LoadedDataset d;
  d.schema = schema_preset("unsw-nb15");
  d.encoded.table = std::move(t);
  d.source_rows = d.encoded.table.rows();
  return d;
}

template <typename E, typename F>
std::string error_text(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "<no error>";
}

}  // namespace

// ---- configuration --------------------------------------------------------------

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.k_folds, 10u);
  EXPECT_EQ(c.repetitions, 5u);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.threshold, 0.5);
  EXPECT_TRUE(c.svd.enabled);
  EXPECT_EQ(c.svd.rank, 20u);
  EXPECT_EQ(c.selection.method, SelectionMethod::ablation);
  EXPECT_EQ(c.selection.max_drop, 0.005);
  EXPECT_EQ(c.selection.bins, 10u);
  EXPECT_EQ(c.dataset.preset, "unsw-nb15");
  ASSERT_EQ(c.baselines.size(), 2u);
  EXPECT_EQ(c.baselines[0].accuracy, 0.934);
  EXPECT_EQ(c.baselines[1].accuracy, 0.945);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  using nlohmann::json;
  EXPECT_THROW(config_from_json(json{{"k_fold", 3}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"svd", {{"rnak", 3}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"k_folds", "ten"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"selection", {{"method", "pca"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"k_folds", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"threshold", 1.5}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"train", {{"learning_rate", -1.0}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"dataset", {{"schema", "kdd99"}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json::array()), ConfigError);
  EXPECT_THROW(config_from_json(json{{"selection", {{"epochs", 0}}}}), ConfigError);
  const auto msg = error_text<ConfigError>([] { config_from_json(json{{"svd", {{"rnak", 3}}}}); });
  EXPECT_NE(msg.find("rnak"), std::string::npos);
}

TEST(Config, DatasetForms) {
  using nlohmann::json;
  const auto one = config_from_json(json{{"dataset", {{"path", "a.csv"}}}}, "/base");
  EXPECT_EQ(one.dataset.paths, (std::vector<std::string>{"a.csv"}));
  EXPECT_EQ(one.resolve("a.csv"), fs::path("/base/a.csv"));
  EXPECT_EQ(one.resolve("/abs/b.csv"), fs::path("/abs/b.csv"));
  const auto two = config_from_json(json{{"dataset", {{"path", {"a.csv", "b.csv"}}}}});
  EXPECT_EQ(two.dataset.paths.size(), 2u);
  const auto custom = config_from_json(json::parse(R"({"dataset": {"schema": {
      "name": "toy", "features": ["x", {"name": "kind", "kind": "categorical"}],
      "label_column": "y", "positive_label_values": ["bad"]}}})"));
  ASSERT_TRUE(custom.dataset.schema.has_value());
  EXPECT_EQ(custom.dataset.schema->feature_columns[1].kind, ColumnKind::categorical);
  EXPECT_EQ(custom.dataset.resolved_schema().name, "toy");
}

TEST(Config, LoadFileErrors) {
  EXPECT_THROW(load_config((kData / "does_not_exist.json").string()), ConfigError);
  const fs::path bad = fs::temp_directory_path() / "iotids_bad_config.json";
  std::ofstream(bad) << "{ \"k_folds\": ";
  EXPECT_THROW(load_config(bad.string()), ConfigError);
  fs::remove(bad);
}

TEST(Config, SampleConfigsParse) {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(IOTIDS_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    ++seen;
  }
  EXPECT_GE(seen, 4u);
  const auto quick = load_config((fs::path(IOTIDS_CONFIG_DIR) / "quick.json").string());
  EXPECT_NO_THROW(load_dataset(quick));
}

TEST(Config, EchoRoundTrips) {
  auto c = mini_config();
  c.selection.max_removals = 4;
  c.selection.epochs = 20;
  c.selection.learning_rate = 0.01;
  const auto echo = config_to_json(c);
  const auto again = config_to_json(config_from_json(nlohmann::json::parse(echo.dump())));
  EXPECT_EQ(echo.dump(), again.dump());
  EXPECT_FALSE(echo.contains("threads"));
  EXPECT_EQ(echo["selection"]["method"], "ablation");
}

// ---- baseline comparison ----------------------------------------------------------

TEST(Comparison, DeltasAgainstBaselines) {
  const auto base = default_baselines();
  const auto rows = compare_baselines(0.955, base);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].name, "method21");
  EXPECT_NEAR(rows[0].delta, 0.021, 1e-12);
  EXPECT_EQ(rows[1].name, "method19");
  EXPECT_NEAR(rows[1].delta, 0.010, 1e-12);
  EXPECT_EQ(rows[2].name, "ours");
  EXPECT_EQ(rows[2].accuracy, 0.955);
  EXPECT_EQ(rows[2].delta, 0.0);
  const auto only = compare_baselines(0.9, std::vector<Baseline>{});
  ASSERT_EQ(only.size(), 1u);
  EXPECT_EQ(only[0].name, "ours");
}

// ---- seeds and helpers ------------------------------------------------------------

TEST(Seeds, StreamsAreDistinct) {
  const auto s = StageSeeds::from(fold_seed(repetition_seed(42, 1), 3));
  EXPECT_NE(s.svd, s.selection);
  EXPECT_NE(s.selection, s.train);
  EXPECT_EQ(repetition_seed(42, 2), 44u);
  EXPECT_NE(fold_seed(42, 0), fold_seed(42, 1));
}

TEST(ParallelFor, RunsEveryIndexAndReportsLowestFailure) {
  std::vector<int> hits(40, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 40);
  const auto msg = error_text<DataError>([] {
    parallel_for(10, 1, [](std::size_t i) {
      if (i >= 3) throw DataError("task " + std::to_string(i));
    });
  });
  EXPECT_EQ(msg, "task 3");
}

// ---- dataset loading --------------------------------------------------------------

TEST(LoadDataset, SummaryConcatenationAndSampling) {
  const auto& d = mini_data();
  EXPECT_EQ(d.table().rows(), 400u);
  EXPECT_EQ(d.summary()["features"], d.table().cols());
  EXPECT_EQ(d.summary()["positives"].get<std::size_t>() + d.summary()["negatives"].get<std::size_t>(), 400u);

  auto cfg = mini_config();
  cfg.dataset.paths = {"unsw_mini.csv", "unsw_mini.csv"};
  EXPECT_EQ(load_dataset(cfg).table().rows(), 800u);

  cfg = mini_config();
  cfg.dataset.sample_rows = 100;
  const auto s = load_dataset(cfg);
  EXPECT_EQ(s.table().rows(), 100u);
  EXPECT_EQ(s.source_rows, 400u);
  const double full_rate = static_cast<double>(d.table().positives()) / 400.0;
  EXPECT_NEAR(static_cast<double>(s.table().positives()) / 100.0, full_rate, 0.011);

  cfg.dataset.paths = {"missing.csv"};
  EXPECT_THROW(load_dataset(cfg), DataError);
  cfg.dataset.paths.clear();
  EXPECT_THROW(load_dataset(cfg), ConfigError);
}

// ---- leakage guard ------------------------------------------------------------------

TEST(Leakage, TestRowsNeverInfluenceFittedArtifacts) {
  auto cfg = mini_config();
  for (auto method : {SelectionMethod::ablation, SelectionMethod::chi2_then_ablation}) {
    cfg.selection.method = method;
    cfg.selection.top_m = 6;
    const DatasetTable& table = mini_data().table();
    const auto plan = stratified_kfold(table.labels, cfg.k_folds, 11);
    const auto train = plan.train_rows(1);
    const auto test = plan.test_rows(1);
    const auto a = fit_preprocessing(table, train, cfg, 99);

    DatasetTable mutated = table;
    Rng rng(5);
    for (std::size_t r : test) {
      for (std::size_t j = 0; j < mutated.cols(); ++j) mutated.features(r, j) = 1e3 * rng.normal();
      mutated.labels[r] = 1 - mutated.labels[r];
    }
    const auto b = fit_preprocessing(mutated, train, cfg, 99);

    EXPECT_EQ(a.stats.mean, b.stats.mean);
    EXPECT_EQ(a.stats.stddev, b.stats.stddev);
    ASSERT_TRUE(a.svd && b.svd);
    EXPECT_EQ(a.svd->s, b.svd->s);
    EXPECT_EQ(a.svd->v, b.svd->v);
    EXPECT_EQ(a.svd->u, b.svd->u);
    EXPECT_EQ(a.selected(), b.selected());
    ASSERT_TRUE(a.selection.ranking && b.selection.ranking);
    for (std::size_t i = 0; i < a.selection.ranking->entries.size(); ++i)
      EXPECT_EQ(a.selection.ranking->entries[i].test_accuracy, b.selection.ranking->entries[i].test_accuracy);
  }
}

// ---- stage composition ---------------------------------------------------------------

TEST(RunFold, SkippedStagesMatchDirectComposition) {
  auto cfg = mini_config();
  cfg.svd.enabled = false;
  cfg.selection.method = SelectionMethod::none;
  const DatasetTable& table = mini_data().table();
  const auto plan = stratified_kfold(table.labels, 3, 1);
  const auto train_rows = plan.train_rows(0);
  const auto test_rows = plan.test_rows(0);
  const std::uint64_t seed = 1234;
  const auto outcome = run_fold(table, train_rows, test_rows, cfg, 0, 0, seed);

  const auto stats = fit_normalizer(table, train_rows);
  const auto train = apply_normalizer(table.subset(train_rows), stats);
  const auto test = apply_normalizer(table.subset(test_rows), stats);
  nn::TrainConfig tc = cfg.train;
  tc.seed = StageSeeds::from(seed).train;
  const auto model = nn::train(nn::ModelSpec::lstm_classifier(train.cols(), cfg.hidden_size), train, tc).model;
  const auto direct = evaluate(test.labels, model.predict(test.features), cfg.threshold);

  EXPECT_EQ(outcome.metrics.counts, direct.counts);
  EXPECT_EQ(outcome.metrics.to_json().dump(), direct.to_json().dump());
  EXPECT_EQ(outcome.selected_names, table.feature_names);
  EXPECT_TRUE(outcome.singular_values.empty());
}

TEST(RunFold, SelectionScheduleOverride) {
  auto cfg = mini_config();
  const DatasetTable& table = mini_data().table();
  const auto plan = stratified_kfold(table.labels, 3, 1);
  const auto base = fit_preprocessing(table, plan.train_rows(0), cfg, 3);
  // an override equal to the inherited schedule changes nothing
  cfg.selection.epochs = cfg.train.epochs;
  cfg.selection.learning_rate = cfg.train.learning_rate;
  const auto same = fit_preprocessing(table, plan.train_rows(0), cfg, 3);
  EXPECT_EQ(base.selection.ranking->full_test_accuracy, same.selection.ranking->full_test_accuracy);
  EXPECT_EQ(base.selected(), same.selected());
  cfg.selection.epochs = 1;
  cfg.selection.learning_rate = 0.5;
  const auto other = fit_preprocessing(table, plan.train_rows(0), cfg, 3);
  EXPECT_NE(base.selection.ranking->full_train_accuracy, other.selection.ranking->full_train_accuracy);
}

TEST(RunFold, ChiSelectionKeepsTopM) {
  auto cfg = mini_config();
  cfg.selection.method = SelectionMethod::chi2;
  cfg.selection.top_m = 5;
  const DatasetTable& table = mini_data().table();
  const auto plan = stratified_kfold(table.labels, 3, 1);
  const auto a = fit_preprocessing(table, plan.train_rows(0), cfg, 3);
  EXPECT_EQ(a.selected().size(), 5u);
  EXPECT_EQ(transform(table, a).cols(), 5u);
  cfg.selection.top_m = 9;  // more than the 8 svd components
  EXPECT_THROW(fit_preprocessing(table, plan.train_rows(0), cfg, 3), ConfigError);
}

TEST(RunExperiment, SeparableDataThroughThePipeline) {
  ExperimentConfig cfg;
  cfg.k_folds = 5;
  cfg.repetitions = 1;
  cfg.svd.enabled = false;
  cfg.selection.method = SelectionMethod::none;
  cfg.hidden_size = 16;
  cfg.train.epochs = 10;
  const auto doc = run_experiment(cfg, wrap(iotids::testing::separable_table(600, 21)));
  EXPECT_GE(doc.overall_accuracy(), 0.95);
}

// ---- error reporting --------------------------------------------------------------

TEST(RunExperiment, ErrorsNameStageAndFold) {
  auto cfg = mini_config();
  cfg.svd.rank = 500;
  const auto msg = error_text<ConfigError>([&] { run_experiment(cfg, mini_data()); });
  EXPECT_NE(msg.find("repetition 0 fold 0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("svd"), std::string::npos) << msg;

  cfg = mini_config();
  cfg.k_folds = 1000;  // more folds than minority rows
  const auto folds = error_text<DataError>([&] { run_experiment(cfg, mini_data()); });
  EXPECT_NE(folds.find("stage 'folds'"), std::string::npos) << folds;
}

// ---- reports ---------------------------------------------------------------------

class MiniExperiment : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto cfg = mini_config();
    doc_ = new ReportDocument(run_experiment(cfg, mini_data()));
    cfg.threads = 3;
    threaded_ = new ReportDocument(run_experiment(cfg, mini_data()));
  }
  static void TearDownTestSuite() {
    delete doc_;
    delete threaded_;
  }
  static ReportDocument* doc_;
  static ReportDocument* threaded_;
};
ReportDocument* MiniExperiment::doc_ = nullptr;
ReportDocument* MiniExperiment::threaded_ = nullptr;

TEST_F(MiniExperiment, ThreadCountDoesNotChangeOutput) {
  EXPECT_EQ(report_json_text(*doc_), report_json_text(*threaded_));
  EXPECT_EQ(metrics_csv_text(*doc_), metrics_csv_text(*threaded_));
  EXPECT_EQ(chart_csv_text(*doc_), chart_csv_text(*threaded_));
}

TEST_F(MiniExperiment, RerunIsIdentical) {
  const auto again = run_experiment(mini_config(), mini_data());
  EXPECT_EQ(report_json_text(*doc_), report_json_text(again));
}

TEST_F(MiniExperiment, CsvShapes) {
  const auto metrics = metrics_csv_text(*doc_);
  EXPECT_EQ(line_count(metrics), 1u + 2 * 3);
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')),
            "repetition,fold,tp,fp,tn,fn,fpr,frr,accuracy,precision,recall,f_measure");
  const auto chart = chart_csv_text(*doc_);
  EXPECT_EQ(line_count(chart), 1u + 2 * 6 + 3);
  EXPECT_NE(chart.find("chart1,run_1,accuracy,"), std::string::npos);
  EXPECT_NE(chart.find("chart2,method21,accuracy,0.934\n"), std::string::npos);
  EXPECT_NE(chart.find("chart2,method19,accuracy,0.945\n"), std::string::npos);
}

TEST_F(MiniExperiment, ReportStructure) {
  const auto j = doc_->to_json();
  EXPECT_EQ(j["software"]["name"], "iotids");
  EXPECT_EQ(j["repetitions"].size(), 2u);
  EXPECT_EQ(j["repetitions"][0]["folds"].size(), 3u);
  EXPECT_EQ(j["comparison"].back()["name"], "ours");
  EXPECT_EQ(j["comparison"].back()["accuracy"].get<double>(), doc_->overall_accuracy());
  EXPECT_NEAR(j["comparison"][0]["delta"].get<double>(), doc_->overall_accuracy() - 0.934, 1e-15);
  EXPECT_EQ(report_json_text(*doc_).find("seconds"), std::string::npos);
  // the report parses back to the same document
  EXPECT_EQ(nlohmann::ordered_json::parse(report_json_text(*doc_)).dump(2) + "\n", report_json_text(*doc_));
  for (const auto& rep : j["repetitions"])
    for (const auto& f : rep["folds"]) EXPECT_LE(f["selected_features"].size(), 8u);
}

TEST_F(MiniExperiment, EmitWritesAllFiles) {
  const fs::path dir = fs::temp_directory_path() / "iotids_emit_test";
  fs::remove_all(dir);
  emit_report(*doc_, dir);
  for (const char* name : {"report.json", "metrics.csv", "chart_data.csv", "timings.json"})
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  EXPECT_EQ(slurp(dir / "report.json"), report_json_text(*doc_));
  const auto timings = nlohmann::json::parse(slurp(dir / "timings.json"));
  EXPECT_TRUE(timings.contains("wall_seconds"));
  EXPECT_EQ(timings["folds"].size(), 6u);
  fs::remove_all(dir);
}

TEST_F(MiniExperiment, MatchesGoldenReport) {
  const fs::path golden = kGolden / "mini_report.json";
  const std::string text = report_json_text(*doc_);
  if (std::getenv("IOTIDS_UPDATE_GOLDEN")) {
    std::ofstream(golden, std::ios::binary) << text;
    GTEST_SKIP() << "golden file rewritten";
  }
  ASSERT_TRUE(fs::exists(golden)) << "run with IOTIDS_UPDATE_GOLDEN=1 to create " << golden;
  EXPECT_EQ(text, slurp(golden));
}

// ---- saved pipeline --------------------------------------------------------------

TEST(FittedPipeline, SaveLoadRoundTrip) {
  auto cfg = mini_config();
  const auto p = fit_pipeline(mini_data(), cfg);
  const fs::path dir = fs::temp_directory_path() / "iotids_model_test";
  fs::remove_all(dir);
  p.save(dir);
  EXPECT_TRUE(fs::exists(dir / "model.mgnn"));
  EXPECT_TRUE(fs::exists(dir / "model.json"));
  const auto q = FittedPipeline::load(dir);
  EXPECT_EQ(q.input_names, p.input_names);
  EXPECT_EQ(q.artifacts.selected(), p.artifacts.selected());
  EXPECT_EQ(q.predict(mini_data().table()), p.predict(mini_data().table()));
  EXPECT_EQ(q.threshold, p.threshold);
  fs::remove_all(dir);
  EXPECT_THROW(FittedPipeline::load(dir), DataError);
}
